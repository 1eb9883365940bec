//! Offline analysis of mobile application traces for computation offloading.
//!
//! Two pipelines live here:
//!
//! * traffic attribution: packet and method traces are parsed ([`trace`]),
//!   flows are matched to threads and packets to network calls
//!   ([`correlator`]), per-thread call trees carry the attributed traffic and
//!   energy savings bounds ([`calltree`], [`energy`]);
//! * constraint identification over a code-facts document ([`codefacts`]).

pub mod calltree;
pub mod codefacts;
pub mod correlator;
pub mod energy;
pub mod trace;

pub use calltree::{aggregate_traffic, build_call_tree, emit_dot, emit_dot_all, emit_report, CallNode, ThreadCallTree};
pub use codefacts::{
    analyze_all, load_facts, summarize_stats, CodeFactsDb, ConstraintConfig, ConstraintFinding, Reach,
};
pub use correlator::{
    assign_flows_to_threads, associate_packets_to_calls, bin_events, cross_correlation, BinnedSeries,
    CorrelationParams, FlowAssignment, NetworkCallFilter,
};
pub use energy::{energy_bounds, EnergyBounds, EnergyModel, Horizon, RrcModelParams, WifiModelParams};
pub use trace::{
    parse_method_trace, parse_packet_trace, segment_flows, Direction, Flow, FlowKey, MethodEvent, MethodTrace,
    PacketRecord, PacketTrace, ThreadTrace, Transport,
};
