//! Flow-to-thread matching by binned cross-correlation and packet-to-call
//! association by nearest network-related enter event.

use std::fmt::Write as _;

use thiserror::Error;

use crate::trace::{EventKind, Flow, PacketTrace, ThreadTrace};

/// Two best scores closer than this mark an assignment as low-confidence.
pub const LOW_CONFIDENCE_MARGIN: f64 = 0.1;

pub const DEFAULT_NETWORK_PREFIXES: &[&str] =
    &["java.net.", "javax.net.", "org.apache.http.", "android.net.", "libcore.io."];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrelationError {
    #[error("bin width must be positive, got {0}")]
    InvalidBinWidth(i64),
    #[error("binning range end {end} precedes start {start}")]
    InvalidRange { start: i64, end: i64 },
    #[error("series binning mismatch: {0}")]
    Mismatch(String),
    #[error("threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("network-call filter has no prefixes")]
    EmptyFilter,
}

/// Event counts per fixed-width time bin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinnedSeries {
    pub bin_width_us: i64,
    pub start_us: i64,
    pub counts: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkCallFilter {
    pub prefixes: Vec<String>,
}

impl Default for NetworkCallFilter {
    fn default() -> Self {
        NetworkCallFilter { prefixes: DEFAULT_NETWORK_PREFIXES.iter().map(|s| s.to_string()).collect() }
    }
}

impl NetworkCallFilter {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(prefixes: I) -> Self {
        NetworkCallFilter { prefixes: prefixes.into_iter().map(Into::into).collect() }
    }

    pub fn matches(&self, method_id: &str) -> bool {
        self.prefixes.iter().any(|p| method_id.starts_with(p.as_str()))
    }

    /// `(event index, timestamp)` of the thread's network-related enter events.
    pub fn network_enters(&self, thread: &ThreadTrace) -> Vec<(usize, i64)> {
        thread
            .events
            .iter()
            .enumerate()
            .filter(|(_, e)| e.kind == EventKind::Enter && self.matches(&e.method_id))
            .map(|(i, e)| (i, e.timestamp_us))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationParams {
    pub bin_width_us: i64,
    pub max_lag_bins: usize,
    pub threshold: f64,
}

impl Default for CorrelationParams {
    fn default() -> Self {
        CorrelationParams { bin_width_us: 100_000, max_lag_bins: 2, threshold: 0.3 }
    }
}

impl CorrelationParams {
    pub fn validate(&self) -> Result<(), CorrelationError> {
        if self.bin_width_us <= 0 {
            return Err(CorrelationError::InvalidBinWidth(self.bin_width_us));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(CorrelationError::InvalidThreshold(self.threshold));
        }
        Ok(())
    }
}

/// Thread match for one flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowVerdict {
    pub thread_id: Option<u64>,
    /// Best score over all candidate threads (0 when there are none).
    pub score: f64,
    /// Score against every thread that has network-related calls, by thread id.
    pub scores: Vec<(u64, f64)>,
    pub low_confidence: bool,
}

/// The network-related enter event a packet was attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketCall {
    pub thread_id: u64,
    /// Index into the thread's event list.
    pub event_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowAssignment {
    pub flows: Vec<FlowVerdict>,
    /// Indexed like the packet trace; `None` until packet-level association.
    pub packets: Vec<Option<PacketCall>>,
    pub warnings: Vec<String>,
}

impl FlowAssignment {
    /// Packet indices attributed to `thread_id`, ascending.
    pub fn packets_of_thread(&self, thread_id: u64) -> Vec<usize> {
        self.packets
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_some_and(|c| c.thread_id == thread_id))
            .map(|(i, _)| i)
            .collect()
    }

    /// Renders the assignment report: flow lines, then one line per packet.
    pub fn to_report(&self, trace: &PacketTrace, flows: &[Flow], threads: &[ThreadTrace]) -> String {
        let mut flow_of_packet = vec![None; trace.len()];
        for (fi, flow) in flows.iter().enumerate() {
            for &p in &flow.packet_indices {
                flow_of_packet[p] = Some(fi);
            }
        }
        let mut out = String::from("# flow_index,thread_id,score,low_confidence\n");
        for (fi, v) in self.flows.iter().enumerate() {
            let thread = v.thread_id.map_or_else(|| "none".to_string(), |t| t.to_string());
            let _ = writeln!(out, "{fi},{thread},{:.6},{}", v.score, v.low_confidence);
        }
        out.push_str("# packet_index,flow_index,method_id,enter_timestamp_us\n");
        for (pi, call) in self.packets.iter().enumerate() {
            let flow = flow_of_packet[pi].map_or_else(|| "none".to_string(), |f| f.to_string());
            let event = call.and_then(|c| {
                threads.iter().find(|t| t.thread_id == c.thread_id).and_then(|t| t.events.get(c.event_index))
            });
            match event {
                Some(e) => {
                    let _ = writeln!(out, "{pi},{flow},{},{}", e.method_id, e.timestamp_us);
                }
                None => {
                    let _ = writeln!(out, "{pi},{flow},none,none");
                }
            }
        }
        out
    }
}

/// Buckets timestamps into bins of `bin_width_us` covering `[start_us, end_us)`.
///
/// Returns the series and the number of timestamps dropped for lying outside
/// the range. The series always has at least one bin.
pub fn bin_events(
    timestamps: &[i64],
    bin_width_us: i64,
    start_us: i64,
    end_us: i64,
) -> Result<(BinnedSeries, usize), CorrelationError> {
    if bin_width_us <= 0 {
        return Err(CorrelationError::InvalidBinWidth(bin_width_us));
    }
    if end_us < start_us {
        return Err(CorrelationError::InvalidRange { start: start_us, end: end_us });
    }
    let span = end_us - start_us;
    let len = ((span + bin_width_us - 1) / bin_width_us).max(1) as usize;
    let mut counts = vec![0u32; len];
    let mut dropped = 0;
    for &t in timestamps {
        if t < start_us || t >= end_us {
            dropped += 1;
            continue;
        }
        counts[((t - start_us) / bin_width_us) as usize] += 1;
    }
    Ok((BinnedSeries { bin_width_us, start_us, counts }, dropped))
}

/// Maximum Pearson correlation of `a` against `b` shifted by up to
/// `max_lag_bins` bins either way. Positions shifted out of range contribute
/// nothing (their mean-centered value is taken as zero). Returns 0 when
/// either series is constant.
pub fn cross_correlation(a: &BinnedSeries, b: &BinnedSeries, max_lag_bins: usize) -> Result<f64, CorrelationError> {
    if a.bin_width_us != b.bin_width_us || a.start_us != b.start_us || a.counts.len() != b.counts.len() {
        return Err(CorrelationError::Mismatch(format!(
            "width {}/{} start {}/{} len {}/{}",
            a.bin_width_us,
            b.bin_width_us,
            a.start_us,
            b.start_us,
            a.counts.len(),
            b.counts.len()
        )));
    }
    let centered = |s: &BinnedSeries| {
        let mean = s.counts.iter().map(|&c| c as f64).sum::<f64>() / s.counts.len() as f64;
        s.counts.iter().map(|&c| c as f64 - mean).collect::<Vec<_>>()
    };
    let da = centered(a);
    let db = centered(b);
    let var_a: f64 = da.iter().map(|x| x * x).sum();
    let var_b: f64 = db.iter().map(|x| x * x).sum();
    if var_a == 0.0 || var_b == 0.0 {
        return Ok(0.0);
    }
    let norm = (var_a * var_b).sqrt();
    let n = da.len() as isize;
    let max_lag = max_lag_bins.min(da.len()) as isize;
    let best = (-max_lag..=max_lag)
        .map(|lag| {
            let lo = 0.max(-lag);
            let hi = n.min(n - lag);
            (lo..hi).map(|i| da[i as usize] * db[(i + lag) as usize]).sum::<f64>() / norm
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(best.clamp(-1.0, 1.0))
}

/// Matches every flow to the thread whose network-related enter events
/// correlate best with the flow's packets, if that score reaches the
/// threshold. Ties go to the smallest thread id.
pub fn assign_flows_to_threads(
    trace: &PacketTrace,
    flows: &[Flow],
    threads: &[ThreadTrace],
    filter: &NetworkCallFilter,
    params: &CorrelationParams,
) -> Result<FlowAssignment, CorrelationError> {
    params.validate()?;
    if filter.prefixes.is_empty() {
        return Err(CorrelationError::EmptyFilter);
    }

    let mut threads: Vec<&ThreadTrace> = threads.iter().collect();
    threads.sort_by_key(|t| t.thread_id);
    let calls: Vec<(u64, Vec<i64>)> = threads
        .iter()
        .map(|t| (t.thread_id, filter.network_enters(t).into_iter().map(|(_, ts)| ts).collect::<Vec<_>>()))
        .filter(|(_, ts)| !ts.is_empty())
        .collect();

    // every packet and every method event, so the range does not collapse onto one burst
    let all_times = trace
        .packets
        .iter()
        .map(|p| p.timestamp_us)
        .chain(threads.iter().flat_map(|t| t.events.iter().map(|e| e.timestamp_us)));
    let (start, end) = all_times.fold((i64::MAX, i64::MIN), |(lo, hi), t| (lo.min(t), hi.max(t)));
    let (start, end) = if start > end { (0, 1) } else { (start, end + 1) };

    let thread_series = calls
        .iter()
        .map(|(tid, ts)| Ok((*tid, bin_events(ts, params.bin_width_us, start, end)?.0)))
        .collect::<Result<Vec<_>, CorrelationError>>()?;

    let mut verdicts = Vec::with_capacity(flows.len());
    for flow in flows {
        let times: Vec<i64> = flow.packets(trace).map(|p| p.timestamp_us).collect();
        let (series, _) = bin_events(&times, params.bin_width_us, start, end)?;
        let scores = thread_series
            .iter()
            .map(|(tid, s)| Ok((*tid, cross_correlation(&series, s, params.max_lag_bins)?)))
            .collect::<Result<Vec<_>, CorrelationError>>()?;

        let mut best: Option<(u64, f64)> = None;
        let mut second = f64::NEG_INFINITY;
        for &(tid, score) in &scores {
            match best {
                Some((_, b)) if score <= b => second = second.max(score),
                _ => {
                    if let Some((_, b)) = best {
                        second = second.max(b);
                    }
                    best = Some((tid, score));
                }
            }
        }
        let score = best.map_or(0.0, |(_, s)| s);
        verdicts.push(FlowVerdict {
            thread_id: best.filter(|&(_, s)| s >= params.threshold).map(|(tid, _)| tid),
            score,
            low_confidence: scores.len() >= 2 && score - second < LOW_CONFIDENCE_MARGIN,
            scores,
        });
    }
    Ok(FlowAssignment { flows: verdicts, packets: vec![None; trace.len()], warnings: Vec::new() })
}

/// Attributes each packet of an assigned flow to the network-related enter
/// event of its thread closest in time; ties go to the earlier event.
pub fn associate_packets_to_calls(
    assignment: &FlowAssignment,
    trace: &PacketTrace,
    flows: &[Flow],
    threads: &[ThreadTrace],
    filter: &NetworkCallFilter,
) -> FlowAssignment {
    let mut out = assignment.clone();
    out.packets = vec![None; trace.len()];
    for (fi, flow) in flows.iter().enumerate() {
        let Some(tid) = out.flows[fi].thread_id else { continue };
        let enters = threads.iter().find(|t| t.thread_id == tid).map(|t| filter.network_enters(t)).unwrap_or_default();
        if enters.is_empty() {
            out.warnings.push(format!("flow {fi}: thread {tid} has no network-related calls; unassigning"));
            out.flows[fi].thread_id = None;
            continue;
        }
        for &pi in &flow.packet_indices {
            let t = trace.packets[pi].timestamp_us;
            // first enter at or after t; enter timestamps are non-decreasing
            let after = enters.partition_point(|&(_, ts)| ts < t);
            let nearest = match (after.checked_sub(1).map(|i| enters[i]), enters.get(after).copied()) {
                (Some(before), Some(next)) => {
                    if next.1 - t < t - before.1 {
                        next
                    } else {
                        before
                    }
                }
                (Some(only), None) | (None, Some(only)) => only,
                (None, None) => unreachable!("enters is non-empty"),
            };
            out.packets[pi] = Some(PacketCall { thread_id: tid, event_index: nearest.0 });
        }
    }
    out
}
