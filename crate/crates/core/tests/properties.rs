use std::collections::BTreeSet;

use offkit_core::calltree::{aggregate_traffic, build_call_tree};
use offkit_core::correlator::{
    assign_flows_to_threads, associate_packets_to_calls, cross_correlation, BinnedSeries, CorrelationParams,
    NetworkCallFilter,
};
use offkit_core::energy::{energy_bounds, EnergyModel, Horizon, RrcModelParams, WifiModelParams};
use offkit_core::trace::{
    parse_method_trace, parse_packet_trace, segment_flows, Direction, PacketRecord, PacketTrace, Transport,
};
use proptest::prelude::*;

fn arb_packet(ts: i64) -> impl Strategy<Value = PacketRecord> {
    (any::<bool>(), 1u64..2000, any::<bool>(), 0u8..4, 0u8..4, prop::sample::select(vec![80u16, 443, 5353])).prop_map(
        move |(out, size, tcp, a, b, port)| PacketRecord {
            timestamp_us: ts,
            direction: if out { Direction::Outbound } else { Direction::Inbound },
            size_bytes: size,
            transport: if tcp { Transport::Tcp } else { Transport::Udp },
            src_addr: format!("10.0.0.{a}").parse().unwrap(),
            src_port: 40000 + a as u16,
            dst_addr: format!("192.168.1.{b}").parse().unwrap(),
            dst_port: port,
        },
    )
}

/// Sorted timestamps with gaps up to `max_gap`.
fn arb_times(max_len: usize, max_gap: i64) -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(0..max_gap, 0..max_len).prop_map(|gaps| {
        gaps.into_iter()
            .scan(0i64, |t, g| {
                *t += g;
                Some(*t)
            })
            .collect()
    })
}

fn arb_trace(max_len: usize, max_gap: i64) -> impl Strategy<Value = PacketTrace> {
    arb_times(max_len, max_gap)
        .prop_flat_map(|times| times.into_iter().map(arb_packet).collect::<Vec<_>>())
        .prop_map(|packets| PacketTrace { packets, epoch_label: String::new() })
}

fn arb_model() -> impl Strategy<Value = EnergyModel> {
    prop_oneof![
        (0.0f64..200.0, 0.0f64..400.0, 0.0f64..600.0, 1i64..6_000_000, 1i64..13_000_000, 0.0f64..0.01, 0.0f64..0.01)
            .prop_map(|(idle, fach_inc, dch_inc, t_dch, t_fach, tx, rx)| {
                EnergyModel::Rrc3g(RrcModelParams {
                    p_idle_mw: idle,
                    p_fach_mw: idle + fach_inc,
                    p_dch_mw: idle + fach_inc + dch_inc,
                    t_dch_us: t_dch,
                    t_fach_us: t_fach,
                    per_byte_tx_uj: tx,
                    per_byte_rx_uj: rx,
                })
            }),
        (0.0f64..100.0, 0.0f64..900.0, 0i64..500_000, 0.0f64..5.0, 0.0f64..0.01).prop_map(
            |(idle, inc, tail, per_packet, per_byte)| {
                EnergyModel::Wifi(WifiModelParams {
                    p_active_mw: idle + inc,
                    tail_us: tail,
                    p_idle_mw: idle,
                    per_packet_uj: per_packet,
                    per_byte_uj: per_byte,
                })
            }
        ),
    ]
}

fn subset(trace: &PacketTrace, mask: &[bool]) -> PacketTrace {
    PacketTrace {
        packets: trace.packets.iter().zip(mask.iter().cycle()).filter(|(_, &m)| m).map(|(p, _)| p.clone()).collect(),
        epoch_label: String::new(),
    }
}

fn ulp_slack(x: f64) -> f64 {
    x.abs() * 1e-12 + 1e-15
}

proptest! {
    #[test]
    fn packet_trace_round_trips(trace in arb_trace(40, 3_000_000)) {
        let text = trace.to_lines();
        prop_assert_eq!(parse_packet_trace(&text).unwrap(), trace);
    }

    #[test]
    fn flows_partition_the_trace(trace in arb_trace(60, 40_000_000), gap in 1i64..80_000_000) {
        let flows = segment_flows(&trace, gap).unwrap();
        let mut seen: Vec<usize> = flows.iter().flat_map(|f| f.packet_indices.iter().copied()).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..trace.len()).collect::<Vec<_>>());
        for f in &flows {
            prop_assert!(f.packets(&trace).all(|p| p.flow_key() == f.key));
            prop_assert!(f.key.lower <= f.key.higher);
        }
    }

    #[test]
    fn flow_count_ignores_direction(trace in arb_trace(60, 40_000_000), flips in prop::collection::vec(any::<bool>(), 1..8)) {
        let mut swapped = trace.clone();
        for (p, &flip) in swapped.packets.iter_mut().zip(flips.iter().cycle()) {
            if flip {
                std::mem::swap(&mut p.src_addr, &mut p.dst_addr);
                std::mem::swap(&mut p.src_port, &mut p.dst_port);
            }
        }
        let a = segment_flows(&trace, 60_000_000).unwrap();
        let b = segment_flows(&swapped, 60_000_000).unwrap();
        prop_assert_eq!(a.len(), b.len());
    }

    #[test]
    fn energy_is_monotone_and_subadditive(
        trace in arb_trace(30, 8_000_000),
        mask_a in prop::collection::vec(any::<bool>(), 1..9),
        mask_b in prop::collection::vec(any::<bool>(), 1..9),
        model in arb_model(),
    ) {
        let h = model.default_horizon(&trace);
        let a = subset(&trace, &mask_a);
        let e_full = model.estimate(&trace.packets, h).unwrap();
        let e_a = model.estimate(&a.packets, h).unwrap();
        prop_assert!(e_a <= e_full, "{} > {}", e_a, e_full);

        // A and B drawn independently; their union is a sub-trace of the full trace
        let b = subset(&trace, &mask_b);
        let union_mask: Vec<bool> = (0..trace.len())
            .map(|i| mask_a[i % mask_a.len()] || mask_b[i % mask_b.len()])
            .collect();
        let ab = subset(&trace, &union_mask);
        let e_b = model.estimate(&b.packets, h).unwrap();
        let e_ab = model.estimate(&ab.packets, h).unwrap();
        prop_assert!(e_ab <= e_a + e_b + ulp_slack(e_a + e_b), "{} > {} + {}", e_ab, e_a, e_b);
    }

    #[test]
    fn bounds_are_ordered(trace in arb_trace(30, 8_000_000), mask in prop::collection::vec(any::<bool>(), 1..9), model in arb_model()) {
        let h = model.default_horizon(&trace);
        let method: Vec<usize> = (0..trace.len()).filter(|i| mask[i % mask.len()]).collect();
        let b = energy_bounds(&trace, &method, &model, h).unwrap();
        prop_assert!(0.0 <= b.e_min_j && b.e_min_j <= b.e_max_j, "{:?}", b);
    }

    #[test]
    fn energy_is_shift_invariant(trace in arb_trace(30, 8_000_000), shift in -1_000_000_000i64..1_000_000_000, model in arb_model()) {
        let h = model.default_horizon(&trace);
        let mut shifted = trace.clone();
        shifted.packets.iter_mut().for_each(|p| p.timestamp_us += shift);
        let hs = Horizon::new(h.start_us + shift, h.end_us + shift).unwrap();
        let a = model.estimate(&trace.packets, h).unwrap();
        let b = model.estimate(&shifted.packets, hs).unwrap();
        prop_assert!((a - b).abs() <= ulp_slack(a));
    }

    #[test]
    fn correlation_is_symmetric_at_lag_zero(a in prop::collection::vec(0u32..5, 1..30), seed in prop::collection::vec(0u32..5, 30)) {
        let b: Vec<u32> = seed[..a.len()].to_vec();
        let sa = BinnedSeries { bin_width_us: 10, start_us: 0, counts: a };
        let sb = BinnedSeries { bin_width_us: 10, start_us: 0, counts: b };
        let ab = cross_correlation(&sa, &sb, 0).unwrap();
        prop_assert_eq!(ab, cross_correlation(&sb, &sa, 0).unwrap());
        prop_assert!((-1.0..=1.0).contains(&ab));
    }
}

/// Fixture: thread 1 issues HTTP calls with packets right after each call,
/// thread 2 does unrelated work.
fn two_thread_fixture(shift: i64) -> (PacketTrace, offkit_core::MethodTrace) {
    let mut packets = String::new();
    let mut methods = String::new();
    let s = |t: i64| t + shift;
    for (k, call) in [1_000_000i64, 3_000_000, 5_000_000].into_iter().enumerate() {
        methods += &format!("{},enter,1,App.refresh()\n", s(call - 10));
        methods += &format!("{},enter,1,java.net.HttpURLConnection.connect()\n", s(call));
        for j in 0..3 {
            let dir = if j == 0 { "out" } else { "in" };
            let (src, dst) = if j == 0 { ("10.0.0.1,4000", "1.2.3.4,80") } else { ("1.2.3.4,80", "10.0.0.1,4000") };
            packets += &format!("{},{dir},{},tcp,{src},{dst}\n", s(call + 5_000 + j * 10_000), 100 + 100 * k as i64);
        }
        methods += &format!("{},exit,1,java.net.HttpURLConnection.connect()\n", s(call + 40_000));
        methods += &format!("{},exit,1,App.refresh()\n", s(call + 50_000));
    }
    methods += &format!("{},enter,2,App.render()\n{},exit,2,App.render()\n", s(7_000_000), s(7_100_000));
    let packets = parse_packet_trace(&packets).unwrap();
    let mut lines: Vec<&str> = methods.lines().collect();
    lines.sort_by_key(|l| l.split(',').next().unwrap().parse::<i64>().unwrap());
    (packets, parse_method_trace(&lines.join("\n")).unwrap())
}

#[test]
fn assignment_is_shift_invariant() {
    let filter = NetworkCallFilter::default();
    let params = CorrelationParams::default();
    let run = |shift| {
        let (trace, methods) = two_thread_fixture(shift);
        let flows = segment_flows(&trace, 60_000_000).unwrap();
        let a = assign_flows_to_threads(&trace, &flows, &methods.threads, &filter, &params).unwrap();
        a.flows.iter().map(|f| f.thread_id).collect::<Vec<_>>()
    };
    let base = run(0);
    assert_eq!(base, vec![Some(1)]);
    for shift in [1, 37_123, 10_000_000_000, 99_999] {
        assert_eq!(run(shift), base, "shift {shift}");
    }
}

#[test]
fn pipeline_conserves_bytes() {
    let (trace, methods) = two_thread_fixture(0);
    let filter = NetworkCallFilter::default();
    let flows = segment_flows(&trace, 60_000_000).unwrap();
    let a = assign_flows_to_threads(&trace, &flows, &methods.threads, &filter, &CorrelationParams::default()).unwrap();
    let a = associate_packets_to_calls(&a, &trace, &flows, &methods.threads, &filter);
    let model = EnergyModel::Rrc3g(RrcModelParams::default());
    let h = model.default_horizon(&trace);
    for thread in &methods.threads {
        let tree = aggregate_traffic(build_call_tree(thread).unwrap(), &trace, &a, &model, h).unwrap();
        let expected: u64 = a.packets_of_thread(thread.thread_id).iter().map(|&i| trace.packets[i].size_bytes).sum();
        assert_eq!(tree.root.agg_bytes, expected);
        for node in tree.root.walk() {
            let children: u64 = node.children.iter().map(|c| c.agg_bytes).sum();
            assert_eq!(node.agg_bytes, node.own_bytes(&trace) + children);
            for c in &node.children {
                let parent: BTreeSet<_> = node.agg_packets.iter().collect();
                assert!(c.agg_packets.iter().all(|p| parent.contains(p)));
                assert!(c.bounds.e_max_j <= node.bounds.e_max_j);
            }
        }
    }
    // 3 calls x (100 + 200 + 300) bytes
    let tree = aggregate_traffic(build_call_tree(&methods.threads[0]).unwrap(), &trace, &a, &model, h).unwrap();
    assert_eq!(tree.root.agg_bytes, 1800);
    assert_eq!(tree.root.children[0].invocation_count, 3);
}
