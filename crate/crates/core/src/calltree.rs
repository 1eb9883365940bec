//! Per-thread call trees annotated with attributed traffic and energy bounds.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::correlator::FlowAssignment;
use crate::energy::{energy_bounds_within, EnergyBounds, EnergyError, EnergyModel, Horizon};
use crate::trace::{EventKind, PacketTrace, ThreadTrace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CallTreeError {
    #[error("thread {thread_id}: nesting violation at event {event_index}: {msg}")]
    Nesting { thread_id: u64, event_index: usize, msg: String },
    #[error("thread {thread_id}: packet {packet_index} references enter event {event_index} not in the tree")]
    UnknownEnterEvent { thread_id: u64, packet_index: usize, event_index: usize },
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallNode {
    pub method_id: String,
    pub invocation_count: u64,
    /// Thread event indices of the enter events merged into this node.
    pub enter_events: Vec<usize>,
    /// Packets attributed directly to this node's enter events.
    pub own_packets: Vec<usize>,
    /// Own packets plus all descendants' packets, ascending.
    pub agg_packets: Vec<usize>,
    pub agg_bytes: u64,
    pub bounds: EnergyBounds,
    pub children: Vec<CallNode>,
}

impl CallNode {
    fn new(method_id: String) -> Self {
        CallNode {
            method_id,
            invocation_count: 1,
            enter_events: Vec::new(),
            own_packets: Vec::new(),
            agg_packets: Vec::new(),
            agg_bytes: 0,
            bounds: EnergyBounds::default(),
            children: Vec::new(),
        }
    }

    /// Pre-order walk over this node and all descendants.
    pub fn walk(&self) -> Vec<&CallNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(n.children.iter().rev());
        }
        out
    }

    pub fn own_bytes(&self, trace: &PacketTrace) -> u64 {
        self.own_packets.iter().map(|&i| trace.packets[i].size_bytes).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreadCallTree {
    pub thread_id: u64,
    /// Synthetic `<thread:ID>` node parenting the top-level calls.
    pub root: CallNode,
}

pub fn root_label(thread_id: u64) -> String {
    format!("<thread:{thread_id}>")
}

/// Replays enter/exit events into a call tree. Consecutive invocations of
/// the same method under one parent share a node.
pub fn build_call_tree(thread: &ThreadTrace) -> Result<ThreadCallTree, CallTreeError> {
    struct Slot {
        node: CallNode,
        children: Vec<usize>,
    }
    let tid = thread.thread_id;
    let mut arena = vec![Slot { node: CallNode::new(root_label(tid)), children: Vec::new() }];
    let mut stack = vec![0usize];

    for (i, event) in thread.events.iter().enumerate() {
        let top = *stack.last().expect("root stays on the stack");
        match event.kind {
            EventKind::Enter => {
                let merge = arena[top].children.last().copied().filter(|&c| arena[c].node.method_id == event.method_id);
                let slot = match merge {
                    Some(c) => {
                        arena[c].node.invocation_count += 1;
                        c
                    }
                    None => {
                        arena.push(Slot { node: CallNode::new(event.method_id.clone()), children: Vec::new() });
                        let c = arena.len() - 1;
                        arena[top].children.push(c);
                        c
                    }
                };
                arena[slot].node.enter_events.push(i);
                stack.push(slot);
            }
            EventKind::Exit => {
                if stack.len() == 1 || arena[top].node.method_id != event.method_id {
                    return Err(CallTreeError::Nesting {
                        thread_id: tid,
                        event_index: i,
                        msg: format!("exit of {} does not match the open call", event.method_id),
                    });
                }
                stack.pop();
            }
        }
    }
    if stack.len() > 1 {
        return Err(CallTreeError::Nesting {
            thread_id: tid,
            event_index: thread.events.len(),
            msg: format!("{} calls still open", stack.len() - 1),
        });
    }

    // children always come after their parent in the arena; fold back to front
    let mut built: Vec<Option<CallNode>> = vec![None; arena.len()];
    for idx in (0..arena.len()).rev() {
        let mut node = std::mem::replace(&mut arena[idx].node, CallNode::new(String::new()));
        node.children = arena[idx].children.iter().map(|&c| built[c].take().expect("child built")).collect();
        built[idx] = Some(node);
    }
    Ok(ThreadCallTree { thread_id: tid, root: built[0].take().expect("root built") })
}

/// Folds chains of library frames into the outermost library frame: a node
/// whose method matches one of `prefixes` absorbs every matching descendant
/// reachable through matching frames only. Non-library callees of absorbed
/// frames are re-parented to the collapsed node.
pub fn collapse_library_frames(tree: &mut ThreadCallTree, prefixes: &[String]) {
    fn is_lib(node: &CallNode, prefixes: &[String]) -> bool {
        prefixes.iter().any(|p| node.method_id.starts_with(p.as_str()))
    }
    fn collapse(node: &mut CallNode, prefixes: &[String], in_root: bool) {
        if !in_root && is_lib(node, prefixes) {
            let mut queue: VecDeque<CallNode> = std::mem::take(&mut node.children).into();
            while let Some(mut child) = queue.pop_front() {
                if is_lib(&child, prefixes) {
                    node.enter_events.append(&mut child.enter_events);
                    node.own_packets.append(&mut child.own_packets);
                    for grandchild in child.children.into_iter().rev() {
                        queue.push_front(grandchild);
                    }
                } else {
                    node.children.push(child);
                }
            }
            node.enter_events.sort_unstable();
            node.own_packets.sort_unstable();
        }
        for child in &mut node.children {
            collapse(child, prefixes, false);
        }
    }
    if !prefixes.is_empty() {
        collapse(&mut tree.root, prefixes, true);
    }
}

/// Attaches each packet attributed to this tree's thread to the node holding
/// its enter event, then aggregates packets and bytes bottom-up and computes
/// per-node savings bounds against all packets attributed to the thread.
pub fn aggregate_traffic(
    mut tree: ThreadCallTree,
    trace: &PacketTrace,
    assignment: &FlowAssignment,
    model: &EnergyModel,
    horizon: Horizon,
) -> Result<ThreadCallTree, CallTreeError> {
    let tid = tree.thread_id;
    let mut by_event: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (pi, call) in assignment.packets.iter().enumerate() {
        if let Some(call) = call.filter(|c| c.thread_id == tid) {
            by_event.entry(call.event_index).or_default().push(pi);
        }
    }
    let thread_packets: Vec<usize> =
        by_event.values().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();

    fn attach(node: &mut CallNode, by_event: &mut BTreeMap<usize, Vec<usize>>, trace: &PacketTrace) {
        node.own_packets = node.enter_events.iter().filter_map(|e| by_event.remove(e)).flatten().collect();
        node.own_packets.sort_unstable();
        let mut agg: BTreeSet<usize> = node.own_packets.iter().copied().collect();
        for child in &mut node.children {
            attach(child, by_event, trace);
            agg.extend(child.agg_packets.iter().copied());
        }
        node.agg_packets = agg.into_iter().collect();
        node.agg_bytes = node.agg_packets.iter().map(|&i| trace.packets[i].size_bytes).sum();
    }
    attach(&mut tree.root, &mut by_event, trace);
    if let Some((&event_index, packets)) = by_event.iter().next() {
        return Err(CallTreeError::UnknownEnterEvent { thread_id: tid, packet_index: packets[0], event_index });
    }

    fn bound(
        node: &mut CallNode,
        trace: &PacketTrace,
        full: &[usize],
        model: &EnergyModel,
        horizon: Horizon,
    ) -> Result<(), EnergyError> {
        node.bounds = energy_bounds_within(trace, full, &node.agg_packets, model, horizon)?;
        node.children.iter_mut().try_for_each(|c| bound(c, trace, full, model, horizon))
    }
    bound(&mut tree.root, trace, &thread_packets, model, horizon)?;
    Ok(tree)
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn dot_label(node: &CallNode) -> String {
    format!(
        "{}\\ncalls={}\\nbytes={}\\nE=[{:.6},{:.6}] J",
        dot_escape(&node.method_id),
        node.invocation_count,
        node.agg_bytes,
        node.bounds.e_min_j,
        node.bounds.e_max_j
    )
}

/// Writes node and edge statements for one tree; the root is always kept,
/// subtrees below `min_bytes` are pruned.
fn write_dot_body(out: &mut String, tree: &CallNode, prefix: &str, min_bytes: u64, indent: &str) {
    let mut next_id = 0usize;
    let mut edges = Vec::new();
    let mut stack: Vec<(&CallNode, Option<usize>)> = vec![(tree, None)];
    while let Some((node, parent)) = stack.pop() {
        let id = next_id;
        next_id += 1;
        let _ = writeln!(out, "{indent}{prefix}n{id} [label=\"{}\"];", dot_label(node));
        if let Some(p) = parent {
            edges.push((p, id));
        }
        for child in node.children.iter().rev().filter(|c| c.agg_bytes >= min_bytes) {
            stack.push((child, Some(id)));
        }
    }
    for (p, c) in edges {
        let _ = writeln!(out, "{indent}{prefix}n{p} -> {prefix}n{c};");
    }
}

/// DOT graph of one aggregated tree.
pub fn emit_dot(tree: &ThreadCallTree, min_bytes_filter: u64) -> String {
    let mut out = format!("digraph \"thread_{}\" {{\n  node [shape=box];\n", tree.thread_id);
    write_dot_body(&mut out, &tree.root, "", min_bytes_filter, "  ");
    out.push_str("}\n");
    out
}

/// DOT graph of all threads, one cluster per thread.
pub fn emit_dot_all(trees: &[ThreadCallTree], min_bytes_filter: u64) -> String {
    let mut out = String::from("digraph calltree {\n  node [shape=box];\n");
    for tree in trees {
        let _ = writeln!(out, "  subgraph cluster_t{} {{", tree.thread_id);
        let _ = writeln!(out, "    label=\"thread {}\";", tree.thread_id);
        write_dot_body(&mut out, &tree.root, &format!("t{}_", tree.thread_id), min_bytes_filter, "    ");
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}

pub const REPORT_HEADER: &str = "method_id,calls,packets,bytes,e_min_j,e_max_j";

/// One row of the per-method summary.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method_id: String,
    pub calls: u64,
    pub packets: usize,
    pub bytes: u64,
    pub bounds: EnergyBounds,
}

/// Per-method totals across all threads, sorted by descending `e_max`
/// (then by method id).
///
/// A method occurring in several nodes is summarized over the union of their
/// packets; its bounds take as the full trace every packet attributed to the
/// threads it runs on.
pub fn summarize_methods(
    trees: &[ThreadCallTree],
    trace: &PacketTrace,
    model: &EnergyModel,
    horizon: Horizon,
) -> Result<Vec<MethodSummary>, EnergyError> {
    #[derive(Default)]
    struct Acc {
        calls: u64,
        packets: BTreeSet<usize>,
        threads: BTreeSet<usize>,
    }
    let mut per_method: BTreeMap<&str, Acc> = BTreeMap::new();
    for (ti, tree) in trees.iter().enumerate() {
        for node in tree.root.walk().into_iter().skip(1) {
            let acc = per_method.entry(node.method_id.as_str()).or_default();
            acc.calls += node.invocation_count;
            acc.packets.extend(node.agg_packets.iter().copied());
            acc.threads.insert(ti);
        }
    }
    let mut rows = Vec::with_capacity(per_method.len());
    for (method_id, acc) in per_method {
        let full: BTreeSet<usize> =
            acc.threads.iter().flat_map(|&ti| trees[ti].root.agg_packets.iter().copied()).collect();
        let full: Vec<usize> = full.into_iter().collect();
        let method: Vec<usize> = acc.packets.iter().copied().collect();
        rows.push(MethodSummary {
            method_id: method_id.to_string(),
            calls: acc.calls,
            packets: method.len(),
            bytes: method.iter().map(|&i| trace.packets[i].size_bytes).sum(),
            bounds: energy_bounds_within(trace, &full, &method, model, horizon)?,
        });
    }
    rows.sort_by(|a, b| b.bounds.e_max_j.total_cmp(&a.bounds.e_max_j).then_with(|| a.method_id.cmp(&b.method_id)));
    Ok(rows)
}

/// Comma-separated per-method report with a header line.
pub fn emit_report(
    trees: &[ThreadCallTree],
    trace: &PacketTrace,
    model: &EnergyModel,
    horizon: Horizon,
) -> Result<String, EnergyError> {
    let mut out = format!("{REPORT_HEADER}\n");
    for row in summarize_methods(trees, trace, model, horizon)? {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.6}",
            row.method_id, row.calls, row.packets, row.bytes, row.bounds.e_min_j, row.bounds.e_max_j
        );
    }
    Ok(out)
}

/// Index from enter-event index to the pre-order position of its node.
pub fn enter_event_index(tree: &ThreadCallTree) -> HashMap<usize, usize> {
    tree.root
        .walk()
        .into_iter()
        .enumerate()
        .flat_map(|(pos, n)| n.enter_events.iter().map(move |&e| (e, pos)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlator::{FlowVerdict, PacketCall};
    use crate::energy::RrcModelParams;
    use crate::trace::{parse_method_trace, Direction, PacketRecord, Transport};

    fn thread(lines: &str) -> ThreadTrace {
        parse_method_trace(lines).unwrap().threads.remove(0)
    }

    fn names(node: &CallNode) -> Vec<(&str, u64)> {
        node.children.iter().map(|c| (c.method_id.as_str(), c.invocation_count)).collect()
    }

    #[test]
    fn nested_calls() {
        let t = thread("0,enter,1,A\n1,enter,1,B\n2,exit,1,B\n3,exit,1,A\n");
        let tree = build_call_tree(&t).unwrap();
        assert_eq!(tree.root.method_id, "<thread:1>");
        assert_eq!(names(&tree.root), vec![("A", 1)]);
        assert_eq!(names(&tree.root.children[0]), vec![("B", 1)]);
    }

    #[test]
    fn repeated_callee_merges() {
        let t = thread("0,enter,1,A\n1,enter,1,B\n2,exit,1,B\n3,enter,1,B\n4,exit,1,B\n5,exit,1,A\n");
        let tree = build_call_tree(&t).unwrap();
        let a = &tree.root.children[0];
        assert_eq!(names(a), vec![("B", 2)]);
        assert_eq!(a.children[0].enter_events, vec![1, 3]);
    }

    #[test]
    fn top_level_calls_keep_order() {
        let t = thread("0,enter,1,A\n1,exit,1,A\n2,enter,1,C\n3,exit,1,C\n");
        let tree = build_call_tree(&t).unwrap();
        assert_eq!(names(&tree.root), vec![("A", 1), ("C", 1)]);
    }

    #[test]
    fn only_consecutive_siblings_merge() {
        let t = thread("0,enter,1,A\n1,exit,1,A\n2,enter,1,C\n3,exit,1,C\n4,enter,1,A\n5,exit,1,A\n");
        let tree = build_call_tree(&t).unwrap();
        assert_eq!(names(&tree.root), vec![("A", 1), ("C", 1), ("A", 1)]);
    }

    #[test]
    fn merged_invocations_merge_their_callees() {
        let t = thread(
            "0,enter,1,A\n1,enter,1,B\n2,exit,1,B\n3,exit,1,A\n4,enter,1,A\n5,enter,1,B\n6,exit,1,B\n7,exit,1,A\n",
        );
        let tree = build_call_tree(&t).unwrap();
        assert_eq!(names(&tree.root), vec![("A", 2)]);
        assert_eq!(names(&tree.root.children[0]), vec![("B", 2)]);
    }

    #[test]
    fn nesting_violation_is_reported() {
        let t = ThreadTrace {
            thread_id: 1,
            events: vec![crate::trace::MethodEvent {
                kind: EventKind::Exit,
                timestamp_us: 0,
                thread_id: 1,
                method_id: "A".into(),
            }],
        };
        assert!(matches!(build_call_tree(&t), Err(CallTreeError::Nesting { event_index: 0, .. })));
    }

    fn packets(sizes: &[(i64, u64)]) -> PacketTrace {
        PacketTrace {
            packets: sizes
                .iter()
                .map(|&(t, size)| PacketRecord {
                    timestamp_us: t,
                    direction: Direction::Inbound,
                    size_bytes: size,
                    transport: Transport::Tcp,
                    src_addr: "10.0.0.2".parse().unwrap(),
                    src_port: 80,
                    dst_addr: "10.0.0.1".parse().unwrap(),
                    dst_port: 1000,
                })
                .collect(),
            ..Default::default()
        }
    }

    fn assignment(calls: &[Option<(u64, usize)>]) -> FlowAssignment {
        FlowAssignment {
            flows: vec![FlowVerdict { thread_id: Some(1), score: 1.0, scores: vec![], low_confidence: false }],
            packets: calls
                .iter()
                .map(|c| c.map(|(thread_id, event_index)| PacketCall { thread_id, event_index }))
                .collect(),
            warnings: vec![],
        }
    }

    fn model() -> EnergyModel {
        EnergyModel::Rrc3g(RrcModelParams::default())
    }

    const S: i64 = 1_000_000;

    #[test]
    fn leaf_traffic_rolls_up() {
        let t = thread("0,enter,1,A\n1,enter,1,java.net.Socket.read\n2,exit,1,java.net.Socket.read\n3,exit,1,A\n");
        let trace = packets(&[(0, 100), (1, 100), (2, 100)]);
        let a = assignment(&[Some((1, 1)), Some((1, 1)), Some((1, 1))]);
        let h = model().default_horizon(&trace);
        let tree = aggregate_traffic(build_call_tree(&t).unwrap(), &trace, &a, &model(), h).unwrap();
        let a_node = &tree.root.children[0];
        let leaf = &a_node.children[0];
        assert_eq!(leaf.own_packets, vec![0, 1, 2]);
        assert_eq!(leaf.agg_bytes, 300);
        assert_eq!(a_node.own_packets, Vec::<usize>::new());
        assert_eq!(a_node.agg_bytes, 300);
        assert_eq!(tree.root.agg_bytes, 300);
    }

    #[test]
    fn sibling_traffic_sums_at_root() {
        let t = thread("0,enter,1,B\n1,exit,1,B\n2,enter,1,C\n3,exit,1,C\n");
        let trace = packets(&[(0, 100), (0, 200), (2, 200)]);
        let a = assignment(&[Some((1, 0)), Some((1, 0)), Some((1, 2))]);
        let h = model().default_horizon(&trace);
        let tree = aggregate_traffic(build_call_tree(&t).unwrap(), &trace, &a, &model(), h).unwrap();
        assert_eq!(tree.root.children[0].agg_bytes, 300);
        assert_eq!(tree.root.children[1].agg_bytes, 200);
        assert_eq!(tree.root.agg_bytes, 500);
        assert!(tree.root.own_packets.is_empty());
    }

    #[test]
    fn root_bounds_cover_the_whole_thread() {
        let t = thread("0,enter,1,A\n1,exit,1,A\n2,enter,1,B\n3,exit,1,B\n");
        let trace = packets(&[(0, 100), (S, 100)]);
        let a = assignment(&[Some((1, 0)), Some((1, 2))]);
        let h = Horizon::new(0, 18 * S).unwrap();
        let tree = aggregate_traffic(build_call_tree(&t).unwrap(), &trace, &a, &model(), h).unwrap();
        let root = tree.root.bounds;
        assert_eq!(root.e_min_j, root.e_max_j);
        assert!((root.e_max_j - 10.32).abs() < 1e-9);
        let first = tree.root.children[0].bounds;
        assert!((first.e_min_j - 0.80).abs() < 1e-9 && (first.e_max_j - 9.52).abs() < 1e-9, "{first:?}");
    }

    #[test]
    fn other_threads_packets_are_ignored_and_unknown_events_rejected() {
        let t = thread("0,enter,1,A\n1,exit,1,A\n");
        let trace = packets(&[(0, 100), (0, 50)]);
        let a = assignment(&[Some((1, 0)), Some((2, 0))]);
        let h = model().default_horizon(&trace);
        let tree = aggregate_traffic(build_call_tree(&t).unwrap(), &trace, &a, &model(), h).unwrap();
        assert_eq!(tree.root.agg_bytes, 100);

        let a = assignment(&[Some((1, 1)), None]);
        let err = aggregate_traffic(build_call_tree(&t).unwrap(), &trace, &a, &model(), h).unwrap_err();
        assert_eq!(err, CallTreeError::UnknownEnterEvent { thread_id: 1, packet_index: 0, event_index: 1 });
    }

    #[test]
    fn dot_prunes_quiet_subtrees() {
        let t = thread("0,enter,1,A\n1,enter,1,B\n2,exit,1,B\n3,exit,1,A\n");
        let tree = build_call_tree(&t).unwrap();
        let dot = emit_dot(&tree, 1);
        assert_eq!(dot.matches("[label=").count(), 1);
        assert!(!dot.contains("->"));
        assert!(dot.contains("<thread:1>\\ncalls=1\\nbytes=0\\nE=[0.000000,0.000000] J"));
    }

    #[test]
    fn dot_carries_traffic_labels() {
        let t = thread("0,enter,1,A\n1,enter,1,B\n2,exit,1,B\n3,exit,1,A\n");
        let trace = packets(&[(0, 100), (1, 100), (2, 100)]);
        let a = assignment(&[Some((1, 1)), Some((1, 1)), Some((1, 1))]);
        let h = model().default_horizon(&trace);
        let tree = aggregate_traffic(build_call_tree(&t).unwrap(), &trace, &a, &model(), h).unwrap();
        let dot = emit_dot(&tree, 1);
        assert_eq!(dot.matches("[label=").count(), 3);
        assert_eq!(dot.matches("->").count(), 2);
        assert_eq!(dot.matches("bytes=300").count(), 3);
        assert!(dot.contains("n0 -> n1;") && dot.contains("n1 -> n2;"));
        let dot = emit_dot(&tree, 1_000_000_000);
        assert_eq!(dot.matches("[label=").count(), 1);
    }

    #[test]
    fn dot_escapes_quotes() {
        let t = thread("0,enter,1,A.f(\"x\")\n1,exit,1,A.f(\"x\")\n");
        let dot = emit_dot(&build_call_tree(&t).unwrap(), 0);
        assert!(dot.contains("A.f(\\\"x\\\")"));
    }

    #[test]
    fn empty_report_has_header_only() {
        let out = emit_report(&[], &PacketTrace::default(), &model(), Horizon::new(0, 0).unwrap()).unwrap();
        assert_eq!(out, format!("{REPORT_HEADER}\n"));
    }

    #[test]
    fn report_sorted_by_upper_bound() {
        let t = thread("0,enter,1,A\n1,exit,1,A\n2,enter,1,B\n3,exit,1,B\n");
        let trace = packets(&[(0, 100), (S, 100)]);
        let a = assignment(&[Some((1, 0)), Some((1, 2))]);
        let h = Horizon::new(0, 18 * S).unwrap();
        let tree = aggregate_traffic(build_call_tree(&t).unwrap(), &trace, &a, &model(), h).unwrap();
        let out = emit_report(&[tree], &trace, &model(), h).unwrap();
        let rows: Vec<&str> = out.lines().skip(1).collect();
        // symmetric: each alone costs 9.52 J, so ties fall back to the name
        assert_eq!(rows, vec!["A,1,1,100,0.800000,9.520000", "B,1,1,100,0.800000,9.520000"]);
    }

    #[test]
    fn collapse_folds_library_chains() {
        let t = thread(
            "0,enter,1,App.run\n1,enter,1,lib.Client.get\n2,enter,1,lib.Conn.open\n3,enter,1,App.callback\n4,exit,1,App.callback\n5,exit,1,lib.Conn.open\n6,exit,1,lib.Client.get\n7,exit,1,App.run\n",
        );
        let mut tree = build_call_tree(&t).unwrap();
        collapse_library_frames(&mut tree, &["lib.".to_string()]);
        let run = &tree.root.children[0];
        let client = &run.children[0];
        assert_eq!(client.method_id, "lib.Client.get");
        assert_eq!(client.enter_events, vec![1, 2]);
        assert_eq!(names(client), vec![("App.callback", 1)]);
        assert_eq!(enter_event_index(&tree).len(), 4);
    }
}
