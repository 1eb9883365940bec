//! Packet and method trace model, line-format parsers and flow segmentation.

use std::collections::BTreeMap;
use std::fmt;
use std::net::IpAddr;
use std::str::FromStr;

use thiserror::Error;

/// Default idle gap that splits one 5-tuple into separate flows (60 s).
pub const DEFAULT_IDLE_GAP_US: i64 = 60_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("non-monotonic timestamp at line {line}")]
    NonMonotonic { line: usize },
    #[error("line {line}: exit without enter for {method_id} on thread {thread_id}")]
    ExitWithoutEnter { line: usize, thread_id: u64, method_id: String },
    #[error("idle gap must be positive, got {0}")]
    InvalidIdleGap(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Inbound,
    Outbound,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Inbound => "in",
            Direction::Outbound => "out",
        }
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "in" => Ok(Direction::Inbound),
            "out" => Ok(Direction::Outbound),
            other => Err(format!("direction must be `in` or `out`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Transport {
    Tcp,
    Udp,
}

impl Transport {
    pub fn as_str(self) -> &'static str {
        match self {
            Transport::Tcp => "tcp",
            Transport::Udp => "udp",
        }
    }
}

impl FromStr for Transport {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tcp" => Ok(Transport::Tcp),
            "udp" => Ok(Transport::Udp),
            other => Err(format!("transport must be `tcp` or `udp`, got `{other}`")),
        }
    }
}

/// One captured IP packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketRecord {
    pub timestamp_us: i64,
    pub direction: Direction,
    pub size_bytes: u64,
    pub transport: Transport,
    pub src_addr: IpAddr,
    pub src_port: u16,
    pub dst_addr: IpAddr,
    pub dst_port: u16,
}

impl PacketRecord {
    pub fn flow_key(&self) -> FlowKey {
        FlowKey::new(
            self.transport,
            Endpoint { addr: self.src_addr, port: self.src_port },
            Endpoint { addr: self.dst_addr, port: self.dst_port },
        )
    }
}

impl fmt::Display for PacketRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{},{},{}",
            self.timestamp_us,
            self.direction.as_str(),
            self.size_bytes,
            self.transport.as_str(),
            self.src_addr,
            self.src_port,
            self.dst_addr,
            self.dst_port
        )
    }
}

/// Full packet trace, ordered by time.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PacketTrace {
    pub packets: Vec<PacketRecord>,
    pub epoch_label: String,
}

impl PacketTrace {
    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    /// Serializes back to the line format accepted by [`parse_packet_trace`].
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        if !self.epoch_label.is_empty() {
            out.push_str(EPOCH_PREFIX);
            out.push_str(&self.epoch_label);
            out.push('\n');
        }
        for p in &self.packets {
            out.push_str(&p.to_string());
            out.push('\n');
        }
        out
    }
}

const EPOCH_PREFIX: &str = "# epoch: ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Endpoint {
    pub addr: IpAddr,
    pub port: u16,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.addr {
            IpAddr::V4(a) => write!(f, "{a}:{}", self.port),
            IpAddr::V6(a) => write!(f, "[{a}]:{}", self.port),
        }
    }
}

/// Direction-independent flow identity: the endpoint pair is stored sorted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowKey {
    pub transport: Transport,
    pub lower: Endpoint,
    pub higher: Endpoint,
}

impl FlowKey {
    pub fn new(transport: Transport, a: Endpoint, b: Endpoint) -> Self {
        let (lower, higher) = if a <= b { (a, b) } else { (b, a) };
        FlowKey { transport, lower, higher }
    }
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} <-> {}", self.transport.as_str(), self.lower, self.higher)
    }
}

/// Packets of one connection, as indices into the parent [`PacketTrace`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flow {
    pub key: FlowKey,
    pub packet_indices: Vec<usize>,
}

impl Flow {
    pub fn packets<'a>(&'a self, trace: &'a PacketTrace) -> impl Iterator<Item = &'a PacketRecord> + 'a {
        self.packet_indices.iter().map(move |&i| &trace.packets[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Enter,
    Exit,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Enter => "enter",
            EventKind::Exit => "exit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodEvent {
    pub kind: EventKind,
    pub timestamp_us: i64,
    pub thread_id: u64,
    pub method_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreadTrace {
    pub thread_id: u64,
    pub events: Vec<MethodEvent>,
}

/// Result of parsing a method trace: threads sorted by id plus non-fatal warnings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MethodTrace {
    pub threads: Vec<ThreadTrace>,
    pub warnings: Vec<String>,
}

impl MethodTrace {
    pub fn thread(&self, id: u64) -> Option<&ThreadTrace> {
        self.threads.iter().find(|t| t.thread_id == id)
    }
}

fn data_lines(input: &str) -> impl Iterator<Item = (usize, &str)> {
    input.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn field<T: FromStr>(value: &str, what: &str, line: usize) -> Result<T, TraceError> {
    value.trim().parse().map_err(|_| TraceError::Malformed { line, msg: format!("invalid {what} `{}`", value.trim()) })
}

/// Parses the comma-separated packet-trace format
/// `timestamp_us,direction,size_bytes,transport,src_addr,src_port,dst_addr,dst_port`.
pub fn parse_packet_trace(input: &str) -> Result<PacketTrace, TraceError> {
    let epoch_label =
        input.lines().map(str::trim).find_map(|l| l.strip_prefix(EPOCH_PREFIX)).unwrap_or_default().to_string();

    let mut packets: Vec<PacketRecord> = Vec::new();
    for (line, text) in data_lines(input) {
        let cols: Vec<&str> = text.split(',').collect();
        if cols.len() != 8 {
            return Err(TraceError::Malformed { line, msg: format!("expected 8 fields, found {}", cols.len()) });
        }
        let record = PacketRecord {
            timestamp_us: field(cols[0], "timestamp", line)?,
            direction: cols[1].trim().parse().map_err(|msg| TraceError::Malformed { line, msg })?,
            size_bytes: field(cols[2], "size", line)?,
            transport: cols[3].trim().parse().map_err(|msg| TraceError::Malformed { line, msg })?,
            src_addr: field(cols[4], "source address", line)?,
            src_port: field(cols[5], "source port", line)?,
            dst_addr: field(cols[6], "destination address", line)?,
            dst_port: field(cols[7], "destination port", line)?,
        };
        if record.size_bytes < 1 {
            return Err(TraceError::Malformed { line, msg: "size_bytes must be at least 1".into() });
        }
        if packets.last().is_some_and(|prev| prev.timestamp_us > record.timestamp_us) {
            return Err(TraceError::NonMonotonic { line });
        }
        packets.push(record);
    }
    Ok(PacketTrace { packets, epoch_label })
}

/// Parses the `timestamp_us,kind,thread_id,method_id` method-trace format.
///
/// Events are grouped per thread and nesting is checked. Enters still open at
/// the end of the stream get a synthetic exit at the stream's last timestamp
/// and a warning.
pub fn parse_method_trace(input: &str) -> Result<MethodTrace, TraceError> {
    let mut threads: BTreeMap<u64, (Vec<MethodEvent>, Vec<String>)> = BTreeMap::new();
    let mut last_ts = i64::MIN;

    for (line, text) in data_lines(input) {
        let mut cols = text.splitn(4, ',');
        let (Some(ts), Some(kind), Some(tid), Some(method)) = (cols.next(), cols.next(), cols.next(), cols.next())
        else {
            return Err(TraceError::Malformed { line, msg: "expected 4 fields".into() });
        };
        let method_id = method.trim();
        if method_id.is_empty() {
            return Err(TraceError::Malformed { line, msg: "empty method_id".into() });
        }
        if method_id.contains(',') {
            return Err(TraceError::Malformed { line, msg: "method_id must not contain commas".into() });
        }
        let kind = match kind.trim() {
            "enter" => EventKind::Enter,
            "exit" => EventKind::Exit,
            other => {
                return Err(TraceError::Malformed {
                    line,
                    msg: format!("kind must be `enter` or `exit`, got `{other}`"),
                })
            }
        };
        let event = MethodEvent {
            kind,
            timestamp_us: field(ts, "timestamp", line)?,
            thread_id: field(tid, "thread id", line)?,
            method_id: method_id.to_string(),
        };

        let (events, stack) = threads.entry(event.thread_id).or_default();
        if events.last().is_some_and(|prev| prev.timestamp_us > event.timestamp_us) {
            return Err(TraceError::NonMonotonic { line });
        }
        match kind {
            EventKind::Enter => stack.push(event.method_id.clone()),
            EventKind::Exit => {
                if stack.last() != Some(&event.method_id) {
                    return Err(TraceError::ExitWithoutEnter {
                        line,
                        thread_id: event.thread_id,
                        method_id: event.method_id,
                    });
                }
                stack.pop();
            }
        }
        last_ts = last_ts.max(event.timestamp_us);
        events.push(event);
    }

    let mut warnings = Vec::new();
    let threads = threads
        .into_iter()
        .map(|(thread_id, (mut events, mut stack))| {
            while let Some(method_id) = stack.pop() {
                warnings.push(format!("thread {thread_id}: auto-closing unclosed enter of {method_id} at {last_ts}"));
                events.push(MethodEvent { kind: EventKind::Exit, timestamp_us: last_ts, thread_id, method_id });
            }
            ThreadTrace { thread_id, events }
        })
        .collect();
    Ok(MethodTrace { threads, warnings })
}

/// Splits a trace into flows by normalized 5-tuple; within one key a silence
/// longer than `idle_gap_us` starts a new flow. Flows are ordered by their
/// first packet.
pub fn segment_flows(trace: &PacketTrace, idle_gap_us: i64) -> Result<Vec<Flow>, TraceError> {
    if idle_gap_us <= 0 {
        return Err(TraceError::InvalidIdleGap(idle_gap_us));
    }
    let mut flows: Vec<Flow> = Vec::new();
    // key -> index of the currently open flow for that key
    let mut open: BTreeMap<FlowKey, usize> = BTreeMap::new();
    for (i, packet) in trace.packets.iter().enumerate() {
        let key = packet.flow_key();
        let current = open.get(&key).copied().filter(|&f| {
            let last = *flows[f].packet_indices.last().expect("flows are never empty");
            packet.timestamp_us - trace.packets[last].timestamp_us <= idle_gap_us
        });
        match current {
            Some(f) => flows[f].packet_indices.push(i),
            None => {
                open.insert(key, flows.len());
                flows.push(Flow { key, packet_indices: vec![i] });
            }
        }
    }
    Ok(flows)
}
