//! Radio energy models and offloading savings bounds.
//!
//! Both models are piecewise-constant in time since the last packet. Energy is
//! kept in a layered form: a base power over the whole horizon plus, for each
//! elevated level, the incremental power times the time spent at or above
//! that level. Durations are integer microseconds, so differences between two
//! traces on the same horizon are exact before any float is involved.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{Direction, PacketRecord, PacketTrace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("packet at {timestamp_us} us lies outside horizon {horizon}")]
    OutsideHorizon { timestamp_us: i64, horizon: Horizon },
    #[error("invalid horizon {0}: end precedes start")]
    InvalidHorizon(Horizon),
    #[error("packet index {0} is not part of the full trace")]
    NotASubset(usize),
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
}

/// 3G RRC power states and inactivity timers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RrcModelParams {
    pub p_dch_mw: f64,
    pub p_fach_mw: f64,
    pub p_idle_mw: f64,
    /// DCH -> FACH inactivity timer.
    pub t_dch_us: i64,
    /// FACH -> IDLE inactivity timer.
    pub t_fach_us: i64,
    pub per_byte_tx_uj: f64,
    pub per_byte_rx_uj: f64,
}

impl Default for RrcModelParams {
    fn default() -> Self {
        RrcModelParams {
            p_dch_mw: 800.0,
            p_fach_mw: 460.0,
            p_idle_mw: 0.0,
            t_dch_us: 5_000_000,
            t_fach_us: 12_000_000,
            per_byte_tx_uj: 0.0,
            per_byte_rx_uj: 0.0,
        }
    }
}

impl RrcModelParams {
    pub fn validate(&self) -> Result<(), EnergyError> {
        let powers = [self.p_dch_mw, self.p_fach_mw, self.p_idle_mw, self.per_byte_tx_uj, self.per_byte_rx_uj];
        if powers.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(EnergyError::InvalidParams("3G powers and per-byte costs must be finite and >= 0".into()));
        }
        if !(self.p_dch_mw >= self.p_fach_mw && self.p_fach_mw >= self.p_idle_mw) {
            return Err(EnergyError::InvalidParams("3G powers must satisfy p_dch >= p_fach >= p_idle".into()));
        }
        if self.t_dch_us <= 0 || self.t_fach_us <= 0 {
            return Err(EnergyError::InvalidParams("3G inactivity timers must be positive".into()));
        }
        Ok(())
    }
}

/// Wi-Fi model: active for `tail_us` after every packet, idle otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WifiModelParams {
    pub p_active_mw: f64,
    pub tail_us: i64,
    pub p_idle_mw: f64,
    pub per_packet_uj: f64,
    pub per_byte_uj: f64,
}

impl Default for WifiModelParams {
    fn default() -> Self {
        WifiModelParams { p_active_mw: 700.0, tail_us: 200_000, p_idle_mw: 0.0, per_packet_uj: 0.0, per_byte_uj: 0.0 }
    }
}

impl WifiModelParams {
    pub fn validate(&self) -> Result<(), EnergyError> {
        let values = [self.p_active_mw, self.p_idle_mw, self.per_packet_uj, self.per_byte_uj];
        if values.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(EnergyError::InvalidParams("Wi-Fi powers and per-unit costs must be finite and >= 0".into()));
        }
        if self.p_active_mw < self.p_idle_mw {
            return Err(EnergyError::InvalidParams("Wi-Fi powers must satisfy p_active >= p_idle".into()));
        }
        if self.tail_us < 0 {
            return Err(EnergyError::InvalidParams("Wi-Fi tail must be >= 0".into()));
        }
        Ok(())
    }
}

/// Integration window, microseconds, inclusive start and end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Horizon {
    pub start_us: i64,
    pub end_us: i64,
}

impl Horizon {
    pub fn new(start_us: i64, end_us: i64) -> Result<Self, EnergyError> {
        let h = Horizon { start_us, end_us };
        if end_us < start_us {
            return Err(EnergyError::InvalidHorizon(h));
        }
        Ok(h)
    }

    pub fn duration_us(&self) -> i64 {
        self.end_us - self.start_us
    }

    pub fn contains(&self, t: i64) -> bool {
        self.start_us <= t && t <= self.end_us
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start_us, self.end_us)
    }
}

/// Lower and upper bound of the energy saved by offloading a method.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBounds {
    pub e_min_j: f64,
    pub e_max_j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EnergyModel {
    Rrc3g(RrcModelParams),
    Wifi(WifiModelParams),
}

/// Packets, split by direction, and bytes of a trace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Units {
    packets: u64,
    tx_bytes: u64,
    rx_bytes: u64,
}

/// Time (us) at or above each elevated power level, plus unit counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Usage {
    levels: [i64; 2],
    units: Units,
}

impl EnergyModel {
    pub fn validate(&self) -> Result<(), EnergyError> {
        match self {
            EnergyModel::Rrc3g(p) => p.validate(),
            EnergyModel::Wifi(p) => p.validate(),
        }
    }

    /// Time a single packet keeps the radio above its idle power.
    pub fn tail_us(&self) -> i64 {
        match self {
            EnergyModel::Rrc3g(p) => p.t_dch_us + p.t_fach_us,
            EnergyModel::Wifi(p) => p.tail_us,
        }
    }

    /// `[first packet, last packet + full tail]`, or `[0, 0]` for an empty trace.
    pub fn default_horizon(&self, trace: &PacketTrace) -> Horizon {
        match (trace.packets.first(), trace.packets.last()) {
            (Some(first), Some(last)) => {
                Horizon { start_us: first.timestamp_us, end_us: last.timestamp_us + self.tail_us() }
            }
            _ => Horizon { start_us: 0, end_us: 0 },
        }
    }

    /// Durations after which each elevated level ends, highest coverage first.
    fn thresholds(&self) -> [i64; 2] {
        match self {
            EnergyModel::Rrc3g(p) => [p.t_dch_us + p.t_fach_us, p.t_dch_us],
            EnergyModel::Wifi(p) => [p.tail_us, 0],
        }
    }

    /// Base power and the increment for each elevated level (mW).
    fn power_layers(&self) -> (f64, [f64; 2]) {
        match self {
            EnergyModel::Rrc3g(p) => (p.p_idle_mw, [p.p_fach_mw - p.p_idle_mw, p.p_dch_mw - p.p_fach_mw]),
            EnergyModel::Wifi(p) => (p.p_idle_mw, [p.p_active_mw - p.p_idle_mw, 0.0]),
        }
    }

    fn unit_cost_uj(&self, u: &Units) -> f64 {
        match self {
            EnergyModel::Rrc3g(p) => u.tx_bytes as f64 * p.per_byte_tx_uj + u.rx_bytes as f64 * p.per_byte_rx_uj,
            EnergyModel::Wifi(p) => {
                u.packets as f64 * p.per_packet_uj + (u.tx_bytes + u.rx_bytes) as f64 * p.per_byte_uj
            }
        }
    }

    fn usage<'a, I>(&self, packets: I, horizon: Horizon) -> Result<Usage, EnergyError>
    where
        I: IntoIterator<Item = &'a PacketRecord>,
    {
        if horizon.end_us < horizon.start_us {
            return Err(EnergyError::InvalidHorizon(horizon));
        }
        let mut times = Vec::new();
        let mut units = Units::default();
        for p in packets {
            if !horizon.contains(p.timestamp_us) {
                return Err(EnergyError::OutsideHorizon { timestamp_us: p.timestamp_us, horizon });
            }
            times.push(p.timestamp_us);
            units.packets += 1;
            match p.direction {
                Direction::Outbound => units.tx_bytes += p.size_bytes,
                Direction::Inbound => units.rx_bytes += p.size_bytes,
            }
        }
        times.sort_unstable();

        let thresholds = self.thresholds();
        let mut levels = [0i64; 2];
        for (i, &t) in times.iter().enumerate() {
            // every packet restarts the timers; the next packet (or the horizon end) cuts them short
            let until = times.get(i + 1).copied().unwrap_or(horizon.end_us);
            let gap = until - t;
            for (level, threshold) in levels.iter_mut().zip(thresholds) {
                *level += gap.min(threshold);
            }
        }
        Ok(Usage { levels, units })
    }

    fn joules(&self, usage: &Usage, horizon: Horizon) -> f64 {
        let (base, increments) = self.power_layers();
        let layered: f64 = increments.iter().zip(usage.levels).map(|(p, d)| p * d as f64).sum();
        self.unit_cost_uj(&usage.units) * 1e-6 + layered * 1e-9 + base * horizon.duration_us() as f64 * 1e-9
    }

    /// Energy (J) of `packets` over `horizon`.
    pub fn estimate<'a, I>(&self, packets: I, horizon: Horizon) -> Result<f64, EnergyError>
    where
        I: IntoIterator<Item = &'a PacketRecord>,
    {
        let usage = self.usage(packets, horizon)?;
        Ok(self.joules(&usage, horizon))
    }

    /// `E(all) - E(rest)` where `rest` is a subset of `all` on the same horizon.
    fn difference_j(&self, all: &Usage, rest: &Usage) -> f64 {
        let (_, increments) = self.power_layers();
        let units = Units {
            packets: all.units.packets - rest.units.packets,
            tx_bytes: all.units.tx_bytes - rest.units.tx_bytes,
            rx_bytes: all.units.rx_bytes - rest.units.rx_bytes,
        };
        let layered: f64 =
            increments.iter().zip(all.levels.iter().zip(rest.levels)).map(|(p, (a, r))| p * (a - r) as f64).sum();
        self.unit_cost_uj(&units) * 1e-6 + layered * 1e-9
    }
}

/// Energy of a trace under the 3G RRC model.
pub fn estimate_energy_3g(trace: &PacketTrace, params: &RrcModelParams, horizon: Horizon) -> Result<f64, EnergyError> {
    params.validate()?;
    EnergyModel::Rrc3g(*params).estimate(&trace.packets, horizon)
}

/// Energy of a trace under the Wi-Fi model.
pub fn estimate_energy_wifi(
    trace: &PacketTrace,
    params: &WifiModelParams,
    horizon: Horizon,
) -> Result<f64, EnergyError> {
    params.validate()?;
    EnergyModel::Wifi(*params).estimate(&trace.packets, horizon)
}

/// Savings bounds for offloading the packets `method_packets` (indices into
/// `full`): `e_min = E(N) - E(N \ method)`, `e_max = E(method)`.
pub fn energy_bounds(
    full: &PacketTrace,
    method_packets: &[usize],
    model: &EnergyModel,
    horizon: Horizon,
) -> Result<EnergyBounds, EnergyError> {
    let all: Vec<usize> = (0..full.len()).collect();
    energy_bounds_within(full, &all, method_packets, model, horizon)
}

/// Same as [`energy_bounds`] with the full trace `N` given as a subset of
/// `trace` (e.g. the packets attributed to one thread).
pub fn energy_bounds_within(
    trace: &PacketTrace,
    full: &[usize],
    method_packets: &[usize],
    model: &EnergyModel,
    horizon: Horizon,
) -> Result<EnergyBounds, EnergyError> {
    let full_set: BTreeSet<usize> = full.iter().copied().collect();
    let method_set: BTreeSet<usize> = method_packets.iter().copied().collect();
    if let Some(&i) = full_set.iter().find(|&&i| i >= trace.len()) {
        return Err(EnergyError::NotASubset(i));
    }
    if let Some(&i) = method_set.iter().find(|i| !full_set.contains(i)) {
        return Err(EnergyError::NotASubset(i));
    }
    let pick = |set: &BTreeSet<usize>| set.iter().map(|&i| &trace.packets[i]).collect::<Vec<_>>();
    let rest: BTreeSet<usize> = full_set.difference(&method_set).copied().collect();

    let all_usage = model.usage(pick(&full_set), horizon)?;
    let rest_usage = model.usage(pick(&rest), horizon)?;
    let method_usage = model.usage(pick(&method_set), horizon)?;
    Ok(EnergyBounds {
        e_min_j: model.difference_j(&all_usage, &rest_usage),
        e_max_j: model.joules(&method_usage, horizon),
    })
}
