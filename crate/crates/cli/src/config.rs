//! Run configuration: one TOML file holding every tunable of both pipelines.

use std::collections::BTreeSet;
use std::fmt;

use offkit_core::codefacts::{
    ConstraintConfig, DEFAULT_ALWAYS_SERIALIZABLE, DEFAULT_FILESYSTEM_TAGS, DEFAULT_HARDWARE_CATALOG,
};
use offkit_core::correlator::{CorrelationParams, NetworkCallFilter, DEFAULT_NETWORK_PREFIXES};
use offkit_core::energy::{EnergyModel, RrcModelParams, WifiModelParams};
use offkit_core::trace::DEFAULT_IDLE_GAP_US;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum ModelKind {
    #[serde(rename = "3g")]
    #[value(name = "3g")]
    ThreeG,
    #[serde(rename = "wifi")]
    #[value(name = "wifi")]
    Wifi,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::ThreeG => "3g",
            ModelKind::Wifi => "wifi",
        })
    }
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelKind,
    pub bin_width_us: i64,
    pub max_lag_bins: usize,
    pub threshold: f64,
    pub idle_gap_us: i64,
    pub min_bytes_filter: u64,
    pub network_prefixes: Vec<String>,
    /// Library frame prefixes folded into one node; empty disables folding.
    pub collapse_prefixes: Vec<String>,
    pub hardware_catalog: Vec<String>,
    pub filesystem_tags: Vec<String>,
    pub always_serializable: Vec<String>,
    pub rrc: RrcModelParams,
    pub wifi: WifiModelParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        let corr = CorrelationParams::default();
        RunConfig {
            model: ModelKind::ThreeG,
            bin_width_us: corr.bin_width_us,
            max_lag_bins: corr.max_lag_bins,
            threshold: corr.threshold,
            idle_gap_us: DEFAULT_IDLE_GAP_US,
            min_bytes_filter: 1,
            network_prefixes: strings(DEFAULT_NETWORK_PREFIXES),
            collapse_prefixes: Vec::new(),
            hardware_catalog: strings(DEFAULT_HARDWARE_CATALOG),
            filesystem_tags: strings(DEFAULT_FILESYSTEM_TAGS),
            always_serializable: strings(DEFAULT_ALWAYS_SERIALIZABLE),
            rrc: RrcModelParams::default(),
            wifi: WifiModelParams::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn fmt::Display| ConfigError::Invalid(e.to_string());
        self.correlation().validate().map_err(|e| invalid(&e))?;
        if self.idle_gap_us <= 0 {
            return Err(ConfigError::Invalid(format!("idle_gap_us must be positive, got {}", self.idle_gap_us)));
        }
        if self.network_prefixes.iter().all(|p| p.is_empty()) {
            return Err(ConfigError::Invalid("network_prefixes must not be empty".into()));
        }
        if self.filesystem_tags.iter().any(|t| self.hardware_catalog.contains(t)) {
            return Err(ConfigError::Invalid("a subsystem tag is listed as both hardware and filesystem".into()));
        }
        self.rrc.validate().map_err(|e| invalid(&e))?;
        self.wifi.validate().map_err(|e| invalid(&e))?;
        Ok(())
    }

    pub fn correlation(&self) -> CorrelationParams {
        CorrelationParams {
            bin_width_us: self.bin_width_us,
            max_lag_bins: self.max_lag_bins,
            threshold: self.threshold,
        }
    }

    pub fn network_filter(&self) -> NetworkCallFilter {
        NetworkCallFilter::new(self.network_prefixes.iter().filter(|p| !p.is_empty()).cloned())
    }

    pub fn energy_model(&self) -> EnergyModel {
        match self.model {
            ModelKind::ThreeG => EnergyModel::Rrc3g(self.rrc),
            ModelKind::Wifi => EnergyModel::Wifi(self.wifi),
        }
    }

    pub fn constraints(&self) -> ConstraintConfig {
        let set = |v: &[String]| v.iter().cloned().collect::<BTreeSet<_>>();
        ConstraintConfig {
            always_serializable: set(&self.always_serializable),
            hardware_catalog: set(&self.hardware_catalog),
            filesystem_tags: set(&self.filesystem_tags),
        }
    }
}
