//! Experiment configuration.
//!
//! Every parameter has its default in `defaults.toml`, compiled into the
//! library. A user file is merged key by key over those defaults, so it only
//! needs the keys it changes. Arrays replace arrays wholesale.

use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::airtime::PhyMacParams;
use crate::delay::FileClassMix;
use crate::error::{config, Error, Result};
use crate::policies::{LoadBalanceParams, PolicyKind};
use crate::radio::RadioParams;
use crate::scenario::Geometry;

/// Schema version understood by this build.
pub const CONFIG_VERSION: u32 = 1;

/// Source text of the defaults file.
pub const DEFAULTS_TOML: &str = include_str!("../defaults.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThroughputSection {
    pub n_max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub geometry: Geometry,
    pub arrival_rate_per_s: f64,
    pub p_centre: f64,
    pub mean_files_per_sta: f64,
    pub sim_duration_s: f64,
    pub warmup_fraction: f64,
    pub trace_interval_s: f64,
    pub policy: PolicyKind,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub policies: Vec<PolicyKind>,
    pub seeds: u32,
    pub base_seed: u64,
    pub p_centre_sweep: Vec<f64>,
    pub arrival_rates_per_s: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub phy_mac: PhyMacParams,
    pub throughput: ThroughputSection,
    pub mix: FileClassMix,
    pub radio: RadioParams,
    pub load_balance: LoadBalanceParams,
    pub scenario: ScenarioSection,
    pub experiment: ExperimentSection,
}

/// The built-in defaults, parsed once.
pub fn defaults() -> &'static ExperimentConfig {
    static DEFAULTS: OnceLock<ExperimentConfig> = OnceLock::new();
    DEFAULTS.get_or_init(|| {
        let cfg: ExperimentConfig = toml::from_str(DEFAULTS_TOML).expect("built-in defaults.toml must parse");
        cfg.validate().expect("built-in defaults.toml must validate");
        cfg
    })
}

fn defaults_value() -> toml::Value {
    toml::from_str(DEFAULTS_TOML).expect("built-in defaults.toml must parse")
}

/// Recursively overlays `over` onto `base`. Tables merge, except that a
/// table whose `kind` changes is replaced; anything else replaces.
pub fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) if b.get("kind") == o.get("kind") || o.get("kind").is_none() => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn parse_value(text: &str, origin: &str) -> Result<toml::Value> {
    toml::from_str::<toml::Value>(text).map_err(|e| config(format!("{origin}: {e}")))
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        defaults().clone()
    }
}

impl ExperimentConfig {
    /// Parses a (possibly partial) config over the defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut value = defaults_value();
        merge(&mut value, parse_value(text, "config")?);
        Self::from_value(value)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config(format!("cannot read {}: {e}", path.display())))?;
        let mut value = defaults_value();
        merge(&mut value, parse_value(&text, &path.display().to_string())?);
        Self::from_value(value).map_err(|e| match e {
            Error::Config(m) => config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn from_value(value: toml::Value) -> Result<Self> {
        let cfg: ExperimentConfig = value.try_into().map_err(|e: toml::de::Error| config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Overlays a partial file onto one top-level section, e.g. a
    /// `--params` file onto `phy_mac`.
    pub fn overlay_section(&mut self, section: &str, text: &str, origin: &str) -> Result<()> {
        let mut value = toml::Value::try_from(&*self).map_err(|e| Error::Internal(e.to_string()))?;
        let mut wrapped = toml::map::Map::new();
        wrapped.insert(section.to_string(), parse_value(text, origin)?);
        merge(&mut value, toml::Value::Table(wrapped));
        *self = Self::from_value(value).map_err(|e| match e {
            Error::Config(m) => config(format!("{origin}: {m}")),
            other => other,
        })?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(config(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version)));
        }
        self.phy_mac.validate()?;
        self.mix.validate()?;
        self.radio.validate()?;
        if self.throughput.n_max < 1 {
            return Err(config("throughput.n_max must be at least 1"));
        }
        for r in self.radio.rates() {
            if !self.phy_mac.is_data_rate(r) {
                return Err(config(format!("ring rate {r} Mb/s is not in phy_mac.data_rates_mbps")));
            }
        }
        let s = &self.scenario;
        if !(s.arrival_rate_per_s > 0.0) || !s.arrival_rate_per_s.is_finite() {
            return Err(config("scenario.arrival_rate_per_s must be positive"));
        }
        if !(0.0..=1.0).contains(&s.p_centre) {
            return Err(config("scenario.p_centre must lie in [0, 1]"));
        }
        if !(s.mean_files_per_sta >= 1.0) || !s.mean_files_per_sta.is_finite() {
            return Err(config("scenario.mean_files_per_sta must be at least 1"));
        }
        if !(s.sim_duration_s > 0.0) || !s.sim_duration_s.is_finite() {
            return Err(config("scenario.sim_duration_s must be positive"));
        }
        if !(0.0..1.0).contains(&s.warmup_fraction) {
            return Err(config("scenario.warmup_fraction must lie in [0, 1)"));
        }
        if !(s.trace_interval_s > 0.0) {
            return Err(config("scenario.trace_interval_s must be positive"));
        }
        let e = &self.experiment;
        if e.policies.is_empty() {
            return Err(config("experiment.policies is empty"));
        }
        if e.seeds < 1 {
            return Err(config("experiment.seeds must be at least 1"));
        }
        if e.p_centre_sweep.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(config("experiment.p_centre_sweep values must lie in [0, 1]"));
        }
        if e.arrival_rates_per_s.iter().any(|r| !(*r > 0.0)) {
            return Err(config("experiment.arrival_rates_per_s values must be positive"));
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(e.to_string()))
    }
}
