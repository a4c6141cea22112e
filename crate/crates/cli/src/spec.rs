//! Experiment spec file: a single human-editable TOML document describing
//! the scenario, stopping rule, policies, optional ADC front end and the
//! seed replication plan. Unset keys fall back to the full-scale defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use actdet_core::adc::{FormulaMode, QuantizerConfig};
use actdet_core::model::{Placement, SystemConfig};
use actdet_core::policies::{BernoulliPolicyConfig, ThompsonConfig};
use actdet_core::solver::{PolicyKind, StopRule};
use actdet_core::Error;

pub const SPEC_SCHEMA_VERSION: u32 = 1;

fn default_schema_version() -> u32 {
    SPEC_SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub stop: StopSpec,
    pub policies: Vec<PolicySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adc: Option<AdcSpec>,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSpec {
    pub num_devices: usize,
    pub bits_per_message: u32,
    pub seq_len: usize,
    pub num_antennas: usize,
    pub num_active: usize,
    pub tx_power_dbm: f64,
    pub noise_power_dbm: f64,
    pub pathloss_const_db: f64,
    pub pathloss_slope: f64,
    pub cell_radius_km: f64,
    /// `cell-edge`, `uniform-disk` or `explicit` (with `distances_km`).
    pub placement: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distances_km: Option<Vec<f64>>,
    pub normalize_power: bool,
    pub master_seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        let full = SystemConfig::full_scale(1);
        ScenarioSpec {
            num_devices: full.num_devices,
            bits_per_message: full.bits_per_message,
            seq_len: full.seq_len,
            num_antennas: full.num_antennas,
            num_active: full.num_active,
            tx_power_dbm: full.tx_power_dbm,
            noise_power_dbm: full.noise_power_dbm,
            pathloss_const_db: full.pathloss_const_db,
            pathloss_slope: full.pathloss_slope,
            cell_radius_km: full.cell_radius_km,
            placement: "cell-edge".into(),
            distances_km: None,
            normalize_power: full.normalize_power,
            master_seed: full.master_seed,
        }
    }
}

impl ScenarioSpec {
    pub fn resolve(&self) -> Result<SystemConfig, Error> {
        let placement = match self.placement.as_str() {
            "cell-edge" => Placement::CellEdge,
            "uniform-disk" => Placement::UniformDisk,
            "explicit" => Placement::Explicit(self.distances_km.clone().ok_or_else(|| {
                Error::Config("placement = \"explicit\" requires distances_km".into())
            })?),
            other => {
                return Err(Error::Config(format!(
                    "unknown placement {other:?}; expected cell-edge, uniform-disk or explicit"
                )))
            }
        };
        let config = SystemConfig {
            num_devices: self.num_devices,
            bits_per_message: self.bits_per_message,
            seq_len: self.seq_len,
            num_antennas: self.num_antennas,
            num_active: self.num_active,
            tx_power_dbm: self.tx_power_dbm,
            noise_power_dbm: self.noise_power_dbm,
            pathloss_const_db: self.pathloss_const_db,
            pathloss_slope: self.pathloss_slope,
            cell_radius_km: self.cell_radius_km,
            placement,
            normalize_power: self.normalize_power,
            master_seed: self.master_seed,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StopSpec {
    pub rel_tol: f64,
    pub max_iters: u64,
    /// Comparison window; 1 is the literal per-iteration rule, `NR` gives
    /// epoch-level stopping.
    pub window: u64,
}

impl Default for StopSpec {
    fn default() -> Self {
        let d = StopRule::default();
        StopSpec {
            rel_tol: d.rel_tol,
            max_iters: d.max_iters,
            window: d.window,
        }
    }
}

impl StopSpec {
    pub fn resolve(&self) -> Result<StopRule, Error> {
        let rule = StopRule {
            rel_tol: self.rel_tol,
            max_iters: self.max_iters,
            window: self.window,
        };
        rule.validate()?;
        Ok(rule)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum PolicySpec {
    Random,
    Bernoulli {
        #[serde(skip_serializing_if = "Option::is_none")]
        epsilon: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        refresh_period: Option<u64>,
    },
    Thompson {
        #[serde(skip_serializing_if = "Option::is_none")]
        num_arms: Option<usize>,
        #[serde(skip_serializing_if = "Option::is_none")]
        refresh_period: Option<u64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        prior_alpha: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        prior_beta: Option<f64>,
    },
}

impl PolicySpec {
    /// Defaults: ε = 0.6, refresh period ⌈NR/2⌉, q = 10, uniform prior.
    pub fn resolve(&self, num_coords: usize) -> Result<PolicyKind, Error> {
        let default_period = (num_coords as u64).div_ceil(2).max(1);
        let kind = match self {
            PolicySpec::Random => PolicyKind::Random,
            PolicySpec::Bernoulli {
                epsilon,
                refresh_period,
            } => PolicyKind::Bernoulli(BernoulliPolicyConfig {
                epsilon: epsilon.unwrap_or(0.6),
                refresh_period: refresh_period.unwrap_or(default_period),
            }),
            PolicySpec::Thompson {
                num_arms,
                refresh_period,
                prior_alpha,
                prior_beta,
            } => PolicyKind::Thompson(ThompsonConfig {
                num_arms: num_arms.unwrap_or(10),
                refresh_period: refresh_period.unwrap_or(default_period),
                prior_alpha: prior_alpha.unwrap_or(1.0),
                prior_beta: prior_beta.unwrap_or(1.0),
            }),
        };
        kind.validate()?;
        Ok(kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdcSpec {
    pub bits: u32,
    pub step: f64,
    /// `standard` or `paper`.
    pub formula: String,
}

impl Default for AdcSpec {
    fn default() -> Self {
        AdcSpec {
            bits: 3,
            step: 0.5,
            formula: "standard".into(),
        }
    }
}

impl AdcSpec {
    pub fn resolve(&self) -> Result<QuantizerConfig, Error> {
        let mode = match self.formula.as_str() {
            "standard" => FormulaMode::StandardBussgang,
            "paper" => FormulaMode::PaperLiteral,
            other => {
                return Err(Error::Config(format!(
                    "unknown ADC formula {other:?}; expected standard or paper"
                )))
            }
        };
        QuantizerConfig::new(self.bits, self.step, mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub num_seeds: u64,
    /// Any of `traces`, `summaries`, `aggregate-csv`.
    pub emit: Vec<String>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            num_seeds: 1,
            emit: vec!["traces".into(), "summaries".into(), "aggregate-csv".into()],
        }
    }
}

/// Fully resolved experiment, ready to execute.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedSpec {
    pub schema_version: u32,
    pub config: SystemConfig,
    pub stop: StopRule,
    pub policies: Vec<PolicyKind>,
    pub adc: Option<QuantizerConfig>,
    pub num_seeds: u64,
    pub emit_traces: bool,
    pub emit_summaries: bool,
    pub emit_aggregate: bool,
}

impl ResolvedSpec {
    /// Short hex digest tying every output row back to its exact inputs.
    pub fn digest(&self) -> String {
        let text = toml::to_string(self).expect("resolved spec serializes");
        let hash = Sha256::digest(text.as_bytes());
        let mut hex = String::with_capacity(12);
        for byte in hash.iter().take(6) {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    pub fn policy_names(&self) -> Vec<&'static str> {
        self.policies.iter().map(|p| p.name()).collect()
    }
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self, Error> {
        let spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| Error::Config(format!("spec parse error: {e}")))?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read spec {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String, Error> {
        toml::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn resolve(&self) -> Result<ResolvedSpec, Error> {
        if self.schema_version != SPEC_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported spec schema_version {} (this reader handles {})",
                self.schema_version, SPEC_SCHEMA_VERSION
            )));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("at least one policy is required".into()));
        }
        if self.experiment.num_seeds == 0 {
            return Err(Error::Config("num_seeds must be at least 1".into()));
        }
        let config = self.scenario.resolve()?;
        let stop = self.stop.resolve()?;
        let policies: Vec<PolicyKind> = self
            .policies
            .iter()
            .map(|p| p.resolve(config.num_coords()))
            .collect::<Result<_, _>>()?;
        let mut names = std::collections::BTreeSet::new();
        for p in &policies {
            if !names.insert(p.name()) {
                return Err(Error::Config(format!(
                    "duplicate policy kind {:?}; one entry per kind",
                    p.name()
                )));
            }
        }
        let adc = self.adc.as_ref().map(|a| a.resolve()).transpose()?;
        let mut emit_traces = false;
        let mut emit_summaries = false;
        let mut emit_aggregate = false;
        for e in &self.experiment.emit {
            match e.as_str() {
                "traces" => emit_traces = true,
                "summaries" => emit_summaries = true,
                "aggregate-csv" => emit_aggregate = true,
                other => {
                    return Err(Error::Config(format!(
                        "unknown emit target {other:?}; expected traces, summaries or aggregate-csv"
                    )))
                }
            }
        }
        Ok(ResolvedSpec {
            schema_version: self.schema_version,
            config,
            stop,
            policies,
            adc,
            num_seeds: self.experiment.num_seeds,
            emit_traces,
            emit_summaries,
            emit_aggregate,
        })
    }
}
