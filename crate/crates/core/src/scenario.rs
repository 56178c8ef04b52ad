//! Scenario files: one TOML document per experiment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::grid::step_count;
use crate::kernel::{InitialLaw, KernelLaw};
use crate::lln::{AuxiliaryConfig, ExpectationMode, LimitConfig};
use crate::pde::PdeScenario;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Conservation residual above which the limit solver gives up.
    #[serde(default = "d_residual_ceiling")]
    pub residual_ceiling: f64,
    /// Accepted range for the fitted log-log convergence slope.
    #[serde(default = "d_slope_band")]
    pub slope_band: [f64; 2],
    /// Lower bound on F̄ for endemic scenarios.
    #[serde(default = "d_instability_floor")]
    pub instability_floor: f64,
    /// Level below which F̄ and Ī count as extinct.
    #[serde(default = "d_extinction")]
    pub extinction: f64,
    /// Largest number of stored kernel samples in the limit solver.
    #[serde(default = "d_memory_budget")]
    pub memory_budget: u64,
}

fn d_residual_ceiling() -> f64 {
    0.05
}
fn d_slope_band() -> [f64; 2] {
    [-0.65, -0.35]
}
fn d_instability_floor() -> f64 {
    0.05
}
fn d_extinction() -> f64 {
    1e-3
}
fn d_memory_budget() -> u64 {
    100_000_000
}
fn d_samples() -> usize {
    500
}
fn d_replications() -> usize {
    20
}
fn d_event_limit() -> usize {
    1_000_000
}
fn d_individuals() -> usize {
    10_000
}
fn d_stride() -> usize {
    1
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            residual_ceiling: d_residual_ceiling(),
            slope_band: d_slope_band(),
            instability_floor: d_instability_floor(),
            extinction: d_extinction(),
            memory_budget: d_memory_budget(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxiliarySection {
    #[serde(default = "d_individuals")]
    pub individuals: usize,
    #[serde(default = "d_stride")]
    pub stride: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub horizon: f64,
    pub dt: f64,
    /// Spacing of the grid on which simulations are recorded; defaults to `dt`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_dt: Option<f64>,
    /// Kernel samples per cohort when the limit solver runs by Monte Carlo.
    #[serde(default = "d_samples")]
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub mode: ExpectationMode,
    /// Population sizes for simulation and convergence sweeps.
    #[serde(default)]
    pub populations: Vec<usize>,
    #[serde(default = "d_replications")]
    pub replications: usize,
    /// Events kept in the simulation log; `0` disables it.
    #[serde(default = "d_event_limit")]
    pub event_limit: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub kernel: KernelLaw,
    pub initial: InitialLaw,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auxiliary: Option<AuxiliarySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pde: Option<PdeScenario>,
}

impl Scenario {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Scenario> {
        let parse = |message: String| Error::Parse {
            path: origin.into(),
            message,
        };
        let raw: toml::Value = toml::from_str(text).map_err(|e| parse(e.to_string()))?;
        let scn: Scenario = toml::from_str(text).map_err(|e| parse(e.to_string()))?;
        // Flattened kernel fields defeat serde's own unknown-key check, so
        // compare against what the parsed scenario serializes back to.
        let echoed = toml::Value::try_from(&scn).map_err(|e| parse(e.to_string()))?;
        if let Some(key) = first_unknown_key(&raw, &echoed, "") {
            return Err(parse(format!("unknown field `{key}`")));
        }
        scn.validate()?;
        Ok(scn)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse {
            path: self.name.clone().into(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(config_err("name", "must not be empty"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(config_err("horizon", "must be positive"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(config_err("dt", "must be positive"));
        }
        step_count(self.horizon, self.dt).map_err(|e| config_err("dt", e.to_string()))?;
        if let Some(s) = self.sample_dt {
            self.sample_stride()
                .map_err(|_| config_err("sample_dt", format!("{s} is not a whole multiple of dt")))?;
        }
        if self.samples == 0 {
            return Err(config_err("samples", "must be at least 1"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(config_err("seed", "must fit in a signed 64-bit integer"));
        }
        if let Some(i) = self.populations.iter().position(|&n| n == 0) {
            return Err(config_err(format!("populations[{i}]"), "must be at least 1"));
        }
        if self.replications == 0 {
            return Err(config_err("replications", "must be at least 1"));
        }
        let t = &self.tolerances;
        if !(t.residual_ceiling > 0.0) {
            return Err(config_err("tolerances.residual_ceiling", "must be positive"));
        }
        if !(t.slope_band[0] < t.slope_band[1]) {
            return Err(config_err("tolerances.slope_band", "must be an increasing pair"));
        }
        if !(t.extinction > 0.0) {
            return Err(config_err("tolerances.extinction", "must be positive"));
        }
        self.kernel.validate("kernel")?;
        self.initial.validate(&self.kernel, "initial")?;
        if let Some(a) = &self.auxiliary {
            if a.individuals == 0 {
                return Err(config_err("auxiliary.individuals", "must be at least 1"));
            }
            if a.stride == 0 {
                return Err(config_err("auxiliary.stride", "must be at least 1"));
            }
        }
        if let Some(p) = &self.pde {
            p.validate("pde")?;
        }
        Ok(())
    }

    /// Number of solver steps between recorded simulation samples.
    pub fn sample_stride(&self) -> Result<usize> {
        let Some(s) = self.sample_dt else { return Ok(1) };
        let r = s / self.dt;
        let k = r.round();
        if k < 1.0 || (r - k).abs() > 1e-9 * r {
            return Err(config_err("sample_dt", "must be a whole multiple of dt"));
        }
        step_count(self.horizon, s)?;
        Ok(k as usize)
    }

    pub fn sample_dt(&self) -> f64 {
        self.sample_dt.unwrap_or(self.dt)
    }

    pub fn limit_config(&self, seed_offset: u64) -> LimitConfig {
        LimitConfig {
            horizon: self.horizon,
            dt: self.dt,
            samples: self.samples,
            seed: self.seed.wrapping_add(seed_offset),
            mode: self.mode,
            residual_ceiling: self.tolerances.residual_ceiling,
            memory_budget: self.tolerances.memory_budget,
        }
    }

    pub fn auxiliary_config(&self, seed_offset: u64) -> AuxiliaryConfig {
        let a = self.auxiliary.clone().unwrap_or(AuxiliarySection {
            individuals: d_individuals(),
            stride: d_stride(),
        });
        AuxiliaryConfig {
            individuals: a.individuals,
            seed: self.seed.wrapping_add(seed_offset),
            stride: a.stride,
        }
    }
}

fn first_unknown_key(raw: &toml::Value, echoed: &toml::Value, at: &str) -> Option<String> {
    use toml::Value;
    match (raw, echoed) {
        (Value::Table(r), Value::Table(e)) => r.iter().find_map(|(k, v)| {
            let here = if at.is_empty() { k.clone() } else { format!("{at}.{k}") };
            match e.get(k) {
                None => Some(here),
                Some(ev) => first_unknown_key(v, ev, &here),
            }
        }),
        (Value::Array(r), Value::Array(e)) => r
            .iter()
            .zip(e)
            .enumerate()
            .find_map(|(i, (rv, ev))| first_unknown_key(rv, ev, &format!("{at}[{i}]"))),
        _ => None,
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Scenario::from_toml_str(&text, &path.display().to_string())
}
