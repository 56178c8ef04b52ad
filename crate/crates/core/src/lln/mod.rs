//! Solver for the large-population limit of the model.
//!
//! The limit is the pair (S̄, F̄) of mean susceptibility and force of infection:
//!
//! ```text
//! F̄(t) = Ī(0)·λ̄₀(t) + ∫_0^t λ̄(t−s) S̄(s)F̄(s) ds
//! S̄(t) = E[γ₀(t)·e^{−∫_0^t γ₀F̄}] + ∫_0^t E[γ(t−s)·e^{−∫_s^t γ(r−s)F̄(r)dr}] S̄(s)F̄(s) ds
//! ```
//!
//! Time is discretized on a uniform grid. On each cell the force of infection
//! is frozen at its left value and the incidence S̄F̄ is spread uniformly, with
//! its mass taken by the trapezoid rule (exact path) or the left-point rule
//! (Monte Carlo path). Convolutions with λ̄ and F^c use exact
//! cell averages, which makes `S̄ = 1/R₀` an exact fixed point of the scheme.
//!
//! Expectations over γ are exact when γ = γ*·1{t ≥ ζ} (see [`exact`]), and
//! otherwise use per-cohort Monte Carlo samples (see [`sampled`]).

mod auxiliary;
mod exact;
mod sampled;

pub use auxiliary::{auxiliary_check, AuxiliaryConfig, AuxiliaryReport};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::grid::{step_count, TrajectoryGrid};
use crate::kernel::{InitialLaw, KernelLaw};

/// How expectations over the γ-law are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectationMode {
    /// Exact for indicator-shaped γ, Monte Carlo otherwise.
    #[default]
    Auto,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverPath {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitConfig {
    pub horizon: f64,
    pub dt: f64,
    /// Kernel samples per cohort (Monte Carlo path only).
    pub samples: usize,
    pub seed: u64,
    pub mode: ExpectationMode,
    /// Largest conservation residual tolerated before reporting divergence.
    pub residual_ceiling: f64,
    /// Largest number of stored cohort samples, `samples · steps`.
    pub memory_budget: u64,
}

impl LimitConfig {
    pub fn new(horizon: f64, dt: f64) -> Self {
        LimitConfig {
            horizon,
            dt,
            samples: 500,
            seed: 0,
            mode: ExpectationMode::Auto,
            residual_ceiling: 0.05,
            memory_budget: 100_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitSolution {
    /// Trajectory with the conservation residual column filled in.
    pub grid: TrajectoryGrid,
    pub path: SolverPath,
    /// E[γ*·e^{−∫γF̄}] over everyone, with integrals truncated at the horizon.
    /// Estimates the long-run susceptibility when the epidemic dies out.
    pub s_star_truncated: f64,
}

/// Cell-averaged kernels shared by both solver paths.
pub(crate) struct Renewal {
    pub i0: f64,
    /// `lc[d]` = mean of λ̄ over `((d−1)dt, d·dt]`, `d ≥ 1`.
    pub lc: Vec<f64>,
    /// `fc[d]` = mean of F^c over the same cell.
    pub fc: Vec<f64>,
    /// λ̄₀ and F^c₀ at grid points.
    pub lam0: Vec<f64>,
    pub fc0: Vec<f64>,
}

impl Renewal {
    pub fn new(law: &KernelLaw, init: &InitialLaw, dt: f64, steps: usize) -> Self {
        let eta = law.eta_law();
        let mut lc = vec![0.0; steps + 1];
        let mut fc = vec![0.0; steps + 1];
        let mut is_prev = 0.0;
        for d in 1..=steps {
            let (a, b) = ((d - 1) as f64 * dt, d as f64 * dt);
            lc[d] = law.mean_infectivity_integral(a, b) / dt;
            let is_b = eta.integrated_survival(b);
            fc[d] = (is_b - is_prev) / dt;
            is_prev = is_b;
        }
        let i0 = init.i_fraction;
        let (lam0, fc0) = if i0 > 0.0 {
            (0..=steps)
                .map(|k| {
                    let t = k as f64 * dt;
                    (init.mean_infectivity(law, t), init.survival(law, t))
                })
                .unzip()
        } else {
            (vec![0.0; steps + 1], vec![0.0; steps + 1])
        };
        Renewal {
            i0,
            lc,
            fc,
            lam0,
            fc0,
        }
    }

    /// F̄ and Ī at grid point `n` from the incidence masses `b[0..n]`.
    pub fn evaluate(&self, n: usize, b: &[f64]) -> (f64, f64) {
        let mut f = self.i0 * self.lam0[n];
        let mut i = self.i0 * self.fc0[n];
        for (j, bj) in b[..n].iter().enumerate() {
            f += bj * self.lc[n - j];
            i += bj * self.fc[n - j];
        }
        (f, i)
    }
}

/// Trapezoid incidence mass on a cell, given that S̄ at the right end is
/// `rest + mass·c` (linear in the unknown mass through same-cell returns).
pub(crate) fn incidence(y: f64, dt: f64, x_left: f64, x_rest: f64, c: f64) -> f64 {
    y * dt * (x_left + x_rest) / (2.0 - y * dt * c)
}

/// `(1 − e^{−a})/a`, the mean of `e^{−a u}` for `u` uniform on (0, 1).
pub(crate) fn phi(a: f64) -> f64 {
    if a.abs() < 1e-8 {
        1.0 - 0.5 * a
    } else {
        -(-a).exp_m1() / a
    }
}

pub(crate) fn check_residual(time: f64, residual: f64, ceiling: f64) -> Result<()> {
    if residual > ceiling || residual.is_nan() {
        return Err(Error::Divergence {
            time,
            residual,
            ceiling,
        });
    }
    Ok(())
}

/// Solves the limit system on `[0, horizon]`.
pub fn solve_limit(law: &KernelLaw, init: &InitialLaw, cfg: &LimitConfig) -> Result<LimitSolution> {
    law.validate("kernel")?;
    init.validate(law, "initial")?;
    let steps = step_count(cfg.horizon, cfg.dt)?;
    if !(cfg.residual_ceiling > 0.0) {
        return Err(config_err("residual_ceiling", "must be positive"));
    }
    let form = match cfg.mode {
        ExpectationMode::Auto => law.indicator_form(),
        ExpectationMode::MonteCarlo => None,
    };
    match form {
        Some(form) => exact::solve(law, init, &form, cfg, steps),
        None => {
            if cfg.samples == 0 {
                return Err(config_err("samples", "must be at least 1"));
            }
            let need = cfg.samples as u64 * steps as u64;
            if need > cfg.memory_budget {
                return Err(config_err(
                    "samples",
                    format!(
                        "{} samples x {steps} steps = {need} exceeds the memory budget {}",
                        cfg.samples, cfg.memory_budget
                    ),
                ));
            }
            sampled::solve(law, init, cfg, steps)
        }
    }
}

/// Largest conservation residual of a solved grid.
pub fn conservation_check(grid: &TrajectoryGrid) -> f64 {
    grid.max_residual().unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_is_smooth_at_zero() {
        assert_eq!(phi(0.0), 1.0);
        assert!((phi(1e-9) - phi(2e-8)).abs() < 1e-8);
        assert!((phi(1.0) - (1.0 - (-1f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn renewal_kernels_average_the_right_functions() {
        let law = KernelLaw::markov_sis(2.0, 1.0);
        let r = Renewal::new(&law, &InitialLaw::new(0.5), 0.1, 10);
        // mean of 2e^{-t} over (0.1, 0.2]
        let want = 2.0 * ((-0.1f64).exp() - (-0.2f64).exp()) / 0.1;
        assert!((r.lc[2] - want).abs() < 1e-12);
        assert!((r.lc[2] - 2.0 * r.fc[2]).abs() < 1e-12);
        assert!((r.lam0[3] - 2.0 * (-0.3f64).exp()).abs() < 1e-12);
    }
}
