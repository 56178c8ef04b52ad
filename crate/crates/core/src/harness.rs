//! Multi-run experiments: agent-based sweeps against the limit.

use rayon::prelude::*;
use serde::Serialize;

use crate::abm::{simulate, RunConfig};
use crate::error::{config_err, Result};
use crate::grid::{coupling_distance, Distance, TrajectoryGrid};
use crate::lln::solve_limit;
use crate::rng::{derive_key, Tag};
use crate::scenario::Scenario;

/// Seed of replication `r` at population size `n`.
pub fn replication_seed(seed: u64, n: usize, r: usize) -> u64 {
    derive_key(seed, Tag::Replication, n as u64, r as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    pub replications: usize,
    #[serde(rename = "mean_error_F")]
    pub mean_error_f: Vec<f64>,
    #[serde(rename = "mean_error_I")]
    pub mean_error_i: Vec<f64>,
    /// Least-squares slope of log mean_error_F against log N; `None` when
    /// every error is zero.
    pub slope: Option<f64>,
    #[serde(rename = "slope_I")]
    pub slope_i: Option<f64>,
    pub band: [f64; 2],
    pub pass: bool,
}

/// Least-squares slope of `log y` against `log x`. `None` if some `y` is zero.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if y.iter().any(|&v| v <= 0.0) || x.len() < 2 {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Some(sxy / sxx)
}

/// Runs the limit solver once and `replications` simulations per population
/// size, and fits the decay of the mean sup-norm error.
pub fn converge(scn: &Scenario, seed_offset: u64) -> Result<ConvergenceReport> {
    let mut ns = scn.populations.clone();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 3 {
        return Err(config_err("populations", "needs at least 3 distinct sizes"));
    }
    if (ns[ns.len() - 1] as f64) < 100.0 * ns[0] as f64 {
        return Err(config_err("populations", "must span at least two decades"));
    }
    if scn.replications < 10 {
        return Err(config_err("replications", "needs at least 10 replications"));
    }
    let limit = solve_limit(&scn.kernel, &scn.initial, &scn.limit_config(seed_offset))?;
    let reference: TrajectoryGrid = limit.grid.coarsen(scn.sample_stride()?)?;
    let run = RunConfig {
        horizon: scn.horizon,
        dt: scn.sample_dt(),
        event_limit: 0,
    };
    let seed = scn.seed.wrapping_add(seed_offset);
    let jobs: Vec<(usize, usize)> = ns
        .iter()
        .flat_map(|&n| (0..scn.replications).map(move |r| (n, r)))
        .collect();
    let errors: Vec<Distance> = jobs
        .par_iter()
        .map(|&(n, r)| {
            let (grid, _) = simulate(n, &scn.kernel, &scn.initial, replication_seed(seed, n, r), &run)?;
            coupling_distance(&grid, &reference)
        })
        .collect::<Result<_>>()?;
    let reps = scn.replications as f64;
    let mean = |k: usize, pick: fn(&Distance) -> f64| -> f64 {
        errors[k * scn.replications..(k + 1) * scn.replications].iter().map(pick).sum::<f64>() / reps
    };
    let mean_error_f: Vec<f64> = (0..ns.len()).map(|k| mean(k, |d| d.f_bar)).collect();
    let mean_error_i: Vec<f64> = (0..ns.len()).map(|k| mean(k, |d| d.i_bar)).collect();
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let slope = log_log_slope(&xs, &mean_error_f);
    let slope_i = log_log_slope(&xs, &mean_error_i);
    let band = scn.tolerances.slope_band;
    let all_zero = mean_error_f.iter().chain(&mean_error_i).all(|&e| e == 0.0);
    let pass = all_zero || slope.is_some_and(|s| band[0] <= s && s <= band[1]);
    Ok(ConvergenceReport {
        n: ns,
        replications: scn.replications,
        mean_error_f,
        mean_error_i,
        slope,
        slope_i,
        band,
        pass,
    })
}
