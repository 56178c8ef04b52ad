//! Fixed-point check through independent single-individual processes.
//!
//! Each auxiliary individual is infected at rate γ(age)·m(t), where `m` is
//! the solver's F̄ held constant on each grid cell. If F̄ solves the limit
//! system, the mean infectivity of these individuals reproduces it.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{config_err, Result};
use crate::grid::TrajectoryGrid;
use crate::kernel::{InitialLaw, KernelLaw};
use crate::rng::{exp1, stream, Tag};

#[derive(Clone, Debug, PartialEq)]
pub struct AuxiliaryConfig {
    pub individuals: usize,
    pub seed: u64,
    /// Compare at every `stride`-th grid point.
    pub stride: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuxiliaryReport {
    pub times: Vec<f64>,
    pub estimate: Vec<f64>,
    pub std_error: Vec<f64>,
    pub z: Vec<f64>,
    /// Fraction of compared points with |z| ≤ 3.
    pub coverage: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

const CHUNK: usize = 256;

fn simulate_chunk(
    law: &KernelLaw,
    init: &InitialLaw,
    f_bar: &[f64],
    dt: f64,
    points: &[usize],
    seed: u64,
    range: std::ops::Range<usize>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut sum = vec![0.0; points.len()];
    let mut sq = vec![0.0; points.len()];
    let cells = f_bar.len() - 1;
    let rate = f_bar.iter().copied().fold(0.0, f64::max);
    for i in range {
        let mut rng = stream(seed, Tag::Auxiliary, i as u64, 0);
        let mut path = init.sample(law, &mut rng)?;
        let mut last = 0.0;
        let mut cand = if rate > 0.0 { exp1(&mut rng) / rate } else { f64::INFINITY };
        for (p, &k) in points.iter().enumerate() {
            let t = k as f64 * dt;
            while cand < t {
                let m = f_bar[((cand / dt) as usize).min(cells - 1)];
                let g = path.gamma_at(cand - last);
                if rng.random::<f64>() * rate < g * m {
                    path = law.sample(&mut rng);
                    last = cand;
                }
                cand += exp1(&mut rng) / rate;
            }
            let v = path.lambda_at(t - last);
            sum[p] += v;
            sq[p] += v * v;
        }
    }
    Ok((sum, sq))
}

pub fn auxiliary_check(
    grid: &TrajectoryGrid,
    law: &KernelLaw,
    init: &InitialLaw,
    cfg: &AuxiliaryConfig,
) -> Result<AuxiliaryReport> {
    if cfg.individuals < 2 {
        return Err(config_err("auxiliary.individuals", "need at least 2 individuals"));
    }
    if cfg.stride == 0 {
        return Err(config_err("auxiliary.stride", "must be at least 1"));
    }
    let points: Vec<usize> = (0..grid.len()).step_by(cfg.stride).collect();
    let chunks: Vec<_> = (0..cfg.individuals.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let range = c * CHUNK..((c + 1) * CHUNK).min(cfg.individuals);
            simulate_chunk(law, init, &grid.f_bar, grid.dt, &points, cfg.seed, range)
        })
        .collect::<Result<_>>()?;
    let mut sum = vec![0.0; points.len()];
    let mut sq = vec![0.0; points.len()];
    for (s, q) in chunks {
        for p in 0..points.len() {
            sum[p] += s[p];
            sq[p] += q[p];
        }
    }
    let k = cfg.individuals as f64;
    let mut report = AuxiliaryReport {
        times: points.iter().map(|&p| grid.time(p)).collect(),
        estimate: Vec::with_capacity(points.len()),
        std_error: Vec::with_capacity(points.len()),
        z: Vec::with_capacity(points.len()),
        coverage: 0.0,
        warning: (cfg.individuals < 1000).then(|| {
            format!(
                "{} auxiliary individuals give unreliable 3-standard-error coverage",
                cfg.individuals
            )
        }),
    };
    let mut covered = 0;
    for (p, &idx) in points.iter().enumerate() {
        let mean = sum[p] / k;
        let var = (sq[p] / k - mean * mean).max(0.0) * k / (k - 1.0);
        let se = (var / k).sqrt();
        let diff = mean - grid.f_bar[idx];
        let z = if se > 0.0 {
            diff / se
        } else if diff.abs() <= 1e-12 {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        };
        covered += usize::from(z.abs() <= 3.0);
        report.estimate.push(mean);
        report.std_error.push(se);
        report.z.push(z);
    }
    report.coverage = covered as f64 / points.len() as f64;
    Ok(report)
}
