//! Exact expectations for γ = γ*·1{t ≥ ζ}, ζ = η + delay.
//!
//! Mass that has been infected but whose γ is still 0 waits in `waiting`.
//! Once γ turns on with level g it joins pool `z[g]`, whose total is
//! `Σ e^{−g∫F̄}` over its members and so decays at rate g·F̄.

use super::{check_residual, incidence, phi, LimitConfig, LimitSolution, Renewal, SolverPath};
use crate::error::Result;
use crate::grid::TrajectoryGrid;
use crate::kernel::{Duration, Family, IndicatorForm, InitialLaw, KernelLaw};

/// Number of probability bins used to integrate over a random delay.
const DELAY_NODES: usize = 512;

/// Nodes preserving each bin's conditional mean: `x_i = E[X | X in bin i]`.
fn conditional_mean_nodes(d: &Duration, bins: usize) -> Vec<f64> {
    if let Duration::Fixed { value } = d {
        return vec![*value];
    }
    let partial = |t: f64| {
        // ∫_0^t r dF(r) = IS(t) − t·F^c(t)
        if t.is_infinite() {
            d.mean()
        } else {
            d.integrated_survival(t) - t * d.survival(t)
        }
    };
    let k = bins as f64;
    (0..bins)
        .map(|i| {
            let a = d.quantile(i as f64 / k);
            let b = if i + 1 == bins {
                f64::INFINITY
            } else {
                d.quantile((i + 1) as f64 / k)
            };
            k * (partial(b) - partial(a))
        })
        .collect()
}

/// `∫_0^v P(X ≤ r) dr`.
fn integrated_cdf(d: &Duration, v: f64) -> f64 {
    if v <= 0.0 {
        0.0
    } else {
        v - d.integrated_survival(v)
    }
}

/// Entry kernel: `kernel[d]` is the probability that mass infected uniformly
/// in one cell has γ switched on during the cell `d` steps later.
fn entry_kernel(form: &IndicatorForm, dt: f64, steps: usize) -> Vec<f64> {
    let Some(delay) = &form.delay else {
        return vec![0.0; steps + 1];
    };
    // ζ = η + delay; integrate over whichever part is fixed, else over the delay.
    let (nodes, exact) = match (&form.eta, delay) {
        (Duration::Fixed { value }, other) => (vec![*value], other),
        (eta, other) => (conditional_mean_nodes(other, DELAY_NODES), eta),
    };
    let icdf = |v: f64| nodes.iter().map(|z| integrated_cdf(exact, v - z)).sum::<f64>() / nodes.len() as f64;
    // psi[m] = mean of F_ζ over ((m−1)dt, m·dt]
    let mut psi = vec![0.0; steps + 2];
    let mut prev = 0.0;
    for (m, p) in psi.iter_mut().enumerate().skip(1) {
        let cur = icdf(m as f64 * dt);
        *p = (cur - prev) / dt;
        prev = cur;
    }
    (0..=steps).map(|d| psi[d + 1] - psi[d]).collect()
}

/// P(γ switched on by time t) for the initially infected.
fn initial_entry(
    form: &IndicatorForm,
    law: &KernelLaw,
    init: &InitialLaw,
    dt: f64,
    steps: usize,
) -> Vec<f64> {
    let Some(delay) = &form.delay else {
        return vec![0.0; steps + 1];
    };
    if init.i_fraction == 0.0 {
        return vec![0.0; steps + 1];
    }
    let nodes = conditional_mean_nodes(delay, DELAY_NODES);
    (0..=steps)
        .map(|k| {
            let t = k as f64 * dt;
            let s: f64 = nodes
                .iter()
                .filter(|z| **z <= t)
                .map(|z| 1.0 - init.survival(law, t - z))
                .sum();
            s / nodes.len() as f64
        })
        .collect()
}

/// P(γ switched on by time t) for the initially recovered.
fn recovered_entry(law: &KernelLaw, init: &InitialLaw, dt: f64, steps: usize) -> Vec<f64> {
    let (Some(r), Family::Custom { gamma_shape, .. }) = (&init.recovered, &law.family) else {
        return vec![0.0; steps + 1];
    };
    let Some(z) = gamma_shape.first_positive() else {
        return vec![0.0; steps + 1];
    };
    (0..=steps)
        .map(|k| r.recovery_age.prob_at_least(z - k as f64 * dt))
        .collect()
}

pub(super) fn solve(
    law: &KernelLaw,
    init: &InitialLaw,
    form: &IndicatorForm,
    cfg: &LimitConfig,
    steps: usize,
) -> Result<LimitSolution> {
    let dt = cfg.dt;
    let renewal = Renewal::new(law, init, dt, steps);
    let kernel = entry_kernel(form, dt, steps);
    let init_entry = initial_entry(form, law, init, dt, steps);
    let rec_entry = recovered_entry(law, init, dt, steps);
    let i0 = init.i_fraction;
    let r0 = init.r_fraction();

    let levels: Vec<f64> = form.atoms.iter().map(|a| a.value).collect();
    let weights: Vec<f64> = form.atoms.iter().map(|a| a.weight).collect();
    let mean_gamma_star: f64 = form.atoms.iter().map(|a| a.value * a.weight).sum();

    let mut z: Vec<f64> = weights.iter().map(|w| w * r0 * rec_entry[0]).collect();
    let mut zs = init.s_fraction();
    let mut waiting = i0 + r0 * (1.0 - rec_entry[0]);

    let mut grid = TrajectoryGrid::with_steps(dt, steps);
    let mut residual = vec![0.0; steps + 1];
    let mut b = Vec::with_capacity(steps);

    let x0 = zs + levels.iter().zip(&z).map(|(g, zi)| g * zi).sum::<f64>();
    let (f0, ibar0) = renewal.evaluate(0, &b);
    let lhs0 = waiting + zs + z.iter().sum::<f64>();
    grid.f_bar[0] = f0;
    grid.s_bar[0] = x0;
    grid.i_bar[0] = ibar0;
    grid.u_bar[0] = lhs0 - ibar0;
    residual[0] = (lhs0 - 1.0).abs();

    let mut decay = vec![0.0; levels.len()];
    let mut phis = vec![0.0; levels.len()];
    for k in 0..steps {
        let y = grid.f_bar[k];
        let x_left = grid.s_bar[k];
        for (i, g) in levels.iter().enumerate() {
            let a = g * y * dt;
            decay[i] = (-a).exp();
            phis[i] = phi(a);
        }
        let mut entries: f64 = b.iter().enumerate().map(|(j, bj)| bj * kernel[k - j]).sum();
        entries += i0 * (init_entry[k + 1] - init_entry[k]) + r0 * (rec_entry[k + 1] - rec_entry[k]);
        for i in 0..levels.len() {
            z[i] = z[i] * decay[i] + weights[i] * entries * phis[i];
        }
        zs *= (-y * dt).exp();
        let x_rest = zs + levels.iter().zip(&z).map(|(g, zi)| g * zi).sum::<f64>();
        let c = kernel[0]
            * (0..levels.len())
                .map(|i| levels[i] * weights[i] * phis[i])
                .sum::<f64>();
        let bk = incidence(y, dt, x_left, x_rest, c);
        for i in 0..levels.len() {
            z[i] += weights[i] * bk * kernel[0] * phis[i];
        }
        b.push(bk);
        waiting += bk - entries - bk * kernel[0];

        let n = k + 1;
        let (f, ibar) = renewal.evaluate(n, &b);
        let lhs = waiting + zs + z.iter().sum::<f64>();
        grid.f_bar[n] = f;
        grid.s_bar[n] = x_rest + bk * c;
        grid.i_bar[n] = ibar;
        grid.u_bar[n] = lhs - ibar;
        residual[n] = (lhs - 1.0).abs();
        check_residual(n as f64 * dt, residual[n], cfg.residual_ceiling)?;
    }
    let s_star_truncated = grid.s_bar[steps] + mean_gamma_star * waiting;
    grid.conservation_residual = Some(residual);
    Ok(LimitSolution {
        grid,
        path: SolverPath::Exact,
        s_star_truncated,
    })
}
