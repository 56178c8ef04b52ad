//! Reproduction number, harmonic threshold and endemic equilibrium.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::TrajectoryGrid;
use crate::kernel::{Family, KernelLaw, KernelPath};
use crate::lln::LimitSolution;
use crate::rng::{stream, Tag};

/// `∫_0^∞ exp(−x·Γ(s)) ds` for γ given as `(length, level)` pieces followed by
/// a final level that holds forever. Γ is the running integral of γ.
fn exp_cumulative_integral(pieces: impl IntoIterator<Item = (f64, f64)>, last: f64, x: f64) -> f64 {
    let mut total = 0.0;
    let mut big_gamma = 0.0;
    for (len, g) in pieces {
        let a = x * g;
        let w = (-x * big_gamma).exp();
        total += if a > 0.0 { w * -(-a * len).exp_m1() / a } else { w * len };
        big_gamma += g * len;
    }
    let a = x * last;
    if a > 0.0 {
        total + (-x * big_gamma).exp() / a
    } else {
        f64::INFINITY
    }
}

/// `∫_0^∞ exp(−x ∫_0^s γ) ds` for one realized path.
pub fn path_exp_integral(path: &KernelPath, x: f64) -> f64 {
    let n = path.num_segments();
    let pieces = (0..n - 1).map(|i| (path.segment_end(i) - path.breakpoints()[i], path.gamma_in(i)));
    exp_cumulative_integral(pieces, path.gamma_star(), x)
}

/// H(x) = x ∫_0^∞ E[exp(−x ∫_0^s γ(r) dr)] ds, with H(0) = E[1/γ*].
pub fn evaluate_h(law: &KernelLaw, x: f64) -> f64 {
    if x <= 0.0 {
        return law.e_inv_gamma_star();
    }
    if let Some(form) = law.indicator_form() {
        return match form.delay {
            None => f64::INFINITY,
            Some(_) => {
                let inv: f64 = form
                    .atoms
                    .iter()
                    .map(|a| a.weight / a.value)
                    .sum();
                x * law.e_zeta() + inv
            }
        };
    }
    match &law.family {
        Family::GradualGamma {
            gamma_star,
            ramp,
            steps,
            ..
        } => {
            let n = *steps as f64;
            let ramp_part: f64 = gamma_star
                .atoms()
                .iter()
                .map(|a| {
                    let pieces = (0..steps - 1).map(|k| (ramp / n, a.value * (k as f64 + 1.0) / n));
                    a.weight * exp_cumulative_integral(pieces, a.value, x)
                })
                .sum();
            x * (law.e_zeta() + ramp_part)
        }
        Family::Custom { gamma_shape, .. } => {
            let pieces: Vec<_> = gamma_shape
                .pieces(0.0, f64::INFINITY)
                .filter(|p| p.1.is_finite())
                .map(|(lo, hi, v)| (hi - lo, v))
                .collect();
            x * (law.eta_law().mean() + exp_cumulative_integral(pieces, gamma_shape.last(), x))
        }
        _ => unreachable!("indicator families handled above"),
    }
}

/// Monte Carlo estimate of H(x) with standard error, from `samples` sampled paths.
pub fn evaluate_h_mc(law: &KernelLaw, x: f64, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = stream(seed, Tag::LawMonteCarlo, 1, x.to_bits());
    let mut sum = 0.0;
    let mut sq = 0.0;
    for _ in 0..samples {
        let v = x * path_exp_integral(&law.sample(&mut rng), x);
        sum += v;
        sq += v * v;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = (sq / m - mean * mean).max(0.0) * m / (m - 1.0).max(1.0);
    (mean, (var / m).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    DiseaseFree,
    Critical,
    Endemic,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverDiagnostics {
    pub bracket: [f64; 2],
    pub iterations: u32,
    /// H(F_star) − R₀.
    pub residual: f64,
}

/// Candidate equilibrium of the limit system. Non-finite numbers serialize as `null`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumReport {
    #[serde(rename = "R0")]
    pub r0: f64,
    #[serde(rename = "E_inv_gamma_star")]
    pub e_inv_gamma_star: f64,
    pub regime: Regime,
    /// 1/R₀ when endemic; depends on the initial condition otherwise (`None`).
    #[serde(rename = "S_star")]
    pub s_star: Option<f64>,
    #[serde(rename = "F_star")]
    pub f_star: f64,
    #[serde(rename = "I_star")]
    pub i_star: f64,
    pub solver_diagnostics: SolverDiagnostics,
    /// (R₀ − E[1/γ*])/E[ζ] when γ has the indicator form.
    #[serde(skip)]
    pub closed_form_f_star: Option<f64>,
}

pub fn classify(r0: f64, e_inv: f64) -> Regime {
    if e_inv.is_finite() && (r0 - e_inv).abs() <= 1e-9 * r0.max(1.0) {
        Regime::Critical
    } else if r0 < e_inv {
        Regime::DiseaseFree
    } else {
        Regime::Endemic
    }
}

/// Finds the root of H(x) = R₀ by bracketed bisection.
pub fn solve_endemic(law: &KernelLaw) -> Result<EquilibriumReport> {
    let r0 = law.r0();
    if !r0.is_finite() {
        return Err(Error::Unsupported("R0 is infinite; no equilibrium analysis".into()));
    }
    let e_inv = law.e_inv_gamma_star();
    let regime = classify(r0, e_inv);
    let mut report = EquilibriumReport {
        r0,
        e_inv_gamma_star: e_inv,
        regime,
        s_star: None,
        f_star: 0.0,
        i_star: 0.0,
        solver_diagnostics: SolverDiagnostics {
            bracket: [0.0, 0.0],
            iterations: 0,
            residual: evaluate_h(law, 0.0) - r0,
        },
        closed_form_f_star: None,
    };
    if regime != Regime::Endemic {
        return Ok(report);
    }
    if !law.is_gamma_monotone() {
        return Err(Error::Unsupported(
            "endemic equilibrium requires non-decreasing susceptibility".into(),
        ));
    }
    let h = |x: f64| evaluate_h(law, x);
    let mut hi = 1.0;
    while h(hi) < r0 {
        hi *= 2.0;
        if hi > 1e15 {
            return Err(Error::Invariant("H does not reach R0; bracket search failed".into()));
        }
    }
    let mut lo = 0.0;
    let bracket = [lo, hi];
    let mut iterations = 0;
    while hi - lo > 1e-15 * hi && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < r0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let root = if (h(lo) - r0).abs() < (h(hi) - r0).abs() { lo } else { hi };
    let residual = h(root) - r0;
    if residual.abs() > 1e-8 * r0 {
        return Err(Error::Invariant(format!(
            "bisection stopped with |H - R0| = {:.3e}",
            residual.abs()
        )));
    }
    let e_eta = law.eta_law().mean();
    report.s_star = Some(1.0 / r0);
    report.f_star = root;
    report.i_star = e_eta * root / r0;
    report.solver_diagnostics = SolverDiagnostics {
        bracket,
        iterations,
        residual,
    };
    report.closed_form_f_star = law
        .indicator_form()
        .filter(|f| f.delay.is_some())
        .map(|_| (r0 - e_inv) / law.e_zeta());
    Ok(report)
}

/// Long-run mean susceptibility in the disease-free regime, with a bound on
/// the error from truncating the time integrals at the horizon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiseaseFreeLimit {
    pub s_star: f64,
    pub truncation_bound: f64,
}

/// `threshold` is the largest F̄(T) accepted as "decayed".
pub fn disease_free_limit_s(solution: &LimitSolution, threshold: f64) -> Result<DiseaseFreeLimit> {
    let g = &solution.grid;
    let last = g.last();
    let f_end = g.f_bar[last];
    if f_end == 0.0 {
        return Ok(DiseaseFreeLimit {
            s_star: solution.s_star_truncated,
            truncation_bound: 0.0,
        });
    }
    let too_short = || Error::HorizonTooShort {
        time: g.horizon(),
        f_bar: f_end,
    };
    if f_end > threshold {
        return Err(too_short());
    }
    // Decay rate over the last tenth of the horizon.
    let back = (last / 10).max(1);
    let span = back as f64 * g.dt;
    let rate = (g.f_bar[last - back] / f_end).ln() / span;
    if !(rate > 0.0) {
        return Err(too_short());
    }
    Ok(DiseaseFreeLimit {
        s_star: solution.s_star_truncated,
        truncation_bound: 2.0 * f_end / rate,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InstabilityCheck {
    pub applicable: bool,
    pub min_f_bar: f64,
    pub above_floor: bool,
}

/// Whether F̄ stays above `floor` over the whole grid (endemic regime only).
pub fn instability_check(grid: &TrajectoryGrid, report: &EquilibriumReport, floor: f64) -> InstabilityCheck {
    let min_f_bar = grid.min_f_bar();
    let applicable = report.regime == Regime::Endemic && grid.f_bar[0] > 0.0;
    InstabilityCheck {
        applicable,
        min_f_bar,
        above_floor: applicable && min_f_bar >= floor,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Atom, Duration, GammaStar, StepFunction};

    fn indicator(lambda: f64, gamma_star: GammaStar) -> KernelLaw {
        Family::IndicatorGamma {
            lambda,
            eta: Duration::exponential(1.0),
            delay: Duration::exponential(1.0),
            gamma_star,
        }
        .into()
    }

    #[test]
    fn h_at_zero_is_harmonic_threshold() {
        let law = indicator(
            3.0,
            GammaStar::Mixture(vec![
                Atom { value: 0.25, weight: 0.5 },
                Atom { value: 1.0, weight: 0.5 },
            ]),
        );
        assert_eq!(evaluate_h(&law, 0.0), 2.5);
    }

    #[test]
    fn constant_gamma_gives_flat_h() {
        let law: KernelLaw = Family::Custom {
            lambda_shape: StepFunction::constant(0.0),
            gamma_shape: StepFunction::constant(0.4),
            eta: Duration::fixed(0.0),
        }
        .into();
        let law = KernelLaw {
            lambda_star: Some(1.0),
            ..law
        };
        for x in [0.0, 0.1, 1.0, 10.0] {
            assert!((evaluate_h(&law, x) - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn path_integral_of_indicator_path() {
        let law: KernelLaw = Family::IndicatorGamma {
            lambda: 1.0,
            eta: Duration::fixed(1.0),
            delay: Duration::fixed(1.0),
            gamma_star: GammaStar::Constant(0.5),
        }
        .into();
        let p = law.sample(&mut stream(0, Tag::LawMonteCarlo, 0, 0));
        assert!((path_exp_integral(&p, 2.0) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn corollary_closed_form() {
        let law: KernelLaw = Family::IndicatorGamma {
            lambda: 3.0,
            eta: Duration::exponential(1.0),
            delay: Duration::exponential(1.0),
            gamma_star: GammaStar::Constant(0.5),
        }
        .into();
        let r = solve_endemic(&law).unwrap();
        assert_eq!(r.regime, Regime::Endemic);
        assert!((r.f_star - 0.5).abs() < 1e-12);
        assert!((r.i_star - 0.5 / 3.0).abs() < 1e-12);
        assert!((r.closed_form_f_star.unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn markov_sis_equilibrium() {
        let r = solve_endemic(&KernelLaw::markov_sis(2.0, 1.0)).unwrap();
        assert!((r.i_star - 0.5).abs() < 1e-12);
        assert_eq!(r.s_star, Some(0.5));
    }

    #[test]
    fn subcritical_law_is_disease_free() {
        let r = solve_endemic(&KernelLaw::markov_sis(0.8, 1.0)).unwrap();
        assert_eq!(r.regime, Regime::DiseaseFree);
        assert_eq!((r.f_star, r.i_star), (0.0, 0.0));
        let c = solve_endemic(&KernelLaw::markov_sis(1.0, 1.0)).unwrap();
        assert_eq!(c.regime, Regime::Critical);
        assert_eq!(c.f_star, 0.0);
    }

    #[test]
    fn sir_is_disease_free_with_infinite_threshold() {
        let law: KernelLaw = Family::Sir {
            lambda: 3.0,
            eta: Duration::exponential(1.0),
        }
        .into();
        let r = solve_endemic(&law).unwrap();
        assert_eq!(r.regime, Regime::DiseaseFree);
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["E_inv_gamma_star"].is_null());
    }

    #[test]
    fn gradual_law_h_matches_monte_carlo() {
        let law: KernelLaw = Family::GradualGamma {
            lambda: 2.0,
            eta: Duration::exponential(1.0),
            delay: Duration::Uniform { low: 0.0, high: 2.0 },
            gamma_star: GammaStar::Mixture(vec![
                Atom { value: 0.5, weight: 0.3 },
                Atom { value: 1.0, weight: 0.7 },
            ]),
            ramp: 1.5,
            steps: 3,
        }
        .into();
        for x in [0.2, 1.0, 3.0] {
            let exact = evaluate_h(&law, x);
            let (mc, se) = evaluate_h_mc(&law, x, 40_000, 11);
            assert!((exact - mc).abs() < 4.0 * se, "x={x}: {exact} vs {mc} ± {se}");
        }
    }
}
