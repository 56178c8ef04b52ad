use rand::Rng;
use serde::{Deserialize, Serialize};

use super::duration::Duration;
use super::path::{KernelPath, PathBuilder};
use super::step::StepFunction;
use crate::error::{config_err, Result};
use crate::rng::{stream, Tag};

/// One atom of a discrete law for γ*.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub value: f64,
    pub weight: f64,
}

/// Law of the long-run susceptibility γ*: a constant or a finite mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaStar {
    Constant(f64),
    Mixture(Vec<Atom>),
}

impl GammaStar {
    pub fn atoms(&self) -> Vec<Atom> {
        match self {
            GammaStar::Constant(v) => vec![Atom {
                value: *v,
                weight: 1.0,
            }],
            GammaStar::Mixture(a) => a.clone(),
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        let atoms = self.atoms();
        if atoms.is_empty() {
            return Err(config_err(field, "mixture needs at least one atom"));
        }
        for (i, a) in atoms.iter().enumerate() {
            if !(a.value > 0.0 && a.value <= 1.0) {
                let f = match self {
                    GammaStar::Constant(_) => field.to_string(),
                    GammaStar::Mixture(_) => format!("{field}[{i}].value"),
                };
                return Err(config_err(f, format!("γ* = {} must lie in (0, 1]", a.value)));
            }
            if !(a.weight > 0.0 && a.weight.is_finite()) {
                return Err(config_err(format!("{field}[{i}].weight"), "must be positive"));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(config_err(field, format!("weights sum to {total}, expected 1")));
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            GammaStar::Constant(v) => *v,
            GammaStar::Mixture(atoms) => {
                let mut u: f64 = rng.random();
                for a in atoms {
                    if u < a.weight {
                        return a.value;
                    }
                    u -= a.weight;
                }
                atoms.last().unwrap().value
            }
        }
    }
}

/// Kernel families. Every family has λ(t) = level(t)·1{t < η}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// λ·1{t<η}, γ = 1{t≥η}, η ~ Exp(β).
    MarkovSis { lambda: f64, beta: f64 },
    /// λ·1{t<η}, γ = 1{t≥η}.
    GeneralSis { lambda: f64, eta: Duration },
    /// λ·1{t<η}, γ ≡ 0.
    Sir { lambda: f64, eta: Duration },
    /// λ·1{t<η}, γ = 1{t≥η+θ}.
    Sirs {
        lambda: f64,
        eta: Duration,
        theta: Duration,
    },
    /// λ·1{t<η}, γ = γ*·1{t≥η+θ} with γ* independent of (η, θ).
    IndicatorGamma {
        lambda: f64,
        eta: Duration,
        delay: Duration,
        gamma_star: GammaStar,
    },
    /// Like `IndicatorGamma` but γ climbs to γ* in `steps` equal steps over `ramp` time units.
    GradualGamma {
        lambda: f64,
        eta: Duration,
        delay: Duration,
        gamma_star: GammaStar,
        ramp: f64,
        steps: u32,
    },
    /// λ(t) = λ̃(t)·1{t<η}, γ(t) = γ̃(t−η)·1{t>η} for deterministic shapes λ̃, γ̃.
    Custom {
        lambda_shape: StepFunction,
        gamma_shape: StepFunction,
        eta: Duration,
    },
}

/// γ = γ*·1{t ≥ η + delay}: the structure the limit solver can integrate exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorForm {
    pub eta: Duration,
    /// `None` when γ ≡ 0 after infection (no reinfection).
    pub delay: Option<Duration>,
    pub atoms: Vec<Atom>,
}

/// Summary numbers of a kernel law.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LawStatistics {
    #[serde(rename = "R0")]
    pub r0: f64,
    #[serde(rename = "E_inv_gamma_star")]
    pub e_inv_gamma_star: f64,
    #[serde(rename = "E_eta")]
    pub e_eta: f64,
    #[serde(rename = "E_zeta")]
    pub e_zeta: f64,
    pub gamma_star_support: Vec<f64>,
}

fn default_mc_budget() -> usize {
    500
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelLaw {
    #[serde(flatten)]
    pub family: Family,
    /// Global bound λ*; defaults to the largest infectivity level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_star: Option<f64>,
    /// Sample count for expectations computed by Monte Carlo.
    #[serde(default = "default_mc_budget")]
    pub mc_budget: usize,
}

impl From<Family> for KernelLaw {
    fn from(family: Family) -> Self {
        KernelLaw {
            family,
            lambda_star: None,
            mc_budget: default_mc_budget(),
        }
    }
}

fn check_level(field: String, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(config_err(field, "must be non-negative and finite"))
    }
}

impl KernelLaw {
    pub fn markov_sis(lambda: f64, beta: f64) -> Self {
        Family::MarkovSis { lambda, beta }.into()
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        let f = |name: &str| format!("{field}.{name}");
        match &self.family {
            Family::MarkovSis { lambda, beta } => {
                check_level(f("lambda"), *lambda)?;
                Duration::exponential(*beta).validate(&f("beta"))?;
            }
            Family::GeneralSis { lambda, eta } | Family::Sir { lambda, eta } => {
                check_level(f("lambda"), *lambda)?;
                eta.validate(&f("eta"))?;
            }
            Family::Sirs { lambda, eta, theta } => {
                check_level(f("lambda"), *lambda)?;
                eta.validate(&f("eta"))?;
                theta.validate(&f("theta"))?;
            }
            Family::IndicatorGamma {
                lambda,
                eta,
                delay,
                gamma_star,
            } => {
                check_level(f("lambda"), *lambda)?;
                eta.validate(&f("eta"))?;
                delay.validate(&f("delay"))?;
                gamma_star.validate(&f("gamma_star"))?;
            }
            Family::GradualGamma {
                lambda,
                eta,
                delay,
                gamma_star,
                ramp,
                steps,
            } => {
                check_level(f("lambda"), *lambda)?;
                eta.validate(&f("eta"))?;
                delay.validate(&f("delay"))?;
                gamma_star.validate(&f("gamma_star"))?;
                if !(ramp.is_finite() && *ramp > 0.0) {
                    return Err(config_err(f("ramp"), "must be positive and finite"));
                }
                if *steps == 0 {
                    return Err(config_err(f("steps"), "must be at least 1"));
                }
            }
            Family::Custom {
                lambda_shape,
                gamma_shape,
                eta,
            } => {
                lambda_shape.validate(&f("lambda_shape"), 0.0, f64::MAX)?;
                gamma_shape.validate(&f("gamma_shape"), 0.0, 1.0)?;
                eta.validate(&f("eta"))?;
            }
        }
        if let Some(ls) = self.lambda_star {
            if !(ls.is_finite() && ls > 0.0) {
                return Err(config_err(f("lambda_star"), "must be positive and finite"));
            }
            if ls < self.max_level() {
                return Err(config_err(
                    f("lambda_star"),
                    format!("{ls} is below the largest infectivity level {}", self.max_level()),
                ));
            }
        } else if self.max_level() <= 0.0 {
            return Err(config_err(f("lambda_star"), "required when every infectivity level is 0"));
        }
        if self.mc_budget == 0 {
            return Err(config_err(f("mc_budget"), "must be at least 1"));
        }
        Ok(())
    }

    /// Largest infectivity level any path can reach.
    pub fn max_level(&self) -> f64 {
        match &self.family {
            Family::MarkovSis { lambda, .. }
            | Family::GeneralSis { lambda, .. }
            | Family::Sir { lambda, .. }
            | Family::Sirs { lambda, .. }
            | Family::IndicatorGamma { lambda, .. }
            | Family::GradualGamma { lambda, .. } => *lambda,
            Family::Custom { lambda_shape, .. } => lambda_shape.max(),
        }
    }

    pub fn lambda_star(&self) -> f64 {
        self.lambda_star.unwrap_or_else(|| self.max_level())
    }

    /// Law of the infectious duration η.
    pub fn eta_law(&self) -> Duration {
        match &self.family {
            Family::MarkovSis { beta, .. } => Duration::exponential(*beta),
            Family::GeneralSis { eta, .. }
            | Family::Sir { eta, .. }
            | Family::Sirs { eta, .. }
            | Family::IndicatorGamma { eta, .. }
            | Family::GradualGamma { eta, .. }
            | Family::Custom { eta, .. } => eta.clone(),
        }
    }

    /// Infectivity level at age `t` while still infectious.
    pub fn level(&self, t: f64) -> f64 {
        match &self.family {
            Family::Custom { lambda_shape, .. } => lambda_shape.value(t),
            _ => self.max_level(),
        }
    }

    fn level_pieces(&self, a: f64, b: f64) -> Vec<(f64, f64, f64)> {
        match &self.family {
            Family::Custom { lambda_shape, .. } => lambda_shape.pieces(a, b).collect(),
            _ if b > a => vec![(a, b, self.max_level())],
            _ => vec![],
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> KernelPath {
        let eta = self.eta_law().sample(rng);
        self.sample_given_eta(eta, rng)
    }

    /// Samples the rest of a path once the infectious duration is known.
    pub fn sample_given_eta<R: Rng + ?Sized>(&self, eta: f64, rng: &mut R) -> KernelPath {
        let mut b = PathBuilder::new().keep_break_at(eta);
        match &self.family {
            Family::MarkovSis { lambda, .. } | Family::GeneralSis { lambda, .. } => {
                b.push(0.0, *lambda, 0.0);
                b.push(eta, 0.0, 1.0);
                b.finish(eta, eta)
            }
            Family::Sir { lambda, .. } => {
                b.push(0.0, *lambda, 0.0);
                b.push(eta, 0.0, 0.0);
                b.finish(eta, f64::INFINITY)
            }
            Family::Sirs { lambda, theta, .. } => {
                let zeta = eta + theta.sample(rng);
                b.push(0.0, *lambda, 0.0);
                b.push(eta, 0.0, 0.0);
                b.push(zeta, 0.0, 1.0);
                b.finish(eta, zeta)
            }
            Family::IndicatorGamma {
                lambda,
                delay,
                gamma_star,
                ..
            } => {
                let zeta = eta + delay.sample(rng);
                let g = gamma_star.sample(rng);
                b.push(0.0, *lambda, 0.0);
                b.push(eta, 0.0, 0.0);
                b.push(zeta, 0.0, g);
                b.finish(eta, zeta)
            }
            Family::GradualGamma {
                lambda,
                delay,
                gamma_star,
                ramp,
                steps,
                ..
            } => {
                let zeta = eta + delay.sample(rng);
                let g = gamma_star.sample(rng);
                b.push(0.0, *lambda, 0.0);
                b.push(eta, 0.0, 0.0);
                let n = *steps as f64;
                for k in 0..*steps {
                    let kf = k as f64;
                    b.push(zeta + kf * ramp / n, 0.0, g * (kf + 1.0) / n);
                }
                b.finish(eta, zeta)
            }
            Family::Custom {
                lambda_shape,
                gamma_shape,
                ..
            } => {
                for (lo, _, v) in lambda_shape.pieces(0.0, eta) {
                    b.push(lo, v, 0.0);
                }
                if eta == 0.0 {
                    b.push(0.0, 0.0, 0.0);
                }
                for (lo, _, v) in gamma_shape.pieces(0.0, f64::INFINITY) {
                    b.push(eta + lo, 0.0, v);
                }
                let zeta = gamma_shape
                    .first_positive()
                    .map_or(f64::INFINITY, |z| eta + z);
                b.finish(eta, zeta)
            }
        }
    }

    /// F^c(t) = P(η > t).
    pub fn survival(&self, t: f64) -> f64 {
        self.eta_law().survival(t)
    }

    /// λ̄(t) = E[λ(t)].
    pub fn mean_infectivity(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        self.level(t) * self.survival(t)
    }

    /// `∫_a^b λ̄(t) dt`, exact.
    pub fn mean_infectivity_integral(&self, a: f64, b: f64) -> f64 {
        let eta = self.eta_law();
        let a = a.max(0.0);
        self.level_pieces(a, b)
            .into_iter()
            .map(|(lo, hi, v)| {
                if v == 0.0 {
                    0.0
                } else {
                    v * (eta.integrated_survival(hi) - eta.integrated_survival(lo))
                }
            })
            .sum()
    }

    /// Monte Carlo estimate of λ̄ at each time, with its standard error.
    pub fn mean_infectivity_mc(&self, times: &[f64], samples: usize, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = stream(seed, Tag::LawMonteCarlo, 0, 0);
        let mut sum = vec![0.0; times.len()];
        let mut sq = vec![0.0; times.len()];
        for _ in 0..samples {
            let p = self.sample(&mut rng);
            for (i, &t) in times.iter().enumerate() {
                let v = p.lambda_at(t);
                sum[i] += v;
                sq[i] += v * v;
            }
        }
        let m = samples as f64;
        sum.iter()
            .zip(&sq)
            .map(|(s, q)| {
                let mean = s / m;
                let var = (q / m - mean * mean).max(0.0) * m / (m - 1.0).max(1.0);
                (mean, (var / m).sqrt())
            })
            .collect()
    }

    /// R₀ = ∫λ̄, in closed form.
    pub fn r0(&self) -> f64 {
        self.mean_infectivity_integral(0.0, f64::INFINITY)
    }

    /// Times where λ̄ is not smooth.
    pub(crate) fn kinks(&self) -> Vec<f64> {
        let mut k = self.eta_law().kinks();
        if let Family::Custom { lambda_shape, .. } = &self.family {
            k.extend_from_slice(&lambda_shape.breaks[1..]);
        }
        k.retain(|t| *t > 0.0);
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }

    /// R₀ by composite trapezoid on λ̄, truncated where λ̄ < 1e-10·λ*.
    ///
    /// Independent of the closed form; used to cross-check it.
    pub fn r0_quadrature(&self) -> f64 {
        let floor = 1e-10 * self.lambda_star();
        let kinks = self.kinks();
        let mut t_max = kinks.last().copied().unwrap_or(0.0).max(1.0);
        while self.mean_infectivity(t_max) >= floor || self.survival(t_max) >= 1e-10 {
            t_max *= 2.0;
            if t_max > 1e9 {
                return f64::INFINITY;
            }
        }
        let mut edges = vec![0.0];
        edges.extend(kinks.into_iter().filter(|k| *k < t_max));
        edges.push(t_max);
        let h_target = t_max / 400_000.0;
        let mut total = 0.0;
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            let n = ((b - a) / h_target).ceil().max(1.0) as usize;
            let h = (b - a) / n as f64;
            // One-sided values at the ends: λ̄ may jump at a kink.
            let left = self.mean_infectivity(a);
            let right = self.mean_infectivity(b - 1e-12 * b.max(1.0));
            let inner: f64 = (1..n).map(|i| self.mean_infectivity(a + i as f64 * h)).sum();
            total += h * (0.5 * (left + right) + inner);
        }
        total
    }

    /// Atoms of γ* (a single zero atom when γ* = 0).
    pub fn gamma_star_atoms(&self) -> Vec<Atom> {
        let zero = || {
            vec![Atom {
                value: 0.0,
                weight: 1.0,
            }]
        };
        match &self.family {
            Family::MarkovSis { .. } | Family::GeneralSis { .. } | Family::Sirs { .. } => {
                vec![Atom {
                    value: 1.0,
                    weight: 1.0,
                }]
            }
            Family::Sir { .. } => zero(),
            Family::IndicatorGamma { gamma_star, .. } | Family::GradualGamma { gamma_star, .. } => {
                gamma_star.atoms()
            }
            Family::Custom { gamma_shape, .. } => vec![Atom {
                value: gamma_shape.last(),
                weight: 1.0,
            }],
        }
    }

    /// E[1/γ*], `+∞` when γ* = 0 with positive probability.
    pub fn e_inv_gamma_star(&self) -> f64 {
        self.gamma_star_atoms()
            .iter()
            .map(|a| {
                if a.value > 0.0 {
                    a.weight / a.value
                } else {
                    f64::INFINITY
                }
            })
            .sum()
    }

    /// E[ζ], where ζ is the first time γ becomes positive.
    pub fn e_zeta(&self) -> f64 {
        let e_eta = self.eta_law().mean();
        match &self.family {
            Family::MarkovSis { .. } | Family::GeneralSis { .. } => e_eta,
            Family::Sir { .. } => f64::INFINITY,
            Family::Sirs { theta: d, .. }
            | Family::IndicatorGamma { delay: d, .. }
            | Family::GradualGamma { delay: d, .. } => e_eta + d.mean(),
            Family::Custom { gamma_shape, .. } => gamma_shape
                .first_positive()
                .map_or(f64::INFINITY, |z| e_eta + z),
        }
    }

    pub fn statistics(&self) -> LawStatistics {
        let mut support: Vec<f64> = self.gamma_star_atoms().iter().map(|a| a.value).collect();
        support.sort_by(f64::total_cmp);
        support.dedup();
        LawStatistics {
            r0: self.r0(),
            e_inv_gamma_star: self.e_inv_gamma_star(),
            e_eta: self.eta_law().mean(),
            e_zeta: self.e_zeta(),
            gamma_star_support: support,
        }
    }

    /// Whether every path has non-decreasing γ.
    pub fn is_gamma_monotone(&self) -> bool {
        match &self.family {
            Family::Custom { gamma_shape, .. } => gamma_shape.is_non_decreasing(),
            _ => true,
        }
    }

    /// Present when γ = γ*·1{t ≥ η + delay} (or γ ≡ 0) with γ* independent of the rest.
    pub fn indicator_form(&self) -> Option<IndicatorForm> {
        let eta = self.eta_law();
        let one = vec![Atom {
            value: 1.0,
            weight: 1.0,
        }];
        match &self.family {
            Family::MarkovSis { .. } | Family::GeneralSis { .. } => Some(IndicatorForm {
                eta,
                delay: Some(Duration::fixed(0.0)),
                atoms: one,
            }),
            Family::Sir { .. } => Some(IndicatorForm {
                eta,
                delay: None,
                atoms: vec![],
            }),
            Family::Sirs { theta, .. } => Some(IndicatorForm {
                eta,
                delay: Some(theta.clone()),
                atoms: one,
            }),
            Family::IndicatorGamma {
                delay, gamma_star, ..
            } => Some(IndicatorForm {
                eta,
                delay: Some(delay.clone()),
                atoms: gamma_star.atoms(),
            }),
            Family::GradualGamma { .. } => None,
            Family::Custom { gamma_shape, .. } => {
                let Some(z) = gamma_shape.first_positive() else {
                    return Some(IndicatorForm {
                        eta,
                        delay: None,
                        atoms: vec![],
                    });
                };
                let after = &gamma_shape.values[gamma_shape.index(z)..];
                let g = after[0];
                after.iter().all(|v| *v == g).then(|| IndicatorForm {
                    eta,
                    delay: Some(Duration::fixed(z)),
                    atoms: vec![Atom {
                        value: g,
                        weight: 1.0,
                    }],
                })
            }
        }
    }
}
