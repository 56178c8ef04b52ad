use rand::Rng;
use serde::{Deserialize, Serialize};

use super::law::{Family, KernelLaw};
use super::path::{KernelPath, PathBuilder};
use crate::error::{config_err, Result};
use crate::quad::gauss_legendre;
use crate::rng::open01;

/// Law of an age (time since infection or since recovery) at time 0.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgeLaw {
    #[default]
    Zero,
    Fixed { value: f64 },
    /// Piecewise-constant density (unnormalized) with `values[i]` on `[edges[i], edges[i+1])`.
    Density { edges: Vec<f64>, values: Vec<f64> },
}

impl AgeLaw {
    pub fn validate(&self, field: &str) -> Result<()> {
        match self {
            AgeLaw::Zero => Ok(()),
            AgeLaw::Fixed { value } => {
                if value.is_finite() && *value >= 0.0 {
                    Ok(())
                } else {
                    Err(config_err(format!("{field}.value"), "must be non-negative and finite"))
                }
            }
            AgeLaw::Density { edges, values } => {
                if edges.len() < 2 || edges.len() != values.len() + 1 {
                    return Err(config_err(field, "need one more edge than values"));
                }
                if !(edges[0] >= 0.0) || edges.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
                    return Err(config_err(
                        format!("{field}.edges"),
                        "must be non-negative, finite and strictly increasing",
                    ));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(config_err(format!("{field}.values"), "must be non-negative and finite"));
                }
                if self.mass() <= 0.0 {
                    return Err(config_err(format!("{field}.values"), "density has zero mass"));
                }
                Ok(())
            }
        }
    }

    /// Total mass of the density (1 for the point laws).
    pub fn mass(&self) -> f64 {
        match self {
            AgeLaw::Density { edges, values } => values
                .iter()
                .zip(edges.windows(2))
                .map(|(v, w)| v * (w[1] - w[0]))
                .sum(),
            _ => 1.0,
        }
    }

    /// Supremum of the support.
    pub fn support_end(&self) -> f64 {
        match self {
            AgeLaw::Zero => 0.0,
            AgeLaw::Fixed { value } => *value,
            AgeLaw::Density { edges, values } => {
                let last = values.iter().rposition(|v| *v > 0.0).unwrap_or(0);
                edges[last + 1]
            }
        }
    }

    /// P(age >= a).
    pub fn prob_at_least(&self, a: f64) -> f64 {
        match self {
            AgeLaw::Zero => f64::from(a <= 0.0),
            AgeLaw::Fixed { value } => f64::from(a <= *value),
            AgeLaw::Density { edges, values } => {
                let above: f64 = values
                    .iter()
                    .zip(edges.windows(2))
                    .map(|(v, w)| v * (w[1] - w[0].max(a)).max(0.0))
                    .sum();
                above / self.mass()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            AgeLaw::Zero => 0.0,
            AgeLaw::Fixed { value } => *value,
            AgeLaw::Density { edges, values } => {
                let mut u = open01(rng) * self.mass();
                for (i, v) in values.iter().enumerate() {
                    let w = v * (edges[i + 1] - edges[i]);
                    if u < w || i + 1 == values.len() {
                        let frac = (u / w).clamp(0.0, 1.0);
                        return edges[i] + frac * (edges[i + 1] - edges[i]);
                    }
                    u -= w;
                }
                unreachable!()
            }
        }
    }

    /// Quadrature nodes `(age, probability weight)` for expectations over this law.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        self.nodes_split(&[])
    }

    /// Like [`AgeLaw::nodes`], with density cells also split at `cuts`, so
    /// integrands that jump there are still integrated accurately.
    pub fn nodes_split(&self, cuts: &[f64]) -> Vec<(f64, f64)> {
        match self {
            AgeLaw::Zero => vec![(0.0, 1.0)],
            AgeLaw::Fixed { value } => vec![(*value, 1.0)],
            AgeLaw::Density { edges, values } => {
                let mass = self.mass();
                let mut out = Vec::new();
                for (i, v) in values.iter().enumerate() {
                    if *v <= 0.0 {
                        continue;
                    }
                    let (lo, hi) = (edges[i], edges[i + 1]);
                    let mut pts: Vec<f64> = cuts.iter().copied().filter(|c| *c > lo && *c < hi).collect();
                    pts.push(lo);
                    pts.push(hi);
                    pts.sort_by(f64::total_cmp);
                    pts.dedup();
                    for w in pts.windows(2) {
                        out.extend(gauss_legendre(w[0], w[1]).map(|(x, q)| (x, q * v / mass)));
                    }
                }
                out
            }
        }
    }
}

/// Individuals already recovered at time 0 (only for `custom` kernels).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveredInit {
    pub fraction: f64,
    #[serde(default)]
    pub recovery_age: AgeLaw,
}

/// Law of the kernel pair carried at time 0.
///
/// With probability `i_fraction` an individual is infectious with infection
/// age ξ; it then carries (λ̃(ξ+·), γ̃(ξ+·)) where the base path is drawn with
/// η̃ conditioned on η̃ > ξ. Otherwise it is fully susceptible (λ ≡ 0, γ ≡ 1),
/// or, when `recovered` is set, recovered with γ(t) = γ̃(t + recovery age).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialLaw {
    pub i_fraction: f64,
    #[serde(default)]
    pub infection_age: AgeLaw,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovered: Option<RecoveredInit>,
}

/// Classification of an individual's starting state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StartState {
    Susceptible,
    Infected,
    Recovered,
}

impl InitialLaw {
    pub fn new(i_fraction: f64) -> Self {
        InitialLaw {
            i_fraction,
            infection_age: AgeLaw::Zero,
            recovered: None,
        }
    }

    pub fn validate(&self, law: &KernelLaw, field: &str) -> Result<()> {
        if !(0.0..=1.0).contains(&self.i_fraction) {
            return Err(config_err(format!("{field}.i_fraction"), "must lie in [0, 1]"));
        }
        self.infection_age.validate(&format!("{field}.infection_age"))?;
        let xi_max = self.infection_age.support_end();
        let left = match self.infection_age {
            AgeLaw::Density { .. } => xi_max * (1.0 - 1e-12),
            _ => xi_max,
        };
        if self.i_fraction > 0.0 && law.survival(left) <= 0.0 {
            return Err(config_err(
                format!("{field}.infection_age"),
                format!("ages up to {xi_max} exceed the support of the infectious period"),
            ));
        }
        if let Some(r) = &self.recovered {
            if !matches!(law.family, Family::Custom { .. }) {
                return Err(config_err(
                    format!("{field}.recovered"),
                    "initially recovered individuals need a custom kernel",
                ));
            }
            if !(0.0..=1.0).contains(&r.fraction) || self.i_fraction + r.fraction > 1.0 + 1e-12 {
                return Err(config_err(
                    format!("{field}.recovered.fraction"),
                    "must lie in [0, 1 - i_fraction]",
                ));
            }
            r.recovery_age.validate(&format!("{field}.recovered.recovery_age"))?;
        }
        Ok(())
    }

    pub fn r_fraction(&self) -> f64 {
        self.recovered.as_ref().map_or(0.0, |r| r.fraction)
    }

    pub fn s_fraction(&self) -> f64 {
        (1.0 - self.i_fraction - self.r_fraction()).max(0.0)
    }

    pub fn draw_state<R: Rng + ?Sized>(&self, rng: &mut R) -> StartState {
        let u: f64 = rng.random();
        if u < self.i_fraction {
            StartState::Infected
        } else if u < self.i_fraction + self.r_fraction() {
            StartState::Recovered
        } else {
            StartState::Susceptible
        }
    }

    /// Draws the starting path of one individual.
    pub fn sample<R: Rng + ?Sized>(&self, law: &KernelLaw, rng: &mut R) -> Result<KernelPath> {
        match self.draw_state(rng) {
            StartState::Susceptible => Ok(KernelPath::susceptible()),
            StartState::Infected => self.sample_infected(law, rng),
            StartState::Recovered => Ok(self.sample_recovered(law, rng)),
        }
    }

    pub fn sample_infected<R: Rng + ?Sized>(&self, law: &KernelLaw, rng: &mut R) -> Result<KernelPath> {
        let xi = self.infection_age.sample(rng);
        let eta = law.eta_law().sample_beyond(xi, rng)?;
        Ok(law.sample_given_eta(eta, rng).shifted(xi))
    }

    pub fn sample_recovered<R: Rng + ?Sized>(&self, law: &KernelLaw, rng: &mut R) -> KernelPath {
        let age = self
            .recovered
            .as_ref()
            .map_or(0.0, |r| r.recovery_age.sample(rng));
        let Family::Custom { gamma_shape, .. } = &law.family else {
            return KernelPath::susceptible();
        };
        let mut b = PathBuilder::new();
        for (lo, _, v) in gamma_shape.pieces(age, f64::INFINITY) {
            b.push(lo - age, 0.0, v);
        }
        let zeta = gamma_shape
            .pieces(age, f64::INFINITY)
            .find(|p| p.2 > 0.0)
            .map_or(f64::INFINITY, |p| p.0 - age);
        b.finish(0.0, zeta)
    }

    /// `E_ξ[g(ξ) / F^c(ξ)]` over the infection-age law, where `g` may jump
    /// wherever ξ plus one of `shifts` hits a kink of the law.
    fn conditional<G: Fn(f64) -> f64>(&self, law: &KernelLaw, shifts: &[f64], g: G) -> f64 {
        let eta = law.eta_law();
        let kinks = law.kinks();
        let cuts: Vec<f64> = kinks.iter().flat_map(|k| shifts.iter().map(move |s| k - s)).collect();
        self.infection_age
            .nodes_split(&cuts)
            .into_iter()
            .map(|(xi, w)| {
                let s = eta.survival(xi);
                if s > 0.0 {
                    w * g(xi) / s
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// F^c₀(t) = P(η₀ > t | infected at time 0).
    pub fn survival(&self, law: &KernelLaw, t: f64) -> f64 {
        let eta = law.eta_law();
        self.conditional(law, &[t], |xi| eta.survival(xi + t))
    }

    /// λ̄₀(t) = E[λ₀(t) | infected at time 0].
    pub fn mean_infectivity(&self, law: &KernelLaw, t: f64) -> f64 {
        self.conditional(law, &[t], |xi| law.mean_infectivity(xi + t))
    }

    /// `∫_a^b λ̄₀`.
    pub fn mean_infectivity_integral(&self, law: &KernelLaw, a: f64, b: f64) -> f64 {
        self.conditional(law, &[a, b], |xi| law.mean_infectivity_integral(xi + a, xi + b))
    }

    /// `∫_a^b F^c₀`.
    pub fn integrated_survival(&self, law: &KernelLaw, a: f64, b: f64) -> f64 {
        let eta = law.eta_law();
        self.conditional(law, &[a, b], |xi| {
            eta.integrated_survival(xi + b) - eta.integrated_survival(xi + a)
        })
    }

    /// E[γ₀(t) | recovered at time 0].
    pub fn recovered_gamma(&self, law: &KernelLaw, t: f64) -> f64 {
        let (Some(r), Family::Custom { gamma_shape, .. }) = (&self.recovered, &law.family) else {
            return 0.0;
        };
        let cuts: Vec<f64> = gamma_shape.breaks.iter().map(|b| b - t).collect();
        r.recovery_age
            .nodes_split(&cuts)
            .into_iter()
            .map(|(age, w)| w * gamma_shape.value(age + t))
            .sum()
    }
}
