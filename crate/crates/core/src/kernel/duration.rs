use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::rng::exp1;

/// Law of a non-negative random duration (infectious period, immune delay, ...).
///
/// Every variant is described by its cumulative hazard `Λ(t) = -ln P(X > t)`,
/// which gives exact sampling by inversion and exact conditional tails.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum Duration {
    Exponential { rate: f64 },
    Fixed { value: f64 },
    Uniform { low: f64, high: f64 },
    /// Hazard `rates[i]` on `[edges[i], edges[i+1])`, the last rate extending to infinity.
    PiecewiseHazard { edges: Vec<f64>, rates: Vec<f64> },
}

impl Duration {
    pub fn exponential(rate: f64) -> Self {
        Duration::Exponential { rate }
    }

    pub fn fixed(value: f64) -> Self {
        Duration::Fixed { value }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        match self {
            Duration::Exponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(config_err(format!("{field}.rate"), "must be positive and finite"));
                }
            }
            Duration::Fixed { value } => {
                if !finite_nonneg(*value) {
                    return Err(config_err(format!("{field}.value"), "must be non-negative and finite"));
                }
            }
            Duration::Uniform { low, high } => {
                if !(finite_nonneg(*low) && high.is_finite() && high > low) {
                    return Err(config_err(field, "uniform requires 0 <= low < high"));
                }
            }
            Duration::PiecewiseHazard { edges, rates } => {
                if edges.is_empty() || edges.len() != rates.len() {
                    return Err(config_err(field, "edges and rates must be non-empty and of equal length"));
                }
                if edges[0] != 0.0 {
                    return Err(config_err(format!("{field}.edges"), "first edge must be 0"));
                }
                if edges.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
                    return Err(config_err(format!("{field}.edges"), "must be strictly increasing and finite"));
                }
                if rates.iter().any(|r| !finite_nonneg(*r)) {
                    return Err(config_err(format!("{field}.rates"), "must be non-negative and finite"));
                }
                if *rates.last().unwrap() <= 0.0 {
                    return Err(config_err(format!("{field}.rates"), "last hazard must be positive"));
                }
            }
        }
        Ok(())
    }

    /// `Λ(t)`; `+∞` past the end of the support.
    pub fn cum_hazard(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            Duration::Exponential { rate } => rate * t,
            Duration::Fixed { value } => {
                if t < *value {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Duration::Uniform { low, high } => {
                if t < *low {
                    0.0
                } else if t < *high {
                    -((high - t) / (high - low)).ln()
                } else {
                    f64::INFINITY
                }
            }
            Duration::PiecewiseHazard { edges, rates } => {
                let mut acc = 0.0;
                for i in 0..edges.len() {
                    let hi = edges.get(i + 1).copied().unwrap_or(f64::INFINITY);
                    if t <= hi {
                        return acc + rates[i] * (t - edges[i]);
                    }
                    acc += rates[i] * (hi - edges[i]);
                }
                acc
            }
        }
    }

    /// Smallest `t` with `Λ(t) >= h`.
    pub fn inverse_cum_hazard(&self, h: f64) -> f64 {
        if h <= 0.0 {
            return match self {
                Duration::Uniform { low, .. } => *low,
                _ => 0.0,
            };
        }
        match self {
            Duration::Exponential { rate } => h / rate,
            Duration::Fixed { value } => *value,
            Duration::Uniform { low, high } => low + (high - low) * (-(-h).exp_m1()),
            Duration::PiecewiseHazard { edges, rates } => {
                let mut acc = 0.0;
                for i in 0..edges.len() {
                    let hi = edges.get(i + 1).copied().unwrap_or(f64::INFINITY);
                    let seg = rates[i] * (hi - edges[i]);
                    if acc + seg >= h {
                        return edges[i] + (h - acc) / rates[i];
                    }
                    acc += seg;
                }
                f64::INFINITY
            }
        }
    }

    /// `P(X > t)`.
    pub fn survival(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        if t == 0.0 {
            if let Duration::Fixed { value } = self {
                return if *value > 0.0 { 1.0 } else { 0.0 };
            }
        }
        (-self.cum_hazard(t)).exp()
    }

    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.survival(t)
    }

    /// `∫_0^x P(X > r) dr`.
    pub fn integrated_survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            Duration::Exponential { rate } => -(-rate * x).exp_m1() / rate,
            Duration::Fixed { value } => x.min(*value),
            Duration::Uniform { low, high } => {
                if x < *low {
                    x
                } else {
                    let w = high - low;
                    let y = x.min(*high);
                    low + (w * w - (high - y) * (high - y)) / (2.0 * w)
                }
            }
            Duration::PiecewiseHazard { edges, rates } => {
                let mut acc_h: f64 = 0.0;
                let mut total = 0.0;
                for i in 0..edges.len() {
                    let hi = edges.get(i + 1).copied().unwrap_or(f64::INFINITY).min(x);
                    let len = hi - edges[i];
                    let base = (-acc_h).exp();
                    total += if rates[i] > 0.0 {
                        base * -(-rates[i] * len).exp_m1() / rates[i]
                    } else {
                        base * len
                    };
                    if hi >= x {
                        break;
                    }
                    acc_h += rates[i] * len;
                }
                total
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Duration::Exponential { rate } => 1.0 / rate,
            Duration::Fixed { value } => *value,
            Duration::Uniform { low, high } => 0.5 * (low + high),
            Duration::PiecewiseHazard { .. } => self.integrated_survival(f64::INFINITY),
        }
    }

    /// Hazard rate `μ(t)`; only for laws with a bounded density.
    pub fn hazard(&self, t: f64) -> Result<f64> {
        match self {
            Duration::Exponential { rate } => Ok(*rate),
            Duration::PiecewiseHazard { edges, rates } => {
                let i = edges.partition_point(|&e| e <= t).saturating_sub(1);
                Ok(rates[i])
            }
            _ => Err(Error::Unsupported(
                "hazard is only defined for exponential or piecewise-hazard durations".into(),
            )),
        }
    }

    pub fn has_bounded_hazard(&self) -> bool {
        matches!(self, Duration::Exponential { .. } | Duration::PiecewiseHazard { .. })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Duration::Fixed { value } if *value == 0.0)
    }

    /// Points where the survival function or its derivative jumps.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            Duration::Exponential { .. } => vec![],
            Duration::Fixed { value } => vec![*value],
            Duration::Uniform { low, high } => vec![*low, *high],
            Duration::PiecewiseHazard { edges, .. } => edges[1..].to_vec(),
        }
    }

    /// Upper end of the support (`+∞` when unbounded).
    pub fn support_end(&self) -> f64 {
        match self {
            Duration::Fixed { value } => *value,
            Duration::Uniform { high, .. } => *high,
            _ => f64::INFINITY,
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        self.inverse_cum_hazard(-(-u).ln_1p())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Duration::Fixed { value } => *value,
            _ => self.inverse_cum_hazard(exp1(rng)),
        }
    }

    /// Samples `X` conditioned on `X > xi` (total value, not the excess).
    pub fn sample_beyond<R: Rng + ?Sized>(&self, xi: f64, rng: &mut R) -> Result<f64> {
        if xi <= 0.0 {
            let x = self.sample(rng);
            return Ok(x);
        }
        let base = self.cum_hazard(xi);
        if !base.is_finite() {
            return Err(config_err(
                "initial.infection_age",
                format!("infection age {xi} lies beyond the support of the infectious period"),
            ));
        }
        let x = match self {
            Duration::Fixed { value } => *value,
            _ => self.inverse_cum_hazard(base + exp1(rng)),
        };
        Ok(x.max(xi))
    }
}
