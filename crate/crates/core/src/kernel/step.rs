use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Right-continuous piecewise-constant function on `[0, ∞)`.
///
/// `values[i]` holds on `[breaks[i], breaks[i+1])`; the last value extends to infinity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepFunction {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepFunction {
    pub fn constant(value: f64) -> Self {
        StepFunction {
            breaks: vec![0.0],
            values: vec![value],
        }
    }

    pub fn validate(&self, field: &str, lo: f64, hi: f64) -> Result<()> {
        if self.breaks.is_empty() || self.breaks.len() != self.values.len() {
            return Err(config_err(field, "breaks and values must be non-empty and of equal length"));
        }
        if self.breaks[0] != 0.0 {
            return Err(config_err(format!("{field}.breaks"), "first break must be 0"));
        }
        if self.breaks.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(config_err(format!("{field}.breaks"), "must be strictly increasing and finite"));
        }
        if let Some(v) = self.values.iter().find(|v| !(**v >= lo && **v <= hi)) {
            return Err(config_err(
                format!("{field}.values"),
                format!("value {v} outside [{lo}, {hi}]"),
            ));
        }
        Ok(())
    }

    pub fn index(&self, t: f64) -> usize {
        self.breaks.partition_point(|&b| b <= t).saturating_sub(1)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.values[self.index(t)]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn last(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// First time the function becomes positive, if ever.
    pub fn first_positive(&self) -> Option<f64> {
        self.breaks
            .iter()
            .zip(&self.values)
            .find(|(_, v)| **v > 0.0)
            .map(|(b, _)| *b)
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0])
    }

    /// `(start, end, value)` pieces intersected with `[a, b)`.
    pub fn pieces(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let n = self.breaks.len();
        (0..n).filter_map(move |i| {
            let lo = self.breaks[i].max(a);
            let hi = if i + 1 < n { self.breaks[i + 1] } else { f64::INFINITY }.min(b);
            (hi > lo).then_some((lo, hi, self.values[i]))
        })
    }
}
