use crate::error::{Error, Result};

/// One realization of the pair (λ(·), γ(·)) as piecewise-constant functions of
/// the time since infection.
///
/// Segment `i` covers `[breakpoints[i], breakpoints[i+1])`, the last segment
/// extends to infinity. `eta` (the infectious duration) is always a breakpoint
/// unless it is 0.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelPath {
    breakpoints: Vec<f64>,
    lambda: Vec<f64>,
    gamma: Vec<f64>,
    eta: f64,
    zeta: f64,
}

/// Incremental constructor that drops empty segments and merges equal neighbours.
#[derive(Debug, Default)]
pub struct PathBuilder {
    breakpoints: Vec<f64>,
    lambda: Vec<f64>,
    gamma: Vec<f64>,
    keep: Option<f64>,
}

impl PathBuilder {
    pub fn new() -> Self {
        PathBuilder {
            breakpoints: Vec::with_capacity(8),
            lambda: Vec::with_capacity(8),
            gamma: Vec::with_capacity(8),
            keep: None,
        }
    }

    /// Never merge across this time (used for the infectious duration).
    pub fn keep_break_at(mut self, t: f64) -> Self {
        self.keep = Some(t);
        self
    }

    /// Starts a new segment at `start` (must be non-decreasing across calls).
    pub fn push(&mut self, start: f64, lambda: f64, gamma: f64) {
        if let Some(&last) = self.breakpoints.last() {
            debug_assert!(start >= last);
            if start == last {
                *self.lambda.last_mut().unwrap() = lambda;
                *self.gamma.last_mut().unwrap() = gamma;
                if self.breakpoints.len() >= 2 {
                    self.merge_tail();
                }
                return;
            }
            if *self.lambda.last().unwrap() == lambda
                && *self.gamma.last().unwrap() == gamma
                && self.keep != Some(start)
            {
                return;
            }
        } else {
            debug_assert_eq!(start, 0.0);
        }
        self.breakpoints.push(start);
        self.lambda.push(lambda);
        self.gamma.push(gamma);
    }

    fn merge_tail(&mut self) {
        let n = self.breakpoints.len();
        if self.lambda[n - 1] == self.lambda[n - 2]
            && self.gamma[n - 1] == self.gamma[n - 2]
            && self.keep != Some(self.breakpoints[n - 1])
        {
            self.breakpoints.pop();
            self.lambda.pop();
            self.gamma.pop();
        }
    }

    pub fn finish(self, eta: f64, zeta: f64) -> KernelPath {
        KernelPath {
            breakpoints: self.breakpoints,
            lambda: self.lambda,
            gamma: self.gamma,
            eta,
            zeta,
        }
    }
}

impl KernelPath {
    /// Never infected: λ ≡ 0, γ ≡ 1.
    pub fn susceptible() -> Self {
        KernelPath {
            breakpoints: vec![0.0],
            lambda: vec![0.0],
            gamma: vec![1.0],
            eta: 0.0,
            zeta: 0.0,
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn lambda_values(&self) -> &[f64] {
        &self.lambda
    }

    pub fn gamma_values(&self) -> &[f64] {
        &self.gamma
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn num_segments(&self) -> usize {
        self.breakpoints.len()
    }

    /// Long-run susceptibility γ*.
    pub fn gamma_star(&self) -> f64 {
        *self.gamma.last().unwrap()
    }

    pub fn segment_index(&self, t: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= t).saturating_sub(1)
    }

    /// End of segment `i` (infinity for the last one).
    pub fn segment_end(&self, i: usize) -> f64 {
        self.breakpoints.get(i + 1).copied().unwrap_or(f64::INFINITY)
    }

    pub fn lambda_at(&self, t: f64) -> f64 {
        self.lambda[self.segment_index(t)]
    }

    pub fn gamma_at(&self, t: f64) -> f64 {
        self.gamma[self.segment_index(t)]
    }

    pub fn lambda_in(&self, seg: usize) -> f64 {
        self.lambda[seg]
    }

    pub fn gamma_in(&self, seg: usize) -> f64 {
        self.gamma[seg]
    }

    /// `∫_a^b γ(r) dr`.
    pub fn gamma_integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut i = self.segment_index(a);
        let mut total = 0.0;
        let mut lo = a;
        loop {
            let hi = self.segment_end(i).min(b);
            total += self.gamma[i] * (hi - lo);
            if hi >= b {
                return total;
            }
            lo = hi;
            i += 1;
        }
    }

    /// The path seen from age `xi` onward: t ↦ (λ(t + xi), γ(t + xi)).
    pub fn shifted(&self, xi: f64) -> KernelPath {
        if xi <= 0.0 {
            return self.clone();
        }
        let start = self.segment_index(xi);
        let mut b = PathBuilder::new().keep_break_at(self.eta - xi);
        b.push(0.0, self.lambda[start], self.gamma[start]);
        for i in start + 1..self.breakpoints.len() {
            b.push(self.breakpoints[i] - xi, self.lambda[i], self.gamma[i]);
        }
        b.finish((self.eta - xi).max(0.0), (self.zeta - xi).max(0.0))
    }

    pub fn is_gamma_monotone(&self) -> bool {
        self.gamma.windows(2).all(|w| w[1] >= w[0])
    }

    /// Checks the structural invariants: bounds, λ vanishing after `eta`, γ
    /// vanishing before `zeta`, and `eta <= zeta`.
    pub fn check(&self, lambda_star: f64) -> Result<()> {
        let fail = |m: String| Err(Error::Invariant(m));
        if self.breakpoints.first() != Some(&0.0) {
            return fail("path must start at 0".into());
        }
        if self.breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return fail("breakpoints must be strictly increasing".into());
        }
        if !(self.eta <= self.zeta) {
            return fail(format!("eta {} exceeds zeta {}", self.eta, self.zeta));
        }
        for i in 0..self.breakpoints.len() {
            let (l, g) = (self.lambda[i], self.gamma[i]);
            if !(0.0..=lambda_star).contains(&l) || !(0.0..=1.0).contains(&g) {
                return fail(format!("segment {i} has λ={l}, γ={g} out of bounds"));
            }
            let (lo, hi) = (self.breakpoints[i], self.segment_end(i));
            if l > 0.0 && hi > self.eta {
                return fail(format!("λ positive on [{lo}, {hi}) beyond eta {}", self.eta));
            }
            if g > 0.0 && lo < self.zeta {
                return fail(format!("γ positive on [{lo}, {hi}) before zeta {}", self.zeta));
            }
        }
        if self.zeta.is_finite() && self.gamma_at(self.zeta) <= 0.0 {
            return fail(format!("γ not positive at zeta {}", self.zeta));
        }
        Ok(())
    }
}
