#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub fn reinfect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reinfect"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = reinfect(args);
    assert!(
        out.status.success(),
        "reinfect {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Parses a CSV with a header row into (header, rows).
pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

/// Markov SIRS with a fixed immune period, as a delay ODE integrated by RK4:
///
/// ```text
/// S'  = −λ I S
/// I'  = λ I (S + Ra) − μ I
/// Ra' = μ I(t − θ)·1{t ≥ θ} − λ I Ra
/// ```
///
/// `Ra` holds the recovered whose immunity has lapsed. Returns samples of
/// (S + Ra, λ I) every `stride` steps of size `h`. `θ/h` must be a whole number.
pub fn delay_sirs(lambda: f64, mu: f64, theta: f64, s0: f64, i0: f64, h: f64, steps: usize, stride: usize) -> Vec<(f64, f64)> {
    let lag = (theta / h).round() as usize;
    let mut hist_i = Vec::with_capacity(steps + 1);
    let mut hist_di = Vec::with_capacity(steps + 1);
    // I at (k + c)·h − θ, by cubic Hermite interpolation inside a step.
    let delayed = |hist_i: &Vec<f64>, hist_di: &Vec<f64>, k: usize, c: f64| -> f64 {
        if k < lag {
            return 0.0;
        }
        let j = k - lag;
        if c == 0.0 {
            return hist_i[j];
        }
        let (y0, y1, d0, d1) = (hist_i[j], hist_i[j + 1], hist_di[j], hist_di[j + 1]);
        let c2 = c * c;
        let c3 = c2 * c;
        (2.0 * c3 - 3.0 * c2 + 1.0) * y0 + (c3 - 2.0 * c2 + c) * h * d0 + (-2.0 * c3 + 3.0 * c2) * y1 + (c3 - c2) * h * d1
    };
    let rhs = |s: f64, i: f64, ra: f64, lagged: f64| {
        (
            -lambda * i * s,
            lambda * i * (s + ra) - mu * i,
            mu * lagged - lambda * i * ra,
        )
    };
    let (mut s, mut i, mut ra) = (s0, i0, 0.0);
    let mut out = vec![(s + ra, lambda * i)];
    hist_i.push(i);
    hist_di.push(lambda * i * (s + ra) - mu * i);
    for k in 0..steps {
        let l0 = delayed(&hist_i, &hist_di, k, 0.0);
        let lh = delayed(&hist_i, &hist_di, k, 0.5);
        // Left limit at the step end: nothing arrives before θ.
        let l1 = if k < lag { 0.0 } else { hist_i[k + 1 - lag] };
        let a = rhs(s, i, ra, l0);
        let b = rhs(s + 0.5 * h * a.0, i + 0.5 * h * a.1, ra + 0.5 * h * a.2, lh);
        let c = rhs(s + 0.5 * h * b.0, i + 0.5 * h * b.1, ra + 0.5 * h * b.2, lh);
        let d = rhs(s + h * c.0, i + h * c.1, ra + h * c.2, l1);
        s += h / 6.0 * (a.0 + 2.0 * b.0 + 2.0 * c.0 + d.0);
        i += h / 6.0 * (a.1 + 2.0 * b.1 + 2.0 * c.1 + d.1);
        ra += h / 6.0 * (a.2 + 2.0 * b.2 + 2.0 * c.2 + d.2);
        hist_i.push(i);
        hist_di.push(lambda * i * (s + ra) - mu * i);
        if (k + 1) % stride == 0 {
            out.push((s + ra, lambda * i));
        }
    }
    out
}
