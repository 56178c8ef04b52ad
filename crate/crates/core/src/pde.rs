//! Age-structured Kermack–McKendrick model solved along characteristics.
//!
//! Unknowns are the never-infected fraction S̄(t), the density Ī(t,τ) of
//! infectious individuals by infection age and the density R̄(t,θ) of
//! recovered individuals by recovery age. Ages live on nodes `i·dt`, so a
//! characteristic advances exactly one node per step:
//!
//! * Ī(t,τ) is evaluated from its closed form, `Ī(0,τ−t)F^c(τ)/F^c(τ−t)` for
//!   τ > t and `B(t−τ)F^c(τ)` otherwise, with B = S̄_frak·F̄_frak;
//! * R̄ is carried along characteristics with a trapezoid exponent;
//! * the boundary values at age 0 are implicit and found by fixed-point iteration.
//!
//! Node values at a jump of a piecewise-constant input are the mean of both sides.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::grid::{coupling_distance, step_count, TrajectoryGrid};
use crate::kernel::{AgeLaw, Duration, Family, InitialLaw, KernelLaw, RecoveredInit, StepFunction};
use crate::lln::{solve_limit, LimitConfig};
use crate::quad::trapezoid;

/// Piecewise-constant density with absolute mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Density {
    pub edges: Vec<f64>,
    pub values: Vec<f64>,
}

impl Density {
    fn validate(&self, field: &str) -> Result<()> {
        AgeLaw::Density {
            edges: self.edges.clone(),
            values: self.values.clone(),
        }
        .validate(field)
        .or_else(|e| if self.mass() == 0.0 { Ok(()) } else { Err(e) })
    }

    pub fn mass(&self) -> f64 {
        self.values
            .iter()
            .zip(self.edges.windows(2))
            .map(|(v, w)| v * (w[1] - w[0]))
            .sum()
    }

    fn right(&self, x: f64) -> f64 {
        let i = self.edges.partition_point(|&e| e <= x);
        if i == 0 || i >= self.edges.len() {
            0.0
        } else {
            self.values[i - 1]
        }
    }

    /// Value at a node: the mean of the one-sided limits (right limit at age 0).
    pub fn node(&self, x: f64) -> f64 {
        match near_break(&self.edges, x) {
            Some(e) if e > 0.0 => 0.5 * (self.left(e) + self.right(e)),
            Some(e) => self.right(e),
            None => self.right(x),
        }
    }

    fn left(&self, x: f64) -> f64 {
        let i = self.edges.partition_point(|&e| e < x);
        if i == 0 || i > self.values.len() {
            0.0
        } else {
            self.values[i - 1]
        }
    }

    fn support_end(&self) -> f64 {
        *self.edges.last().unwrap_or(&0.0)
    }
}

/// The break that node `x` sits on, allowing for rounding in `i·dt`.
fn near_break(breaks: &[f64], x: f64) -> Option<f64> {
    breaks.iter().copied().find(|b| (b - x).abs() <= 1e-9 * x.abs().max(1.0))
}

/// Mean of one-sided limits of a step function at `x`.
fn step_node(f: &StepFunction, x: f64) -> f64 {
    match near_break(&f.breaks, x) {
        Some(b) if b > 0.0 => {
            let i = f.breaks.iter().position(|&v| v == b).unwrap();
            0.5 * (f.values[i - 1] + f.values[i])
        }
        Some(b) => f.value(b),
        None => f.value(x),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeScenario {
    /// Infectivity λ̃(τ) by infection age.
    pub lambda_tilde: StepFunction,
    /// Susceptibility γ̃(θ) by recovery age.
    pub gamma_tilde: StepFunction,
    /// Law of the infectious period; must have a bounded hazard.
    pub infectious_period: Duration,
    pub s0: f64,
    pub i0_density: Density,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0_density: Option<Density>,
    /// Recovery ages tracked individually; older mass is pooled. Defaults to
    /// one time unit past the last jump of γ̃ and of R̄(0,·).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_max: Option<f64>,
    /// Largest |mass − 1| tolerated.
    #[serde(default = "default_mass_tolerance")]
    pub mass_tolerance: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshot_times: Vec<f64>,
}

fn default_mass_tolerance() -> f64 {
    1e-2
}

impl PdeScenario {
    pub fn validate(&self, field: &str) -> Result<()> {
        let f = |n: &str| format!("{field}.{n}");
        self.lambda_tilde.validate(&f("lambda_tilde"), 0.0, f64::MAX)?;
        self.gamma_tilde.validate(&f("gamma_tilde"), 0.0, 1.0)?;
        self.infectious_period.validate(&f("infectious_period"))?;
        if !self.infectious_period.has_bounded_hazard() {
            return Err(config_err(
                f("infectious_period"),
                "needs a density: use an exponential or piecewise-hazard law",
            ));
        }
        self.i0_density.validate(&f("i0_density"))?;
        if let Some(r) = &self.r0_density {
            r.validate(&f("r0_density"))?;
        }
        if !(0.0..=1.0).contains(&self.s0) {
            return Err(config_err(f("s0"), "must lie in [0, 1]"));
        }
        let total = self.s0 + self.i0_density.mass() + self.r0_density.as_ref().map_or(0.0, Density::mass);
        if (total - 1.0).abs() > 1e-9 {
            return Err(config_err(field, format!("initial masses sum to {total}, expected 1")));
        }
        if let Some(t) = self.theta_max {
            if !(t.is_finite() && t > 0.0) {
                return Err(config_err(f("theta_max"), "must be positive"));
            }
        }
        Ok(())
    }

    /// The equivalent kernel law: λ = λ̃·1{t<η}, γ = γ̃(t−η)·1{t>η}.
    pub fn kernel_law(&self) -> KernelLaw {
        Family::Custom {
            lambda_shape: self.lambda_tilde.clone(),
            gamma_shape: self.gamma_tilde.clone(),
            eta: self.infectious_period.clone(),
        }
        .into()
    }

    /// The equivalent initial law, with ages distributed as the initial densities.
    pub fn initial_law(&self) -> InitialLaw {
        let i = self.i0_density.mass();
        InitialLaw {
            i_fraction: i,
            infection_age: if i > 0.0 {
                AgeLaw::Density {
                    edges: self.i0_density.edges.clone(),
                    values: self.i0_density.values.clone(),
                }
            } else {
                AgeLaw::Zero
            },
            recovered: self.r0_density.as_ref().filter(|r| r.mass() > 0.0).map(|r| RecoveredInit {
                fraction: r.mass(),
                recovery_age: AgeLaw::Density {
                    edges: r.edges.clone(),
                    values: r.values.clone(),
                },
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PdeRow {
    pub t: f64,
    pub s_bar: f64,
    pub i_total: f64,
    pub r_total: f64,
    pub s_frak: f64,
    pub f_frak: f64,
    pub mass_residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub i_density: Vec<f64>,
    pub r_density: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdeSolution {
    pub dt: f64,
    pub rows: Vec<PdeRow>,
    pub snapshots: Vec<Snapshot>,
    /// Largest gap between R̄(t,0) from the renewal formula and ∫μ_F Ī(t,·).
    pub boundary_gap: f64,
    /// Infectious mass dropped past the age window.
    pub truncated_mass: f64,
}

impl PdeSolution {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,S_bar,I_total,R_total,S_frak,F_frak,mass_residual")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.t, r.s_bar, r.i_total, r.r_total, r.s_frak, r.f_frak, r.mass_residual
            )?;
        }
        Ok(())
    }

    pub fn write_snapshots<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,age,I_density,R_density")?;
        for s in &self.snapshots {
            let n = s.i_density.len().max(s.r_density.len());
            for i in 0..n {
                let get = |v: &Vec<f64>| v.get(i).copied().unwrap_or(0.0);
                writeln!(w, "{},{},{},{}", s.t, i as f64 * self.dt, get(&s.i_density), get(&s.r_density))?;
            }
        }
        Ok(())
    }

    pub fn max_mass_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.mass_residual).fold(0.0, f64::max)
    }

    /// (S̄_frak, F̄_frak) as a trajectory grid (other columns zero).
    pub fn aggregates(&self) -> TrajectoryGrid {
        let mut g = TrajectoryGrid::with_steps(self.dt, self.rows.len() - 1);
        for (k, r) in self.rows.iter().enumerate() {
            g.f_bar[k] = r.f_frak;
            g.s_bar[k] = r.s_frak;
            g.i_bar[k] = r.i_total;
            g.u_bar[k] = 1.0 - r.i_total;
        }
        g
    }
}

fn trapezoid_weighted(a: &[f64], w: &[f64], h: f64) -> f64 {
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = (1..n - 1).map(|i| a[i] * w[i]).sum();
    h * (inner + 0.5 * (a[0] * w[0] + a[n - 1] * w[n - 1]))
}

/// Solves the PDE on `[0, horizon]` with age step equal to `dt`.
pub fn solve_pde(scn: &PdeScenario, horizon: f64, dt: f64) -> Result<PdeSolution> {
    scn.validate("pde")?;
    let steps = step_count(horizon, dt)?;
    let eta = &scn.infectious_period;
    let i0_end = scn.i0_density.support_end();
    // Infection ages: up to where the survival is negligible, and never
    // beyond what the horizon can reach.
    let tau_trunc = eta.quantile(1.0 - 1e-10);
    let a_i = ((tau_trunc.min(horizon + i0_end)) / dt).ceil() as usize;
    let r0_end = scn.r0_density.as_ref().map_or(0.0, Density::support_end);
    let theta_max = scn.theta_max.unwrap_or_else(|| {
        let last_break = *scn.gamma_tilde.breaks.last().unwrap();
        last_break.max(r0_end) + 1.0
    });
    let a_r = (theta_max / dt).ceil().max(1.0) as usize;
    let node = |i: usize| i as f64 * dt;

    let fc: Vec<f64> = (0..=a_i + steps).map(|i| eta.survival(node(i))).collect();
    let density_at = |x: f64| {
        // f = μ·F^c, averaged at hazard jumps.
        let h = match eta {
            Duration::PiecewiseHazard { edges, rates } if x > 0.0 => match near_break(edges, x) {
                Some(e) => {
                    let i = edges.iter().position(|&v| v == e).unwrap();
                    0.5 * (rates[i - 1] + rates.get(i).copied().unwrap_or(rates[i - 1]))
                }
                None => eta.hazard(x).unwrap(),
            },
            _ => eta.hazard(x).unwrap(),
        };
        h * eta.survival(x)
    };
    let f_dens: Vec<f64> = (0..=a_i + steps).map(|i| density_at(node(i))).collect();
    let mu: Vec<f64> = (0..=a_i).map(|i| f_dens[i] / fc[i].max(f64::MIN_POSITIVE)).collect();
    let lam: Vec<f64> = (0..=a_i).map(|i| step_node(&scn.lambda_tilde, node(i))).collect();
    let gam: Vec<f64> = (0..=a_r).map(|i| step_node(&scn.gamma_tilde, node(i))).collect();
    let gamma_tail = scn.gamma_tilde.last();
    let i0: Vec<f64> = (0..=a_i).map(|i| scn.i0_density.node(node(i))).collect();
    // One-sided right value of the initial density at age 0.
    let i0_right0 = scn.i0_density.right(0.0);

    // Initial-infected part of the recovery boundary: ∫ Ī(0,τ) f(t+τ)/F^c(τ) dτ.
    // One node past the support so a jump at its end is an interior node.
    let i0_len = ((i0_end / dt).ceil() as usize + 1).min(a_i);
    let initial_recovery = |n: usize| -> f64 {
        let vals: Vec<f64> = (0..=i0_len)
            .map(|i| if fc[i] > 0.0 { i0[i] * f_dens[n + i] / fc[i] } else { 0.0 })
            .collect();
        trapezoid(&vals, dt)
    };

    let mut r_dens = vec![0.0; a_r + 1];
    if let Some(r) = &scn.r0_density {
        for (i, v) in r_dens.iter_mut().enumerate().skip(1) {
            *v = r.node(node(i));
        }
    }
    let r_right0 = scn.r0_density.as_ref().map_or(0.0, |r| r.right(0.0));
    let mut bucket = 0.0;
    if let Some(r) = &scn.r0_density {
        // Mass already older than the window.
        bucket = r
            .values
            .iter()
            .zip(r.edges.windows(2))
            .map(|(v, w)| v * (w[1] - w[0].max(theta_max)).max(0.0))
            .sum();
    }

    let mut b_hist: Vec<f64> = Vec::with_capacity(steps + 1);
    let mut i_dens = vec![0.0; a_i + 1];
    let mut rows = Vec::with_capacity(steps + 1);
    let mut snapshots = Vec::new();
    let mut snap_iter = {
        let mut s = scn.snapshot_times.clone();
        s.sort_by(f64::total_cmp);
        s.into_iter().peekable()
    };
    let mut boundary_gap: f64 = 0.0;
    let mut truncated_mass = 0.0;
    let mut phi = 0.0;
    let mut f_prev = 0.0;
    let mut r_prev = r_dens.clone();
    let mut bucket_prev = bucket;

    for n in 0..=steps {
        // Known part of Ī(t_n, ·): every node except age 0.
        for i in 1..=a_i {
            i_dens[i] = if i > n {
                let j = i - n;
                if fc[j] > 0.0 {
                    i0[j] * fc[i] / fc[j]
                } else {
                    0.0
                }
            } else if i == n {
                0.5 * (i0_right0 + b_hist[0]) * fc[i]
            } else {
                b_hist[n - i] * fc[i]
            };
        }
        let f_known = dt * (lam[1..a_i].iter().zip(&i_dens[1..a_i]).map(|(l, v)| l * v).sum::<f64>()
            + 0.5 * lam[a_i] * i_dens[a_i]);
        let rec_known = initial_recovery(n)
            + if n > 0 {
                dt * ((1..n).map(|m| f_dens[n - m] * b_hist[m]).sum::<f64>() + 0.5 * f_dens[n] * b_hist[0])
            } else {
                0.0
            };

        // Fixed point for the boundary values at age 0.
        let mut b = if n == 0 { i0_right0 } else { b_hist[n - 1] };
        let (mut s_bar, mut s_frak) = (0.0, 0.0);
        let mut r_boundary = 0.0;
        for _ in 0..100 {
            let f = f_known + 0.5 * dt * lam[0] * b;
            let phi_n = if n == 0 { 0.0 } else { phi + 0.5 * dt * (f_prev + f) };
            s_bar = scn.s0 * (-phi_n).exp();
            r_boundary = rec_known + if n > 0 { 0.5 * dt * f_dens[0] * b } else { 0.0 };
            if n == 0 {
                r_dens[0] = 0.5 * (r_right0 + r_boundary);
                bucket = bucket_prev;
            } else {
                r_dens[0] = r_boundary;
                for i in 1..=a_r {
                    let expo = 0.5 * dt * (gam[i - 1] * f_prev + gam[i] * f);
                    r_dens[i] = r_prev[i - 1] * (-expo).exp();
                }
                let decay = (-0.5 * dt * gamma_tail * (f_prev + f)).exp();
                bucket = bucket_prev * decay + 0.5 * dt * (r_prev[a_r - 1] + r_prev[a_r]) * decay;
            }
            s_frak = s_bar + trapezoid_weighted(&r_dens, &gam, dt) + gamma_tail * bucket;
            let next = f * s_frak;
            let done = (next - b).abs() <= 1e-15 * next.abs().max(1e-300);
            b = next;
            if done {
                break;
            }
        }
        let mut f = f_known + 0.5 * dt * lam[0] * b;
        i_dens[0] = b;
        if n == 0 {
            // Age 0 at time 0 is the meeting point of initial and new infections.
            i_dens[0] = 0.5 * (i0_right0 + b);
            f = f_known + 0.5 * dt * lam[0] * i_dens[0];
        }
        b_hist.push(b);

        let integral_mu_i = trapezoid_weighted(&i_dens, &mu, dt);
        if n > 0 {
            boundary_gap = boundary_gap.max((r_boundary - integral_mu_i).abs());
        }
        if n > 0 && a_i < n + i0_len {
            truncated_mass += dt * i_dens[a_i];
        }
        let i_total = trapezoid(&i_dens, dt);
        let r_total = trapezoid(&r_dens, dt) + bucket;
        let mass = s_bar + i_total + r_total + truncated_mass;
        let row = PdeRow {
            t: node(n),
            s_bar,
            i_total,
            r_total,
            s_frak,
            f_frak: f,
            mass_residual: (mass - 1.0).abs(),
        };
        if row.mass_residual > scn.mass_tolerance {
            return Err(Error::MassLeak {
                time: row.t,
                leak: row.mass_residual,
                tolerance: scn.mass_tolerance,
            });
        }
        rows.push(row);
        while snap_iter.peek().is_some_and(|t| *t <= row.t + 0.5 * dt) {
            snap_iter.next();
            snapshots.push(Snapshot {
                t: row.t,
                i_density: i_dens.clone(),
                r_density: r_dens.clone(),
            });
        }
        if n > 0 {
            phi += 0.5 * dt * (f_prev + f);
        }
        f_prev = f;
        std::mem::swap(&mut r_prev, &mut r_dens);
        bucket_prev = bucket;
    }
    Ok(PdeSolution {
        dt,
        rows,
        snapshots,
        boundary_gap,
        truncated_mass,
    })
}

/// Sup-norm gaps between the PDE aggregates and the limit solver's (S̄, F̄).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Crosscheck {
    pub s_frak: f64,
    pub f_frak: f64,
}

pub fn crosscheck_against_limit(scn: &PdeScenario, horizon: f64, dt: f64) -> Result<Crosscheck> {
    crosscheck_with(scn, &LimitConfig::new(horizon, dt))
}

/// Like [`crosscheck_against_limit`] with full control over the limit solver.
pub fn crosscheck_with(scn: &PdeScenario, cfg: &LimitConfig) -> Result<Crosscheck> {
    let pde = solve_pde(scn, cfg.horizon, cfg.dt)?;
    let limit = solve_limit(&scn.kernel_law(), &scn.initial_law(), cfg)?;
    let d = coupling_distance(&pde.aggregates(), &limit.grid)?;
    let s_gap = pde
        .aggregates()
        .s_bar
        .iter()
        .zip(&limit.grid.s_bar)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(Crosscheck {
        s_frak: s_gap,
        f_frak: d.f_bar,
    })
}
