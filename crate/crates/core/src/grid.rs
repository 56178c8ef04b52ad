//! Uniform time grids carrying aggregate trajectories.

use std::io::Write;

use crate::error::{config_err, Error, Result};

/// Number of steps of size `dt` covering `[0, horizon]`; the horizon must be a
/// whole number of steps.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(config_err("dt", "must be positive and finite"));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(config_err("horizon", "must be positive and finite"));
    }
    let n = (horizon / dt).round();
    if (n * dt - horizon).abs() > 1e-9 * horizon {
        return Err(config_err("dt", format!("horizon {horizon} is not a multiple of dt {dt}")));
    }
    Ok(n as usize)
}

/// Aggregates sampled at `t_k = k·dt`, `k = 0..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryGrid {
    pub dt: f64,
    pub f_bar: Vec<f64>,
    pub s_bar: Vec<f64>,
    pub i_bar: Vec<f64>,
    pub u_bar: Vec<f64>,
    /// Present for limit-solver output only.
    pub conservation_residual: Option<Vec<f64>>,
}

impl TrajectoryGrid {
    pub fn with_steps(dt: f64, steps: usize) -> Self {
        TrajectoryGrid {
            dt,
            f_bar: vec![0.0; steps + 1],
            s_bar: vec![0.0; steps + 1],
            i_bar: vec![0.0; steps + 1],
            u_bar: vec![0.0; steps + 1],
            conservation_residual: None,
        }
    }

    pub fn len(&self) -> usize {
        self.f_bar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f_bar.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.time(k))
    }

    pub fn last(&self) -> usize {
        self.len() - 1
    }

    pub fn max_residual(&self) -> Option<f64> {
        self.conservation_residual
            .as_ref()
            .map(|r| r.iter().copied().fold(0.0, f64::max))
    }

    pub fn min_f_bar(&self) -> f64 {
        self.f_bar.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn ensure_same_grid(&self, other: &TrajectoryGrid) -> Result<()> {
        if self.len() != other.len() || (self.dt - other.dt).abs() > 1e-12 * self.dt {
            return Err(Error::GridMismatch(format!(
                "({} points, dt {}) vs ({} points, dt {})",
                self.len(),
                self.dt,
                other.len(),
                other.dt
            )));
        }
        Ok(())
    }

    /// Values at every `stride`-th point (the last point is always kept).
    pub fn coarsen(&self, stride: usize) -> Result<TrajectoryGrid> {
        if stride == 0 || !(self.len() - 1).is_multiple_of(stride) {
            return Err(Error::GridMismatch(format!(
                "stride {stride} does not divide {} steps",
                self.len() - 1
            )));
        }
        let pick = |v: &Vec<f64>| v.iter().step_by(stride).copied().collect::<Vec<_>>();
        Ok(TrajectoryGrid {
            dt: self.dt * stride as f64,
            f_bar: pick(&self.f_bar),
            s_bar: pick(&self.s_bar),
            i_bar: pick(&self.i_bar),
            u_bar: pick(&self.u_bar),
            conservation_residual: self.conservation_residual.as_ref().map(pick),
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "t,F_bar,S_bar,I_bar,U_bar")?;
        if self.conservation_residual.is_some() {
            write!(w, ",conservation_residual")?;
        }
        writeln!(w)?;
        for k in 0..self.len() {
            write!(
                w,
                "{},{},{},{},{}",
                self.time(k),
                self.f_bar[k],
                self.s_bar[k],
                self.i_bar[k],
                self.u_bar[k]
            )?;
            if let Some(r) = &self.conservation_residual {
                write!(w, ",{}", r[k])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Sup-norm distance between two trajectories on the same grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Distance {
    pub f_bar: f64,
    pub i_bar: f64,
}

/// `sup_k |F̄ᴺ − F̄|` and `sup_k |Īᴺ − Ī|`.
pub fn coupling_distance(run: &TrajectoryGrid, limit: &TrajectoryGrid) -> Result<Distance> {
    run.ensure_same_grid(limit)?;
    let sup = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Ok(Distance {
        f_bar: sup(&run.f_bar, &limit.f_bar),
        i_bar: sup(&run.i_bar, &limit.i_bar),
    })
}

/// The a-priori coupling bound (λ*/√N)·T·exp(2λ*T).
pub fn coupling_bound(lambda_star: f64, n: usize, horizon: f64) -> f64 {
    lambda_star / (n as f64).sqrt() * horizon * (2.0 * lambda_star * horizon).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_count_requires_whole_steps() {
        assert_eq!(step_count(40.0, 0.01).unwrap(), 4000);
        assert_eq!(step_count(80.0, 0.005).unwrap(), 16000);
        assert!(step_count(1.0, 0.3).is_err());
        assert!(step_count(1.0, 0.0).is_err());
    }

    #[test]
    fn distance_of_identical_grids_is_zero() {
        let mut g = TrajectoryGrid::with_steps(0.5, 4);
        g.f_bar = vec![0.1, 0.3, 0.2, 0.5, 0.4];
        let d = coupling_distance(&g, &g).unwrap();
        assert_eq!(d, Distance { f_bar: 0.0, i_bar: 0.0 });
        let other = TrajectoryGrid::with_steps(0.5, 3);
        assert!(coupling_distance(&g, &other).is_err());
    }

    #[test]
    fn csv_layout() {
        let mut g = TrajectoryGrid::with_steps(0.5, 1);
        g.conservation_residual = Some(vec![0.0, 1e-3]);
        let mut out = Vec::new();
        g.write_csv(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert_eq!(
            s,
            "t,F_bar,S_bar,I_bar,U_bar,conservation_residual\n0,0,0,0,0,0\n0.5,0,0,0,0,0.001\n"
        );
        let c = g.coarsen(1).unwrap();
        assert_eq!(c, g);
    }
}
