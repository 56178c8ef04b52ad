//! The age-structured PDE against the limit solver.

use reinfect::kernel::{Duration, StepFunction};
use reinfect::lln::{solve_limit, LimitConfig, SolverPath};
use reinfect::pde::{crosscheck_against_limit, solve_pde, Density, PdeScenario};

fn general() -> PdeScenario {
    PdeScenario {
        lambda_tilde: StepFunction {
            breaks: vec![0.0, 0.5, 1.0, 1.5],
            values: vec![1.0, 3.0, 2.0, 1.0],
        },
        gamma_tilde: StepFunction {
            breaks: vec![0.0, 0.8],
            values: vec![0.0, 0.6],
        },
        infectious_period: Duration::PiecewiseHazard {
            edges: vec![0.0, 1.0],
            rates: vec![0.5, 1.5],
        },
        s0: 0.7,
        i0_density: Density {
            edges: vec![0.0, 0.5],
            values: vec![0.4],
        },
        r0_density: Some(Density {
            edges: vec![0.0, 1.0],
            values: vec![0.1],
        }),
        theta_max: None,
        mass_tolerance: 1e-2,
        snapshot_times: vec![],
    }
}

#[test]
fn discrepancy_shrinks_under_refinement() {
    let scn = general();
    let limit = solve_limit(&scn.kernel_law(), &scn.initial_law(), &LimitConfig::new(1.0, 0.1)).unwrap();
    assert_eq!(limit.path, SolverPath::Exact);
    let gaps: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| {
            let c = crosscheck_against_limit(&scn, 15.0, dt).unwrap();
            c.f_frak.max(c.s_frak)
        })
        .collect();
    for w in gaps.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.6..2.6).contains(&ratio), "gaps {gaps:?}");
    }
}

#[test]
fn zero_epidemic_has_no_discrepancy() {
    let mut scn = general();
    scn.s0 = 1.0;
    scn.i0_density.values = vec![0.0];
    scn.r0_density = None;
    let c = crosscheck_against_limit(&scn, 5.0, 0.05).unwrap();
    assert_eq!((c.s_frak, c.f_frak), (0.0, 0.0));
}

#[test]
fn without_returning_susceptibility_recovered_do_not_count() {
    let mut scn = general();
    scn.gamma_tilde = StepFunction::constant(0.0);
    let sol = solve_pde(&scn, 5.0, 0.01).unwrap();
    for r in &sol.rows {
        assert_eq!(r.s_frak, r.s_bar);
    }
}
