//! Property-based checks over randomly drawn laws and scenarios.

use proptest::prelude::*;
use reinfect::abm::{Population, RunConfig};
use reinfect::equilibrium::evaluate_h;
use reinfect::kernel::{Atom, Duration, Family, GammaStar, InitialLaw, KernelLaw, StepFunction};
use reinfect::pde::{solve_pde, Density, PdeScenario};
use reinfect::rng::{stream, Tag};
use reinfect::scenario::Scenario;

fn duration() -> impl Strategy<Value = Duration> {
    prop_oneof![
        (0.3f64..3.0).prop_map(Duration::exponential),
        (0.1f64..3.0).prop_map(Duration::fixed),
        (0.0f64..1.0, 0.1f64..2.0).prop_map(|(low, w)| Duration::Uniform { low, high: low + w }),
        (0.2f64..2.0, 0.2f64..3.0, 0.2f64..2.0).prop_map(|(a, b, e)| Duration::PiecewiseHazard {
            edges: vec![0.0, e],
            rates: vec![a, b],
        }),
    ]
}

fn gamma_star() -> impl Strategy<Value = GammaStar> {
    prop_oneof![
        (0.05f64..=1.0).prop_map(GammaStar::Constant),
        (0.05f64..=1.0, 0.05f64..=1.0, 0.1f64..0.9).prop_map(|(a, b, w)| GammaStar::Mixture(vec![
            Atom { value: a, weight: w },
            Atom { value: b, weight: 1.0 - w },
        ])),
    ]
}

fn law() -> impl Strategy<Value = KernelLaw> {
    prop_oneof![
        (0.5f64..4.0, 0.3f64..3.0).prop_map(|(l, b)| KernelLaw::markov_sis(l, b)),
        (0.5f64..4.0, duration()).prop_map(|(lambda, eta)| Family::Sir { lambda, eta }.into()),
        (0.5f64..4.0, duration(), duration()).prop_map(|(lambda, eta, theta)| Family::Sirs {
            lambda,
            eta,
            theta
        }
        .into()),
        (0.5f64..4.0, duration(), duration(), gamma_star()).prop_map(|(lambda, eta, delay, gamma_star)| {
            Family::IndicatorGamma {
                lambda,
                eta,
                delay,
                gamma_star,
            }
            .into()
        }),
        (0.5f64..4.0, duration(), duration(), gamma_star(), 0.1f64..3.0, 1u32..8).prop_map(
            |(lambda, eta, delay, gamma_star, ramp, steps)| Family::GradualGamma {
                lambda,
                eta,
                delay,
                gamma_star,
                ramp,
                steps,
            }
            .into()
        ),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_paths_respect_the_kernel_constraints(law in law(), seed in 0u64..1000) {
        let mut rng = stream(seed, Tag::LawMonteCarlo, 0, 0);
        for _ in 0..50 {
            let p = law.sample(&mut rng);
            prop_assert!(p.check(law.lambda_star()).is_ok(), "{:?}", p.check(law.lambda_star()));
        }
    }

    #[test]
    fn survival_is_non_increasing(law in law()) {
        let eta = law.eta_law();
        let mut prev = 1.0;
        for i in 0..200 {
            let s = eta.survival(i as f64 * 0.05);
            prop_assert!(s <= prev && s >= 0.0);
            prev = s;
        }
    }

    #[test]
    fn h_is_monotone_and_starts_at_the_harmonic_threshold(law in law()) {
        let e_inv = law.e_inv_gamma_star();
        let h0 = evaluate_h(&law, 0.0);
        if e_inv.is_finite() {
            prop_assert!((h0 - e_inv).abs() <= 1e-12 * e_inv.max(1.0));
        }
        let mut prev = h0;
        for i in 1..50 {
            let h = evaluate_h(&law, i as f64 * 0.1);
            prop_assert!(h >= prev * (1.0 - 1e-12), "H decreased at {}", i);
            prev = h;
        }
    }

    #[test]
    fn simulated_compartments_partition_the_population(law in law(), i0 in 0.0f64..0.5, seed in 0u64..100) {
        let init = InitialLaw::new(i0);
        let mut pop = Population::new(200, &law, &init, seed).unwrap();
        let (g, log) = pop.run(&RunConfig { horizon: 5.0, dt: 0.25, event_limit: 10_000 }).unwrap();
        for k in 0..g.len() {
            prop_assert_eq!(g.u_bar[k] + g.i_bar[k], 1.0);
        }
        let (f, s) = pop.recompute();
        prop_assert!((f - pop.aggregate_f()).abs() <= 1e-9 * 200.0 * law.lambda_star());
        prop_assert!((s - pop.aggregate_s()).abs() <= 1e-9 * 200.0);
        prop_assert!(log.events.windows(2).all(|w| w[0].time < w[1].time));
    }

    #[test]
    fn scenarios_survive_a_round_trip(law in law(), i0 in 0.0f64..1.0, seed in 0u64..1_000_000) {
        let scn = Scenario {
            name: "rt".into(),
            horizon: 4.0,
            dt: 0.01,
            sample_dt: None,
            samples: 100,
            seed,
            mode: Default::default(),
            populations: vec![10, 100],
            replications: 12,
            event_limit: 5,
            output: None,
            tolerances: Default::default(),
            kernel: law,
            initial: InitialLaw::new(i0),
            auxiliary: None,
            pde: None,
        };
        let text = scn.to_toml_string().unwrap();
        let back = Scenario::from_toml_str(&text, "rt").unwrap();
        prop_assert_eq!(scn, back);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pde_densities_stay_non_negative_and_mass_is_kept(
        lam in 0.5f64..3.0,
        rate in 0.5f64..2.0,
        delay in 1usize..20,
        i0 in 0.05f64..0.5,
    ) {
        let scn = PdeScenario {
            lambda_tilde: StepFunction::constant(lam),
            gamma_tilde: StepFunction { breaks: vec![0.0, delay as f64 * 0.1], values: vec![0.0, 1.0] },
            infectious_period: Duration::exponential(rate),
            s0: 1.0 - i0,
            i0_density: Density { edges: vec![0.0, 0.5], values: vec![2.0 * i0] },
            r0_density: None,
            theta_max: None,
            mass_tolerance: 1e-2,
            snapshot_times: vec![1.0, 3.0, 5.0],
        };
        let sol = solve_pde(&scn, 5.0, 0.01).unwrap();
        prop_assert!(sol.max_mass_residual() <= 5e-3);
        for s in &sol.snapshots {
            prop_assert!(s.i_density.iter().chain(&s.r_density).all(|&v| v >= 0.0));
        }
    }
}
