use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use reinfect::abm::{simulate, RunConfig};
use reinfect::equilibrium::evaluate_h;
use reinfect::kernel::{Atom, GammaStar};
use reinfect::lln::{solve_limit, ExpectationMode, LimitConfig};
use reinfect::{Duration, Family, InitialLaw, KernelLaw};

fn sirs() -> KernelLaw {
    Family::Sirs {
        lambda: 2.0,
        eta: Duration::exponential(1.0),
        theta: Duration::exponential(1.0),
    }
    .into()
}

fn gradual() -> KernelLaw {
    Family::GradualGamma {
        lambda: 2.0,
        eta: Duration::exponential(1.0),
        delay: Duration::fixed(1.0),
        gamma_star: GammaStar::Mixture(vec![
            Atom { value: 0.5, weight: 0.5 },
            Atom { value: 1.0, weight: 0.5 },
        ]),
        ramp: 2.0,
        steps: 10,
    }
    .into()
}

fn abm(c: &mut Criterion) {
    let law = sirs();
    let init = InitialLaw::new(0.3);
    let cfg = RunConfig {
        horizon: 10.0,
        dt: 0.1,
        event_limit: 0,
    };
    let mut group = c.benchmark_group("abm_sirs_T10");
    group.sample_size(10);
    for n in [1_000usize, 10_000] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| simulate(n, &law, &init, 7, &cfg).unwrap())
        });
    }
    group.finish();
}

fn limit(c: &mut Criterion) {
    let init = InitialLaw::new(0.3);
    let mut group = c.benchmark_group("limit_T20");
    group.sample_size(10);
    let exact = LimitConfig::new(20.0, 0.01);
    group.bench_function("exact_sirs", |b| {
        b.iter(|| solve_limit(&sirs(), &init, &exact).unwrap())
    });
    let sampled = LimitConfig {
        samples: 200,
        mode: ExpectationMode::MonteCarlo,
        ..LimitConfig::new(20.0, 0.02)
    };
    group.bench_function("monte_carlo_gradual", |b| {
        b.iter(|| solve_limit(&gradual(), &init, &sampled).unwrap())
    });
    group.finish();
}

fn h_function(c: &mut Criterion) {
    let laws = [("sirs", sirs()), ("gradual", gradual())];
    let mut group = c.benchmark_group("evaluate_h");
    for (name, law) in &laws {
        group.bench_function(*name, |b| b.iter(|| evaluate_h(law, black_box(0.7))));
    }
    group.finish();
}

criterion_group!(benches, abm, limit, h_function);
criterion_main!(benches);
