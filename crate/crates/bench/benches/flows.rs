use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use expflow::certificates::LemmaCoefficients;
use expflow::{
    build_prox, certify_fb2, integrate, suggest_constants_fb2, ProxSpec, StepControl, TimeGrid, Vector,
};
use expflow_bench::{fb1, fb2, grad2, problem, start};

fn prox(c: &mut Criterion) {
    let mut group = c.benchmark_group("prox");
    let x = Vector::from_fn(100, |i, _| (i as f64 * 0.37).sin() * 3.0);
    let specs = [
        ("l1", ProxSpec::L1Norm { weight: 0.7 }),
        ("box", ProxSpec::BoxIndicator { lo: vec![-1.0; 100], hi: vec![1.0; 100] }),
        ("sq_norm", ProxSpec::ScaledSqNorm { c: 1.3 }),
    ];
    for (name, spec) in specs {
        let p = build_prox(spec).unwrap();
        group.bench_function(name, |b| b.iter(|| p.apply(black_box(0.5), black_box(&x))));
    }
    group.finish();
}

fn rhs(c: &mut Criterion) {
    let mut group = c.benchmark_group("rhs");
    let skew = problem("skew-rotation");
    let lasso = problem("sc-lasso-20d");
    let cases = [
        ("fb1/skew-rotation", fb1(&skew, 1.0), 2),
        ("fb1/sc-lasso-20d", fb1(&lasso, 0.05), 20),
        ("fb2/skew-rotation", fb2(&skew), 4),
    ];
    for (name, flow, n) in cases {
        let y = Vector::from_fn(n, |i, _| 1.0 + i as f64 * 0.1);
        group.bench_function(name, |b| b.iter(|| flow.state_derivative(black_box(1.0), black_box(&y))));
    }
    group.finish();
}

fn integration(c: &mut Criterion) {
    let mut group = c.benchmark_group("integrate");
    group.sample_size(20);
    let skew = problem("skew-rotation");
    let lasso = problem("sc-lasso-20d");
    let scalar = problem("scalar-quadratic");
    let adaptive = StepControl::default();
    let runs = [
        ("fb1/skew-rotation", fb1(&skew, 1.0), start(2, 1), 20.0),
        ("fb1/sc-lasso-20d", fb1(&lasso, 0.05), start(20, 1), 30.0),
        ("fb2/skew-rotation", fb2(&skew), start(2, 2), 23.0),
        ("grad2/scalar-quadratic", grad2(&scalar), start(1, 2), 23.0),
    ];
    for (name, flow, init, t_end) in runs {
        group.bench_with_input(BenchmarkId::new("dopri5", name), &t_end, |b, &t| {
            b.iter(|| integrate(&flow, &init, t, adaptive).unwrap())
        });
    }
    let flow = fb1(&skew, 1.0);
    let init = start(2, 1);
    group.bench_function("rk4/fb1/skew-rotation", |b| {
        b.iter(|| integrate(&flow, &init, 20.0, StepControl::Fixed { h: 1e-2 }).unwrap())
    });
    group.finish();
}

fn certification(c: &mut Criterion) {
    let mut group = c.benchmark_group("certify");
    let grid = TimeGrid::with_horizon(23.0).unwrap();
    group.bench_function("fb2/suggest+certify", |b| {
        b.iter(|| {
            let s = suggest_constants_fb2(black_box(1.0), 1.0, 0.5, 0.5).unwrap();
            certify_fb2(1.0, 1.0, 0.5, 0.5, &s.schedule(), &grid).unwrap()
        })
    });
    let sched = expflow::Schedule::constant(40.0, Some(11.0));
    group.bench_function("fb2/lemma-hypotheses", |b| {
        b.iter(|| {
            let coeffs = LemmaCoefficients::fb2(1.0, 1.0, 0.5, 0.5, &sched, &grid).unwrap();
            coeffs.check_hypotheses(&grid)
        })
    });
    group.finish();
}

criterion_group!(benches, prox, rhs, integration, certification);
criterion_main!(benches);
