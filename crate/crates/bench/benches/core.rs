use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use asymcouple_core::binding::{BindingSpec, ZetaCascade};
use asymcouple_core::engine::{CoupledState, CoupledStepper};
use asymcouple_core::estimators::dual_lipschitz_distance;
use asymcouple_core::ModelSpec;

fn models() -> Vec<(&'static str, ModelSpec)> {
    vec![
        ("toy2d", ModelSpec::toy2d()),
        ("gl64", ModelSpec::ginzburg_landau(std::f64::consts::PI, 64, vec![1.0; 3]).unwrap()),
        ("rd32", ModelSpec::reaction_diffusion(std::f64::consts::PI, 32).unwrap()),
        ("chain12", ModelSpec::chain(2.0, 12, 2.0).unwrap()),
    ]
}

fn state(n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|i| scale / (1.0 + i as f64)).collect()
}

fn drift(c: &mut Criterion) {
    let mut g = c.benchmark_group("drift");
    for (name, m) in models() {
        let x = state(m.dim, 0.5);
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| m.drift(black_box(&x)).unwrap()));
    }
    g.finish();
}

fn coupled_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("coupled_step");
    for (name, m) in models() {
        let binding = BindingSpec::for_model(&m).unwrap();
        let mut stepper = CoupledStepper::new(&m, &binding, 1e-3).unwrap();
        let x0 = state(m.dim, 0.5);
        let y0 = state(m.dim, 0.6);
        let dw = vec![0.01; m.noise_dim()];
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter_batched_ref(
                || CoupledState::new(&x0, &y0),
                |s| stepper.step(s, black_box(&dw)).unwrap(),
                criterion::BatchSize::SmallInput,
            )
        });
    }
    g.finish();
}

fn cascade_build(c: &mut Criterion) {
    let mut g = c.benchmark_group("cascade_build");
    g.sample_size(20);
    for a2 in [0.0, 5.0] {
        g.bench_function(BenchmarkId::from_parameter(a2), |b| {
            b.iter(|| ZetaCascade::new(black_box(a2), 12).unwrap())
        });
    }
    g.finish();
}

fn dual_lipschitz(c: &mut Criterion) {
    let mut g = c.benchmark_group("dual_lipschitz");
    g.sample_size(10);
    for n in [50usize, 150, 300] {
        let a: Vec<Vec<f64>> =
            (0..n).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()]).collect();
        let b: Vec<Vec<f64>> =
            (0..n).map(|i| vec![(i as f64 * 0.29).sin() + 0.2, (i as f64 * 0.07).cos()]).collect();
        g.bench_function(BenchmarkId::from_parameter(n), |bch| {
            bch.iter(|| dual_lipschitz_distance(black_box(&a), black_box(&b)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, drift, coupled_step, cascade_build, dual_lipschitz);
criterion_main!(benches);
