//! Integrator and coupling-engine properties across the four models.

use std::f64::consts::PI;

use asymcouple_core::binding::BindingSpec;
use asymcouple_core::engine::{integrate, integrate_coupled, shift_noise, unshift_noise, NoisePath};
use asymcouple_core::estimators::ensemble::simulate_units;
use asymcouple_core::harness::{run, ExperimentConfig};
use asymcouple_core::ModelSpec;

fn models() -> Vec<ModelSpec> {
    vec![
        ModelSpec::toy2d(),
        ModelSpec::ginzburg_landau(PI, 16, vec![1.0; 3]).unwrap(),
        ModelSpec::reaction_diffusion(PI, 8).unwrap(),
        ModelSpec::chain(2.0, 12, 2.0).unwrap(),
    ]
}

fn start(m: &ModelSpec, scale: f64) -> Vec<f64> {
    (0..m.dim).map(|i| scale * (1.0 + i as f64).recip() * if i % 2 == 0 { 1.0 } else { -0.5 }).collect()
}

/// Mean endpoint error against a fine reference driven by the same
/// Brownian path decreases at strong order one (additive noise).
#[test]
fn strong_order_by_richardson_on_frozen_noise() {
    let m = ModelSpec::toy2d();
    let x0 = [1.0, 0.5];
    let fine = 8192;
    let factors = [8usize, 16, 32];
    let mut err = [0.0; 3];
    let paths = 100;
    for p in 0..paths {
        let noise = NoisePath::sample(1, fine, 1.0 / fine as f64, 9, p).unwrap();
        let reference = integrate(&m, &x0, &noise).unwrap().states.pop().unwrap();
        for (k, f) in factors.iter().enumerate() {
            let coarse = integrate(&m, &x0, &noise.coarsen(*f).unwrap()).unwrap().states.pop().unwrap();
            let e: f64 = coarse.iter().zip(&reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            err[k] += e / paths as f64;
        }
    }
    let o1 = (err[1] / err[0]).log2();
    let o2 = (err[2] / err[1]).log2();
    assert!((0.8..1.3).contains(&o1) && (0.8..1.3).contains(&o2), "orders {o1:.3} {o2:.3}, errors {err:?}");
}

#[test]
fn shift_round_trip_every_model() {
    for m in models() {
        let b = BindingSpec::for_model(&m).unwrap();
        let noise = NoisePath::sample(m.noise_dim(), 300, 1e-2, 3, 1).unwrap();
        let x0 = start(&m, 0.5);
        let y0 = start(&m, 0.7);
        let tr = integrate_coupled(&m, &b, &x0, &y0, &noise).unwrap();
        let back = unshift_noise(&shift_noise(&noise, &tr).unwrap(), &tr).unwrap();
        for (a, c) in back.increments().iter().zip(noise.increments()) {
            assert!((a - c).abs() <= 1e-12, "{:?}: {a} vs {c}", m.id);
        }
    }
}

fn max_gap(m: &ModelSpec, noise: &NoisePath, x0: &[f64], y0: &[f64]) -> f64 {
    let b = BindingSpec::for_model(m).unwrap();
    let tr = integrate_coupled(m, &b, x0, y0, noise).unwrap();
    let y = integrate(m, y0, &shift_noise(noise, &tr).unwrap()).unwrap();
    y.states
        .iter()
        .zip(tr.y_path())
        .flat_map(|(a, c)| a.iter().zip(c).map(|(u, v)| (u - v).abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max)
}

/// Integrating y alone under the shifted noise reproduces the bound copy.
/// The chain propagates ρ with the model spectrum, so the two agree to
/// rounding; the other bindings move part of the linear term into the
/// explicit ρ update, so the two schemes agree to first order in dt.
#[test]
fn shifted_noise_reproduces_bound_copy() {
    let chain = ModelSpec::chain(0.0, 8, 2.0).unwrap();
    let noise = NoisePath::sample(1, 2000, 1e-3, 5, 0).unwrap();
    assert!(max_gap(&chain, &noise, &start(&chain, 0.8), &start(&chain, 0.4)) < 1e-9);

    for m in models().into_iter().filter(|m| m.id != chain.id) {
        let fine = NoisePath::sample(m.noise_dim(), 4000, 5e-4, 5, 0).unwrap();
        let (x0, y0) = (start(&m, 0.8), start(&m, 0.4));
        let g1 = max_gap(&m, &fine.coarsen(2).unwrap(), &x0, &y0);
        let g2 = max_gap(&m, &fine, &x0, &y0);
        let order = (g1 / g2).log2();
        assert!((0.8..1.3).contains(&order), "{:?}: gaps {g1:e} {g2:e}", m.id);
    }
}

/// The ρ equation carries no noise: a diagonal start stays on the diagonal
/// for any seed, while x itself depends on the seed.
#[test]
fn diagonal_invariance_for_any_seed() {
    for m in models() {
        let b = BindingSpec::for_model(&m).unwrap();
        let x0 = start(&m, 0.5);
        let mut ends = Vec::new();
        for seed in [1, 2] {
            let noise = NoisePath::sample(m.noise_dim(), 200, 1e-2, seed, 0).unwrap();
            let tr = integrate_coupled(&m, &b, &x0, &x0, &noise).unwrap();
            assert!(tr.rho_path.iter().flatten().all(|r| *r == 0.0), "{:?}", m.id);
            ends.push(tr.x_path.last().unwrap().clone());
        }
        assert_ne!(ends[0], ends[1]);
    }
}

/// The unit-interval supremum dominates V at both ends of the interval.
#[test]
fn w_sup_dominates_endpoints() {
    for m in models() {
        let x0 = start(&m, 1.0);
        let p = simulate_units(&m, &x0, 4, 1e-2, 8, 0).unwrap();
        for n in 0..4 {
            let ends = m.lyapunov(&p.states[n]).max(m.lyapunov(&p.states[n + 1]));
            assert!(p.w_sup[n] >= ends, "{:?} n={n}: {} < {ends}", m.id, p.w_sup[n]);
        }
    }
}

/// Girsanov martingale for the two spectral models (toy and chain are
/// covered by the acceptance preset).
#[test]
fn girsanov_mean_one_for_spectral_models() {
    for (head, y0) in [
        ("[model]\nid = \"ginzburg_landau\"\nmodes = 16\n", {
            let mut v = vec![0.0; 16];
            v[0] = 0.2;
            v[3] = -0.1;
            v
        }),
        ("[model]\nid = \"reaction_diffusion\"\nmodes = 8\n", {
            let mut v = vec![0.0; 16];
            v[0] = 0.2;
            v[9] = -0.1;
            v
        }),
    ] {
        let mut cfg = ExperimentConfig::parse(&format!(
            "{head}[simulation]\ndt = 0.01\nhorizon = 3\nensemble = 2000\nrecord_every = 1.0\n\
             [estimators]\ncontraction = false\n"
        ))
        .unwrap();
        cfg.simulation.y0 = Some(y0);
        let dir = tempfile::tempdir().unwrap();
        let out = run(&cfg, dir.path()).unwrap();
        let g = out.report.estimators.girsanov.unwrap();
        assert_eq!(g.overflowed, 0);
        assert!((g.mean - 1.0).abs() <= 3.0 * g.se, "{head}: {} +- {}", g.mean, g.se);
    }
}
