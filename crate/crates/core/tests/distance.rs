//! Dual-Lipschitz distance against a direct LP, plus metric properties.

use asymcouple_core::estimators::ensemble::marginals;
use asymcouple_core::estimators::{
    bootstrap_band, dual_lipschitz_distance, dual_lipschitz_distance_with, DualLipschitzOptions, Resample,
};
use asymcouple_core::ModelSpec;
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use proptest::prelude::*;

fn d(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `max Σ w_i g_i` over values `g` on the union support, with `|g| ≤ m`,
/// `|g_i − g_j| ≤ l d_ij`, `l + m ≤ 1`.
fn lp_oracle(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut pts: Vec<(Vec<f64>, f64)> = Vec::new();
    for (set, w) in [(a, 1.0 / a.len() as f64), (b, -1.0 / b.len() as f64)] {
        for p in set {
            match pts.iter_mut().find(|(q, _)| q == p) {
                Some(e) => e.1 += w,
                None => pts.push((p.clone(), w)),
            }
        }
    }
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let g: Vec<_> = pts.iter().map(|(_, w)| lp.add_var(*w, (-1.0, 1.0))).collect();
    let l = lp.add_var(0.0, (0.0, 1.0));
    let m = lp.add_var(0.0, (0.0, 1.0));
    lp.add_constraint(&[(l, 1.0), (m, 1.0)][..], ComparisonOp::Le, 1.0);
    for (i, gi) in g.iter().enumerate() {
        lp.add_constraint(&[(*gi, 1.0), (m, -1.0)][..], ComparisonOp::Le, 0.0);
        lp.add_constraint(&[(*gi, -1.0), (m, -1.0)][..], ComparisonOp::Le, 0.0);
        for (j, gj) in g.iter().enumerate() {
            if i != j {
                let dij = d(&pts[i].0, &pts[j].0);
                lp.add_constraint(&[(*gi, 1.0), (*gj, -1.0), (l, -dij)][..], ComparisonOp::Le, 0.0);
            }
        }
    }
    lp.solve().unwrap().objective()
}

fn tight() -> DualLipschitzOptions {
    DualLipschitzOptions { s_tolerance: 1e-10, ..Default::default() }
}

fn dist(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    dual_lipschitz_distance_with(a, b, &tight()).unwrap().value
}

fn sample(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 1..=max)
}

#[test]
fn matches_lp_on_fixed_examples() {
    let a = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]];
    let b = vec![vec![0.5, 0.5], vec![3.0, 0.0]];
    let (got, want) = (dist(&a, &b), lp_oracle(&a, &b));
    assert!((got - want).abs() < 1e-7, "{got} vs {want}");
    let far = vec![vec![10.0, 10.0]];
    assert!((dist(&a, &far) - lp_oracle(&a, &far)).abs() < 1e-7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn agrees_with_lp(a in sample(5), b in sample(5)) {
        let (got, want) = (dist(&a, &b), lp_oracle(&a, &b));
        prop_assert!((got - want).abs() < 1e-6, "{} vs {}", got, want);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn symmetric(a in sample(8), b in sample(8)) {
        prop_assert!((dist(&a, &b) - dist(&b, &a)).abs() < 1e-9);
    }

    #[test]
    fn triangle(a in sample(6), b in sample(6), c in sample(6)) {
        prop_assert!(dist(&a, &c) <= dist(&a, &b) + dist(&b, &c) + 1e-9);
    }

    #[test]
    fn bounded_by_two_and_nonnegative(a in sample(8), b in sample(8)) {
        let v = dist(&a, &b);
        prop_assert!((-1e-12..=2.0 + 1e-12).contains(&v));
        prop_assert!(dist(&a, &a).abs() < 1e-12);
    }

    #[test]
    fn dirac_closed_form(x in prop::collection::vec(-5.0f64..5.0, 3), y in prop::collection::vec(-5.0f64..5.0, 3)) {
        let r = d(&x, &y);
        let v = dist(&[x], &[y]);
        prop_assert!((v - 2.0 * r / (2.0 + r)).abs() < 1e-9);
        prop_assert!(v <= r.min(2.0) + 1e-12);
    }
}

/// Two ensembles drawn from the same law sit at the bootstrap noise floor:
/// their distance is within a few pooled-bootstrap standard deviations of
/// the pooled mean.
#[test]
fn same_law_sits_at_noise_floor() {
    let m = ModelSpec::toy2d();
    let n = 150;
    let a = marginals(&m, &[1.0, 1.0], 3, 1e-2, 11, n).unwrap().pop().unwrap();
    let b = marginals(&m, &[1.0, 1.0], 3, 1e-2, 12, n).unwrap().pop().unwrap();
    let v = dual_lipschitz_distance(&a, &b).unwrap();
    let band = bootstrap_band(&a, &b, 8, 5, Resample::Pooled, &DualLipschitzOptions::default()).unwrap();
    assert!(v <= band.mean + 4.0 * band.std.max(0.01), "{v} vs floor {} +- {}", band.mean, band.std);
    // A displaced law is clearly above the floor.
    let shifted: Vec<Vec<f64>> = b.iter().map(|p| vec![p[0] + 1.0, p[1] + 1.0]).collect();
    let w = dual_lipschitz_distance(&a, &shifted).unwrap();
    assert!(w > band.mean + 4.0 * band.std, "{w}");
}
