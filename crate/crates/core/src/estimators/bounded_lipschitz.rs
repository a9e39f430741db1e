//! Dual-Lipschitz (bounded-Lipschitz) distance between empirical measures.
//!
//! The quantity is `sup { ∫g dμ_a − ∫g dμ_b : sup|g| + Lip(g) ≤ 1 }`. For a
//! fixed split `sup|g| ≤ s`, `Lip(g) ≤ 1 − s`, the supremum is the optimal
//! transport cost for the metric `min((1 − s)d, 2s)`, and as a function of
//! `s` it is concave. With uniform weights on equal-size samples the optimal
//! plan is a permutation, so each evaluation is an assignment problem; the
//! outer maximization is a golden-section search.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CAP: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualLipschitzOptions {
    /// Maximum points per side.
    pub cap: usize,
    /// Subsample larger inputs down to `cap` with this seed; without a seed
    /// oversized inputs are an error.
    pub subsample_seed: Option<u64>,
    /// Width of the final bracket on the split `s`.
    pub s_tolerance: f64,
}

impl Default for DualLipschitzOptions {
    fn default() -> Self {
        Self { cap: DEFAULT_CAP, subsample_seed: None, s_tolerance: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualLipschitz {
    pub value: f64,
    /// Maximizing sup-norm budget.
    pub split: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub subsampled: bool,
}

/// Euclidean distance.
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Distance with default options.
pub fn dual_lipschitz_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    Ok(dual_lipschitz_distance_with(a, b, &DualLipschitzOptions::default())?.value)
}

pub fn dual_lipschitz_distance_with(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    opts: &DualLipschitzOptions,
) -> Result<DualLipschitz> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let dim = a[0].len();
    if let Some(bad) = a.iter().chain(b).find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
    }
    let (n_a, n_b) = (a.len(), b.len());
    let mut subsampled = false;
    // Both sides use the same index stream so that paired samples stay paired.
    let mut pick = |s: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        if s.len() <= opts.cap {
            return Ok(s.to_vec());
        }
        let seed = opts.subsample_seed.ok_or(Error::SampleTooLarge { size: s.len(), cap: opts.cap })?;
        subsampled = true;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = index::sample(&mut rng, s.len(), opts.cap).into_vec();
        idx.sort_unstable();
        Ok(idx.into_iter().map(|i| s[i].clone()).collect())
    };
    let a = pick(a)?;
    let b = pick(b)?;
    // Equal sizes via replication to the least common multiple.
    let l = lcm(a.len(), b.len());
    if l > 2 * opts.cap.max(a.len()).max(b.len()) {
        return Err(Error::SampleTooLarge { size: l, cap: 2 * opts.cap });
    }
    let (ra, rb) = (replicate(&a, l), replicate(&b, l));
    let mut dist = vec![0.0; l * l];
    for i in 0..l {
        for j in 0..l {
            dist[i * l + j] = euclidean(ra[i], rb[j]);
        }
    }
    let mut solver = Assignment::new(l);
    let mut cost = vec![0.0; l * l];
    let mut eval = |s: f64| -> f64 {
        for (c, d) in cost.iter_mut().zip(&dist) {
            *c = ((1.0 - s) * d).min(2.0 * s);
        }
        solver.solve(&cost) / l as f64
    };
    let (split, value) = golden_max(&mut eval, 0.0, 1.0, opts.s_tolerance.max(1e-15));
    Ok(DualLipschitz { value: value.max(0.0), split, n_a, n_b, subsampled })
}

fn replicate(s: &[Vec<f64>], l: usize) -> Vec<&[f64]> {
    let k = l / s.len();
    s.iter().flat_map(|p| std::iter::repeat_n(p.as_slice(), k)).collect()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Maximizes a concave function on `[lo, hi]`; returns `(argmax, max)`.
fn golden_max<F: FnMut(f64) -> f64>(f: &mut F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
            if f2 > best.1 {
                best = (x2, f2);
            }
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
            if f1 > best.1 {
                best = (x1, f1);
            }
        }
    }
    best
}

/// Square assignment by the shortest-augmenting-path Hungarian method with
/// potentials. Buffers are kept between solves.
struct Assignment {
    n: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    p: Vec<usize>,
    way: Vec<usize>,
    minv: Vec<f64>,
    used: Vec<bool>,
}

impl Assignment {
    fn new(n: usize) -> Self {
        Self {
            n,
            u: vec![0.0; n + 1],
            v: vec![0.0; n + 1],
            p: vec![0; n + 1],
            way: vec![0; n + 1],
            minv: vec![0.0; n + 1],
            used: vec![false; n + 1],
        }
    }

    /// Minimum total cost of a perfect matching; `cost` is row-major `n × n`.
    fn solve(&mut self, cost: &[f64]) -> f64 {
        let n = self.n;
        self.u.iter_mut().for_each(|x| *x = 0.0);
        self.v.iter_mut().for_each(|x| *x = 0.0);
        self.p.iter_mut().for_each(|x| *x = 0);
        for i in 1..=n {
            self.p[0] = i;
            let mut j0 = 0usize;
            self.minv.iter_mut().for_each(|x| *x = f64::INFINITY);
            self.used.iter_mut().for_each(|x| *x = false);
            loop {
                self.used[j0] = true;
                let i0 = self.p[j0];
                let row = &cost[(i0 - 1) * n..i0 * n];
                let ui0 = self.u[i0];
                let mut delta = f64::INFINITY;
                let mut j1 = 0usize;
                for j in 1..=n {
                    if !self.used[j] {
                        let cur = row[j - 1] - ui0 - self.v[j];
                        if cur < self.minv[j] {
                            self.minv[j] = cur;
                            self.way[j] = j0;
                        }
                        if self.minv[j] < delta {
                            delta = self.minv[j];
                            j1 = j;
                        }
                    }
                }
                for j in 0..=n {
                    if self.used[j] {
                        self.u[self.p[j]] += delta;
                        self.v[j] -= delta;
                    } else {
                        self.minv[j] -= delta;
                    }
                }
                j0 = j1;
                if self.p[j0] == 0 {
                    break;
                }
            }
            loop {
                let j1 = self.way[j0];
                self.p[j0] = self.p[j1];
                j0 = j1;
                if j0 == 0 {
                    break;
                }
            }
        }
        (1..=n).map(|j| cost[(self.p[j] - 1) * n + (j - 1)]).sum()
    }
}

/// How bootstrap replicates are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resample {
    /// Both replicates from the pooled sample: the distribution of the
    /// distance when the two laws coincide (the Monte-Carlo noise floor).
    Pooled,
    /// Each side from its own sample: the spread of the estimate itself.
    Separate,
    /// Index pairs `(a_i, b_i)` resampled together, for samples driven by
    /// common noise; requires equal sizes.
    Paired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapBand {
    pub replicates: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// Empirical 95% quantile of the replicates.
    pub q95: f64,
}

pub fn bootstrap_band(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    replicates: usize,
    seed: u64,
    mode: Resample,
    opts: &DualLipschitzOptions,
) -> Result<BootstrapBand> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    if replicates < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: replicates });
    }
    if mode == Resample::Paired && a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    let pooled: Vec<Vec<f64>> = a.iter().chain(b).cloned().collect();
    let mut out = Vec::with_capacity(replicates);
    for r in 0..replicates {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let mut draw = |src: &[Vec<f64>], n: usize| -> Vec<Vec<f64>> {
            (0..n).map(|_| src[rng.random_range(0..src.len())].clone()).collect()
        };
        let (ra, rb) = match mode {
            Resample::Pooled => (draw(&pooled, a.len()), draw(&pooled, b.len())),
            Resample::Separate => (draw(a, a.len()), draw(b, b.len())),
            Resample::Paired => {
                let idx: Vec<usize> = (0..a.len()).map(|_| rng.random_range(0..a.len())).collect();
                (idx.iter().map(|&i| a[i].clone()).collect(), idx.iter().map(|&i| b[i].clone()).collect())
            }
        };
        out.push(dual_lipschitz_distance_with(&ra, &rb, opts)?.value);
    }
    let n = out.len() as f64;
    let mean = out.iter().sum::<f64>() / n;
    let std = (out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = out.clone();
    sorted.sort_by(f64::total_cmp);
    let idx = ((0.95 * n).ceil() as usize).clamp(1, sorted.len()) - 1;
    Ok(BootstrapBand { q95: sorted[idx], replicates: out, mean, std })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight() -> DualLipschitzOptions {
        DualLipschitzOptions { s_tolerance: 1e-12, ..Default::default() }
    }

    #[test]
    fn dirac_closed_form() {
        for d in [0.1, 0.5, 1.0, 2.0, 7.5] {
            let a = vec![vec![0.0, 0.0]];
            let b = vec![vec![d, 0.0]];
            let r = dual_lipschitz_distance_with(&a, &b, &tight()).unwrap();
            assert!((r.value - 2.0 * d / (2.0 + d)).abs() < 1e-10, "d={d}");
            assert!((r.split - d / (2.0 + d)).abs() < 1e-6);
            assert!(r.value <= d.min(2.0));
        }
    }

    #[test]
    fn identical_samples_are_zero() {
        let a: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.1, (i as f64).sin()]).collect();
        assert_eq!(dual_lipschitz_distance(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b.reverse();
        assert!(dual_lipschitz_distance(&a, &b).unwrap().abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let a = vec![vec![0.0]];
        assert_eq!(dual_lipschitz_distance(&a, &[]), Err(Error::EmptySample));
        assert!(matches!(
            dual_lipschitz_distance(&a, &[vec![0.0, 1.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
        let big: Vec<Vec<f64>> = (0..301).map(|i| vec![i as f64]).collect();
        assert!(matches!(dual_lipschitz_distance(&big, &a), Err(Error::SampleTooLarge { .. })));
        let opts = DualLipschitzOptions { subsample_seed: Some(1), ..Default::default() };
        let r = dual_lipschitz_distance_with(&big, &big[..300], &opts).unwrap();
        assert!(r.subsampled);
        assert_eq!(r.n_a, 301);
    }

    #[test]
    fn assignment_small_brute_force() {
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let mut s = Assignment::new(3);
        // Best permutation: (0→1, 1→0, 2→2) = 1 + 2 + 2.
        assert_eq!(s.solve(&cost), 5.0);
    }

    #[test]
    fn golden_section_finds_tent_peak() {
        let mut f = |s: f64| (0.3 - (s - 0.37).abs()).min(0.25);
        let (_, v) = golden_max(&mut f, 0.0, 1.0, 1e-10);
        assert!((v - 0.25).abs() < 1e-9);
        let mut g = |s: f64| -(s - 0.8) * (s - 0.8);
        let (x, _) = golden_max(&mut g, 0.0, 1.0, 1e-10);
        assert!((x - 0.8).abs() < 1e-8);
    }

    #[test]
    fn bootstrap_floor_deterministic() {
        let a: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 * 0.7).sin()]).collect();
        let b: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 * 1.3).cos()]).collect();
        let opts = DualLipschitzOptions::default();
        let x = bootstrap_band(&a, &b, 10, 3, Resample::Pooled, &opts).unwrap();
        let y = bootstrap_band(&a, &b, 10, 3, Resample::Pooled, &opts).unwrap();
        assert_eq!(x, y);
        assert!(x.q95 >= x.mean);
        assert!(bootstrap_band(&a, &b, 1, 3, Resample::Separate, &opts).is_err());
    }
}
