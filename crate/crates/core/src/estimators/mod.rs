//! Statistical estimators: contraction rates, distances between laws,
//! Lyapunov drift coefficients, `A_{x,k}` frequencies and density
//! diagnostics.

pub mod bounded_lipschitz;
pub mod diagnostics;
pub mod ensemble;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::NoiseSource;
use crate::error::{Error, Result};
use crate::models::{ModelId, ModelSpec};
pub use bounded_lipschitz::{
    bootstrap_band, dual_lipschitz_distance, dual_lipschitz_distance_with, BootstrapBand, DualLipschitz,
    DualLipschitzOptions, Resample,
};
pub use diagnostics::{
    axk_frequency, axk_sweep, density_diagnostics, AxkRow, AxkTable, DensityRow, DensityTable,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionFit {
    pub c: f64,
    pub gamma: f64,
    /// RMS of the log residuals.
    pub residual: f64,
    pub gamma_se: f64,
    pub points: usize,
}

/// Least squares of `log v = log C − γt`.
pub fn fit_contraction(series: &[(f64, f64)]) -> Result<ContractionFit> {
    if series.len() < 5 {
        return Err(Error::TooFewPoints { needed: 5, got: series.len() });
    }
    if let Some(i) = series.iter().position(|&(_, v)| !(v > 0.0)) {
        return Err(Error::LogOfNonPositive(i));
    }
    let n = series.len() as f64;
    let tm = series.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = series.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = series.iter().map(|p| (p.0 - tm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("contraction fit needs distinct times".into()));
    }
    let sxy: f64 = series.iter().map(|p| (p.0 - tm) * (p.1.ln() - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let ssr: f64 = series.iter().map(|p| (p.1.ln() - intercept - slope * p.0).powi(2)).sum();
    Ok(ContractionFit {
        c: intercept.exp(),
        gamma: -slope,
        residual: (ssr / n).sqrt(),
        gamma_se: (ssr / (n - 2.0) / sxx).sqrt(),
        points: series.len(),
    })
}

/// Smallest `(a, b) ≥ 0` in the sense of `Σ_i (a·v_i + b)` with
/// `a·v_i + b ≥ u_i` for all `i`. A two-variable LP, solved by enumerating
/// vertices.
pub fn fit_affine_bound(v: &[f64], u: &[f64]) -> Result<(f64, f64)> {
    if v.is_empty() || v.len() != u.len() {
        return Err(Error::TooFewPoints { needed: 1, got: v.len().min(u.len()) });
    }
    let sv: f64 = v.iter().sum();
    let n = v.len() as f64;
    let feasible = |a: f64, b: f64| {
        a >= 0.0 && b >= 0.0 && v.iter().zip(u).all(|(vi, ui)| a * vi + b >= ui - 1e-12 * (1.0 + ui.abs()))
    };
    let mut cands = vec![(0.0, u.iter().cloned().fold(0.0, f64::max))];
    if v.iter().zip(u).all(|(vi, ui)| *vi > 0.0 || *ui <= 0.0) {
        let a = v.iter().zip(u).filter(|(vi, _)| **vi > 0.0).map(|(vi, ui)| ui / vi).fold(0.0, f64::max);
        cands.push((a, 0.0));
    }
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            if (v[i] - v[j]).abs() > 1e-14 * (1.0 + v[i].abs()) {
                let a = (u[i] - u[j]) / (v[i] - v[j]);
                cands.push((a, u[i] - a * v[i]));
            }
        }
    }
    cands
        .into_iter()
        .filter(|&(a, b)| feasible(a, b))
        .map(|(a, b)| (a, b.max(0.0)))
        .min_by(|p, q| (p.0 * sv + n * p.1).total_cmp(&(q.0 * sv + n * q.1)))
        .ok_or(Error::NoDissipativeFit(f64::INFINITY))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeEstimate {
    pub v0: f64,
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovFit {
    /// Bound dominating every probe mean plus two standard errors.
    pub a: f64,
    pub b: f64,
    /// Fit to the means alone; with `(a, b)` brackets the estimate.
    pub a_central: f64,
    pub b_central: f64,
    pub probes: Vec<ProbeEstimate>,
}

/// Monte Carlo estimate of `E V(Φ(x, ·))` after one unit of time for each
/// probe, then the dominating affine fit. Probe `p`, sample `s` draws from
/// stream `p · samples + s`.
pub fn lyapunov_fit(
    model: &ModelSpec,
    probes: &[Vec<f64>],
    samples_per_probe: usize,
    dt: f64,
    seed: u64,
) -> Result<LyapunovFit> {
    if samples_per_probe < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: samples_per_probe });
    }
    let mut est = Vec::with_capacity(probes.len());
    for (p, x0) in probes.iter().enumerate() {
        let vals = ensemble::par_collect(samples_per_probe, |s| {
            let stream = (p * samples_per_probe + s) as u64;
            let path = ensemble::simulate_units(model, x0, 1, dt, seed, stream)?;
            Ok(model.lyapunov(&path.states[1]))
        })?;
        let m = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / m;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        est.push(ProbeEstimate { v0: model.lyapunov(x0), mean, se: (var / m).sqrt() });
    }
    let v: Vec<f64> = est.iter().map(|e| e.v0).collect();
    let upper: Vec<f64> = est.iter().map(|e| e.mean + 2.0 * e.se).collect();
    let means: Vec<f64> = est.iter().map(|e| e.mean).collect();
    let (a, b) = fit_affine_bound(&v, &upper)?;
    let (a_central, b_central) = fit_affine_bound(&v, &means)?;
    if a >= 1.0 {
        return Err(Error::NoDissipativeFit(a));
    }
    Ok(LyapunovFit { a, b, a_central, b_central, probes: est })
}

/// Probe states at `count` radii spread geometrically up to `3R`, where `R`
/// is the model's dissipativity radius, plus the origin. Directions are
/// random Gaussian.
pub fn default_probes(model: &ModelSpec, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let r_max = 3.0 * model.dissipativity_radius().max(1.0);
    let mut src = NoiseSource::new(1.0, seed, u64::MAX)?;
    let mut out = vec![vec![0.0; model.dim]];
    for i in 1..count {
        let r = r_max * (0.05f64).powf(1.0 - i as f64 / (count - 1).max(1) as f64);
        let mut d = vec![0.0; model.dim];
        src.fill(&mut d);
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        out.push(d.iter().map(|v| v * r / norm).collect());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    /// RMS of the log residuals before `C` is raised to dominate.
    pub residual: f64,
    pub points: usize,
}

/// Fits `‖G‖² ≤ C‖ρ‖^α (1+Ṽ)^β` to `(‖ρ‖, Ṽ, ‖G‖²)` triples: log least
/// squares for the exponents, then `C` raised until the bound holds at
/// every point. Triples with `‖ρ‖ = 0` or `‖G‖ = 0` carry no information
/// about the exponents and are skipped.
pub fn fit_growth_bound(points: &[(f64, f64, f64)]) -> Result<GrowthFit> {
    let rows: Vec<[f64; 3]> = points
        .iter()
        .filter(|p| p.0 > 0.0 && p.2 > 0.0)
        .map(|p| [p.0.ln(), (1.0 + p.1).ln(), p.2.ln()])
        .collect();
    if rows.len() < 5 {
        return Err(Error::TooFewPoints { needed: 5, got: rows.len() });
    }
    // Normal equations for [log C, α, β].
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for r in &rows {
        let a = [1.0, r[0], r[1]];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += a[i] * a[j];
            }
            atb[i] += a[i] * r[2];
        }
    }
    let sol = solve3(ata, atb).ok_or_else(|| Error::Config("degenerate growth data".into()))?;
    let resid: Vec<f64> = rows.iter().map(|r| r[2] - sol[0] - sol[1] * r[0] - sol[2] * r[1]).collect();
    let rms = (resid.iter().map(|e| e * e).sum::<f64>() / rows.len() as f64).sqrt();
    let shift = resid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(GrowthFit {
        c: (sol[0] + shift).exp(),
        alpha: sol[1],
        beta: sol[2],
        residual: rms,
        points: rows.len(),
    })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for c in 0..3 {
        let p = (c..3).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..3 {
            let f = a[r][c] / a[c][c];
            for k in c..3 {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; 3];
    for c in (0..3).rev() {
        x[c] = (b[c] - (c + 1..3).map(|k| a[c][k] * x[k]).sum::<f64>()) / a[c][c];
    }
    Some(x)
}

/// Samples `(‖ρ‖, V(x)+V(y), ‖G‖²)` at random pairs: `x` at radius up to
/// `2R`, `ρ` at log-uniform scale in `[1e-4, 1]·R`.
pub fn growth_samples(
    model: &ModelSpec,
    binding: &crate::binding::BindingSpec,
    count: usize,
    seed: u64,
) -> Result<Vec<(f64, f64, f64)>> {
    let r = model.dissipativity_radius().max(1.0);
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut direction = |len: f64| -> Vec<f64> {
                let v: Vec<f64> = (0..model.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let n = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
                v.iter().map(|a| a * len / n).collect()
            };
            let x = direction(1.0);
            let rho = direction(1.0);
            let (u0, u1): (f64, f64) = (rng.random(), rng.random());
            let x: Vec<f64> = x.iter().map(|a| a * 2.0 * r * u0).collect();
            let rho: Vec<f64> = rho.iter().map(|a| a * r * 10f64.powf(-4.0 * u1)).collect();
            let y: Vec<f64> = x.iter().zip(&rho).map(|(a, b)| a + b).collect();
            let g = binding.force(model, &x, &y)?;
            let rn = rho.iter().map(|a| a * a).sum::<f64>().sqrt();
            Ok((rn, model.lyapunov(&x) + model.lyapunov(&y), g.iter().map(|a| a * a).sum()))
        })
        .collect()
}

/// One point of a distance series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistancePoint {
    pub t: f64,
    pub value: f64,
    /// Bootstrap standard deviation of the estimate.
    pub se: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// Ensemble mean of the final Girsanov density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySummary {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
    pub overflowed: usize,
    pub mean_g_l2: f64,
}

impl DensitySummary {
    /// Overflow-flagged members are excluded and counted.
    pub fn from_trajectories(trajs: &[crate::engine::CoupledTrajectory]) -> Option<Self> {
        let vals: Vec<f64> = trajs.iter().filter_map(|t| t.girsanov.density().ok()).collect();
        if vals.is_empty() {
            return None;
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = if vals.len() > 1 {
            vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(Self {
            mean,
            se: (var / n).sqrt(),
            n: vals.len(),
            overflowed: trajs.len() - vals.len(),
            mean_g_l2: trajs.iter().map(|t| t.girsanov.g_l2).sum::<f64>() / trajs.len() as f64,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub model: Option<ModelId>,
    pub fingerprint: String,
    pub seeds: Vec<u64>,
    pub contraction: Option<ContractionFit>,
    pub girsanov: Option<DensitySummary>,
    pub distances: Vec<DistancePoint>,
    pub distance_fit: Option<ContractionFit>,
    pub lyapunov: Option<LyapunovFit>,
    /// `K₀ = 4b/(1−a)` from the fitted drift coefficients.
    pub k0: Option<f64>,
    pub axk: Option<AxkTable>,
    pub density: Option<DensityTable>,
    pub growth: Option<GrowthFit>,
}

impl EstimatorReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binding::BindingSpec;

    #[test]
    fn contraction_exact_on_log_linear() {
        let s: Vec<(f64, f64)> = (0..=5).map(|t| (t as f64, (-2.0 * t as f64).exp())).collect();
        let f = fit_contraction(&s).unwrap();
        assert!((f.c - 1.0).abs() < 1e-10);
        assert!((f.gamma - 2.0).abs() < 1e-10);
        assert!(f.residual < 1e-10);
        let c: Vec<(f64, f64)> = (0..6).map(|t| (t as f64, 3.0)).collect();
        assert!(fit_contraction(&c).unwrap().gamma.abs() < 1e-14);
    }

    #[test]
    fn contraction_errors() {
        let s: Vec<(f64, f64)> = (0..4).map(|t| (t as f64, 1.0)).collect();
        assert!(matches!(fit_contraction(&s), Err(Error::TooFewPoints { .. })));
        let mut s: Vec<(f64, f64)> = (0..6).map(|t| (t as f64, 1.0)).collect();
        s[3].1 = 0.0;
        assert_eq!(fit_contraction(&s), Err(Error::LogOfNonPositive(3)));
    }

    #[test]
    fn affine_bound_vertices() {
        let (a, b) = fit_affine_bound(&[1.0, 2.0, 4.0], &[0.5, 1.0, 2.0]).unwrap();
        assert!((a - 0.5).abs() < 1e-12 && b.abs() < 1e-12);
        let (a, b) = fit_affine_bound(&[0.0, 10.0], &[3.0, 4.0]).unwrap();
        assert!((a - 0.1).abs() < 1e-12 && (b - 3.0).abs() < 1e-12);
        // Probe at V = 0 forces b up.
        let (_, b) = fit_affine_bound(&[0.0], &[2.0]).unwrap();
        assert_eq!(b, 2.0);
    }

    #[test]
    fn lyapunov_linear_flow_is_exact() {
        let m = ModelSpec::linear(vec![-1.0, -1.0], vec![]);
        let probes = vec![vec![1.0, 0.0], vec![0.0, 3.0], vec![2.0, 2.0]];
        let f = lyapunov_fit(&m, &probes, 4, 1e-3, 1).unwrap();
        assert!((f.a - (-1f64).exp()).abs() < 1e-9, "{}", f.a);
        assert!(f.b < 1e-9);
    }

    #[test]
    fn lyapunov_toy_dissipative() {
        let m = ModelSpec::toy2d();
        let probes = default_probes(&m, 10, 2).unwrap();
        let f = lyapunov_fit(&m, &probes, 40, 1e-3, 3).unwrap();
        assert!(f.a < 1.0);
        assert!(f.b >= f.probes[0].mean && f.probes[0].mean > 0.0);
        assert!(f.a_central <= f.a + 1e-12 || f.b_central <= f.b + 1e-12);
    }

    #[test]
    fn growth_fit_recovers_exponents() {
        let pts: Vec<(f64, f64, f64)> = (1..40)
            .map(|i| {
                let r = 0.01 * i as f64;
                let v = (i % 7) as f64;
                (r, v, 3.0 * r * r * (1.0 + v).powi(3))
            })
            .collect();
        let g = fit_growth_bound(&pts).unwrap();
        assert!((g.alpha - 2.0).abs() < 1e-9 && (g.beta - 3.0).abs() < 1e-9);
        assert!((g.c - 3.0).abs() < 1e-8);
    }

    #[test]
    fn toy_growth_bound_dominates() {
        let m = ModelSpec::toy2d();
        let b = BindingSpec::for_model(&m).unwrap();
        let pts = growth_samples(&m, &b, 300, 5).unwrap();
        let g = fit_growth_bound(&pts).unwrap();
        for &(r, v, gg) in &pts {
            if r > 0.0 && gg > 0.0 {
                assert!(gg <= g.c * r.powf(g.alpha) * (1.0 + v).powf(g.beta) * (1.0 + 1e-9));
            }
        }
        assert!(g.alpha > 1.0, "G vanishes linearly in rho, alpha = {}", g.alpha);
    }
}
