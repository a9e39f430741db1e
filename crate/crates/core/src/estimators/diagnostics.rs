//! `A_{x,k}` frequencies and Girsanov density diagnostics.

use serde::{Deserialize, Serialize};

use super::ensemble::{coupled_ensemble, ensemble_units};
use super::{fit_contraction, ContractionFit};
use crate::binding::BindingSpec;
use crate::error::{Error, Result};
use crate::models::ModelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxkRow {
    pub k: f64,
    pub empirical: f64,
    /// `1 − Ĉ/k`, clamped at 0.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxkTable {
    pub horizon: usize,
    pub n_traj: usize,
    /// Calibrated at the smallest `k` of the sweep.
    pub c_hat: f64,
    pub rows: Vec<AxkRow>,
}

/// Smallest `k` for which a path lies in `A_{x,k}`: the largest ratio
/// `W_n / (V(x) + n²)` over `n = 1..=horizon`, where `W_n` is the sup of
/// `V` over `[n, n+1]`.
fn critical_k(v0: f64, w_sup: &[f64], horizon: usize) -> f64 {
    (1..=horizon).map(|n| w_sup[n] / (v0 + (n * n) as f64)).fold(0.0, f64::max)
}

/// Empirical frequency of `A_{x,k}` for every `k` in `ks`.
pub fn axk_sweep(
    model: &ModelSpec,
    x: &[f64],
    ks: &[f64],
    horizon: usize,
    n_traj: usize,
    dt: f64,
    seed: u64,
) -> Result<AxkTable> {
    if ks.is_empty() || ks.iter().any(|k| !(*k > 0.0)) {
        return Err(Error::Config("axk: every k must be positive".into()));
    }
    if n_traj == 0 {
        return Err(Error::EmptySample);
    }
    let v0 = model.lyapunov(x);
    let crit: Vec<f64> = if horizon == 0 {
        vec![0.0; n_traj]
    } else {
        ensemble_units(model, x, horizon + 1, dt, seed, n_traj)?
            .iter()
            .map(|p| critical_k(v0, &p.w_sup, horizon))
            .collect()
    };
    let freq = |k: f64| crit.iter().filter(|&&c| c <= k).count() as f64 / n_traj as f64;
    let k_min = ks.iter().cloned().fold(f64::INFINITY, f64::min);
    let c_hat = k_min * (1.0 - freq(k_min));
    let rows =
        ks.iter().map(|&k| AxkRow { k, empirical: freq(k), bound: (1.0 - c_hat / k).max(0.0) }).collect();
    Ok(AxkTable { horizon, n_traj, c_hat, rows })
}

/// Single-`k` version of [`axk_sweep`]: `(empirical, bound)`.
pub fn axk_frequency(
    model: &ModelSpec,
    x: &[f64],
    k: f64,
    horizon: usize,
    n_traj: usize,
    dt: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    let t = axk_sweep(model, x, &[k], horizon, n_traj, dt, seed)?;
    Ok((t.rows[0].empirical, t.rows[0].bound))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub n: usize,
    /// `E 𝒟ⁿ`; one for a martingale.
    pub mean_density: f64,
    pub mean_density_se: f64,
    /// `E[(𝒟ⁿ)⁻² | A]` on the good event.
    pub inv_sq_good: f64,
    pub p_good: f64,
    /// `E[(1 − 𝒟₁)² ; B]` for the step from `n` to `n+1` on the bounded event.
    pub one_step: f64,
    pub p_bounded: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityTable {
    pub n_traj: usize,
    /// Trajectories whose log density left the representable range.
    pub overflowed: usize,
    pub k: f64,
    pub big_k: f64,
    pub rows: Vec<DensityRow>,
    /// Decay rate of the one-step column past the first three horizons.
    pub gamma2_hat: Option<ContractionFit>,
}

/// Density diagnostics along coupled trajectories.
///
/// The good event at horizon `n` asks that `sup_{[m,m+1]} V(y) ≤
/// k(V(y₀) + m²)` for `m = 1..n−1`. The bounded event for the step after
/// `n` asks that the sups of `V(x)` and `V(y)` over `[n, n+1]` sum to at
/// most `big_k`.
#[allow(clippy::too_many_arguments)]
pub fn density_diagnostics(
    model: &ModelSpec,
    binding: &BindingSpec,
    x0: &[f64],
    y0: &[f64],
    horizons: &[usize],
    n_traj: usize,
    k: f64,
    big_k: f64,
    dt: f64,
    seed: u64,
) -> Result<DensityTable> {
    if n_traj == 0 {
        return Err(Error::EmptySample);
    }
    let units = horizons.iter().copied().max().unwrap_or(0) + 1;
    let trajs = coupled_ensemble(model, binding, x0, y0, units, dt, seed, n_traj)?;
    let ok: Vec<_> = trajs.iter().filter(|t| !t.girsanov.overflow).collect();
    let overflowed = trajs.len() - ok.len();
    if ok.is_empty() {
        return Err(Error::DensityOverflow);
    }
    let vy0 = model.lyapunov(y0);
    let m = ok.len() as f64;
    let mut rows = Vec::with_capacity(horizons.len());
    for &n in horizons {
        let mut d_sum = 0.0;
        let mut d_sq = 0.0;
        let mut good = 0usize;
        let mut inv_sq = 0.0;
        let mut bounded = 0usize;
        let mut one = 0.0;
        for t in &ok {
            let ld = t.log_density_path[n];
            let d = ld.exp();
            d_sum += d;
            d_sq += d * d;
            if (1..n).all(|j| t.w_sup_y.values[j] <= k * (vy0 + (j * j) as f64)) {
                good += 1;
                inv_sq += (-2.0 * ld).exp();
            }
            if t.w_sup_x.values[n] + t.w_sup_y.values[n] <= big_k {
                bounded += 1;
                let d1 = (t.log_density_path[n + 1] - ld).exp();
                one += (1.0 - d1) * (1.0 - d1);
            }
        }
        let mean = d_sum / m;
        let var = (d_sq / m - mean * mean).max(0.0) * m / (m - 1.0).max(1.0);
        rows.push(DensityRow {
            n,
            mean_density: mean,
            mean_density_se: (var / m).sqrt(),
            inv_sq_good: if good > 0 { inv_sq / good as f64 } else { 0.0 },
            p_good: good as f64 / m,
            one_step: one / m,
            p_bounded: bounded as f64 / m,
        });
    }
    let tail: Vec<(f64, f64)> = rows.iter().skip(3).map(|r| (r.n as f64, r.one_step)).collect();
    let gamma2_hat = fit_contraction(&tail).ok();
    Ok(DensityTable { n_traj, overflowed, k, big_k, rows, gamma2_hat })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_k_ignores_interval_zero() {
        assert_eq!(critical_k(1.0, &[100.0, 2.0, 10.0], 2), 2.0);
        assert_eq!(critical_k(1.0, &[100.0], 0), 0.0);
    }

    #[test]
    fn axk_monotone_and_horizon_zero() {
        let m = ModelSpec::toy2d();
        let ks = [0.5, 1.0, 2.0, 5.0, 1e4];
        let t = axk_sweep(&m, &[0.0, 0.0], &ks, 3, 100, 0.01, 1).unwrap();
        for w in t.rows.windows(2) {
            assert!(w[0].empirical <= w[1].empirical);
        }
        assert_eq!(t.rows[4].empirical, 1.0);
        assert!(t.rows.iter().all(|r| (0.0..=1.0).contains(&r.bound)));
        let (f, _) = axk_frequency(&m, &[1.0, 1.0], 1e-6, 0, 10, 0.01, 1).unwrap();
        assert_eq!(f, 1.0);
        assert!(axk_sweep(&m, &[0.0, 0.0], &[0.0], 1, 10, 0.01, 1).is_err());
    }

    #[test]
    fn null_binding_is_trivial() {
        let m = ModelSpec::toy2d();
        let b = BindingSpec::null(&m);
        let h: Vec<usize> = (1..=6).collect();
        let t = density_diagnostics(&m, &b, &[1.0, 0.0], &[0.0, 1.0], &h, 20, 10.0, 1e9, 0.01, 4).unwrap();
        for r in &t.rows {
            assert_eq!(r.mean_density, 1.0);
            assert_eq!(r.inv_sq_good, 1.0);
            assert_eq!(r.one_step, 0.0);
        }
        assert!(t.gamma2_hat.is_none());
        assert_eq!(t.overflowed, 0);
    }
}
