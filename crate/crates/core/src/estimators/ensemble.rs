//! Ensemble simulation helpers. Member `i` always draws from noise stream
//! `i` of the given seed, and results come back in member order regardless
//! of how the rayon pool schedules them.

use rayon::prelude::*;

use crate::binding::BindingSpec;
use crate::engine::{integrate_coupled_with, CoupledTrajectory, NoisePath, NoiseSource, Stepper, UnitSup};
use crate::error::{Error, Result};
use crate::models::ModelSpec;

/// Grid steps per unit of time; `1/dt` must be an integer.
pub fn steps_per_unit(dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() || dt > 1.0 {
        return Err(Error::Config(format!("dt must lie in (0, 1], got {dt}")));
    }
    let n = (1.0 / dt).round();
    if ((n * dt) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("1/dt must be an integer, got dt = {dt}")));
    }
    Ok(n as usize)
}

/// Order-preserving parallel map over `0..n`.
pub fn par_collect<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// One uncoupled path sampled at integer times.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitPath {
    /// States at `t = 0, 1, …, units`.
    pub states: Vec<Vec<f64>>,
    /// Supremum of `V` over `[n, n+1]` for `n < units`.
    pub w_sup: Vec<f64>,
}

/// Integrates `x0` for `units` time units with streamed noise.
pub fn simulate_units(
    model: &ModelSpec,
    x0: &[f64],
    units: usize,
    dt: f64,
    seed: u64,
    stream: u64,
) -> Result<UnitPath> {
    if x0.len() != model.dim {
        return Err(Error::DimensionMismatch { expected: model.dim, got: x0.len() });
    }
    let per = steps_per_unit(dt)?;
    let mut stepper = Stepper::new(model, dt)?;
    let mut src = NoiseSource::new(dt, seed, stream)?;
    let mut dw = vec![0.0; model.noise_dim()];
    let mut x = x0.to_vec();
    let mut states = Vec::with_capacity(units + 1);
    let mut w = UnitSup::with_intervals(units);
    states.push(x.clone());
    w.observe(0.0, model.lyapunov(&x));
    for n in 0..units * per {
        src.fill(&mut dw);
        let t = (n + 1) as f64 * dt;
        if !stepper.step(&mut x, &dw) {
            return Err(Error::BlowUp { t });
        }
        w.observe(t, model.lyapunov(&x));
        if (n + 1) % per == 0 {
            states.push(x.clone());
        }
    }
    Ok(UnitPath { states, w_sup: w.values })
}

/// Ensemble of `n` paths from `x0`; member `i` uses stream `i`.
pub fn ensemble_units(
    model: &ModelSpec,
    x0: &[f64],
    units: usize,
    dt: f64,
    seed: u64,
    n: usize,
) -> Result<Vec<UnitPath>> {
    par_collect(n, |i| simulate_units(model, x0, units, dt, seed, i as u64))
}

/// Samples of the law at each integer time: `out[t][i]` is member `i` at
/// time `t`.
pub fn marginals(
    model: &ModelSpec,
    x0: &[f64],
    units: usize,
    dt: f64,
    seed: u64,
    n: usize,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let paths = ensemble_units(model, x0, units, dt, seed, n)?;
    Ok((0..=units).map(|t| paths.iter().map(|p| p.states[t].clone()).collect()).collect())
}

/// One coupled trajectory over `units` time units recorded at integer
/// times. Blow-up is returned as an error.
pub fn coupled_units(
    model: &ModelSpec,
    binding: &BindingSpec,
    x0: &[f64],
    y0: &[f64],
    units: usize,
    dt: f64,
    seed: u64,
    stream: u64,
) -> Result<CoupledTrajectory> {
    let per = steps_per_unit(dt)?;
    let noise = NoisePath::sample(model.noise_dim(), units * per, dt, seed, stream)?;
    let (traj, err) = integrate_coupled_with(model, binding, x0, y0, &noise, per)?;
    match err {
        Some(e) => Err(e),
        None => Ok(traj),
    }
}

/// Coupled ensemble; member `i` uses stream `i`.
#[allow(clippy::too_many_arguments)]
pub fn coupled_ensemble(
    model: &ModelSpec,
    binding: &BindingSpec,
    x0: &[f64],
    y0: &[f64],
    units: usize,
    dt: f64,
    seed: u64,
    n: usize,
) -> Result<Vec<CoupledTrajectory>> {
    par_collect(n, |i| coupled_units(model, binding, x0, y0, units, dt, seed, i as u64))
}

/// Pointwise mean and the 10%, 50%, 90% quantiles of equal-length series.
pub fn mean_and_quantiles(series: &[Vec<f64>]) -> Vec<[f64; 4]> {
    let len = series.first().map_or(0, Vec::len);
    (0..len)
        .map(|j| {
            let mut col: Vec<f64> = series.iter().map(|s| s[j]).collect();
            col.sort_by(f64::total_cmp);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let q = |p: f64| col[((p * (col.len() - 1) as f64).round() as usize).min(col.len() - 1)];
            [mean, q(0.1), q(0.5), q(0.9)]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_per_unit_requires_integer_ratio() {
        assert_eq!(steps_per_unit(1e-3).unwrap(), 1000);
        assert_eq!(steps_per_unit(0.25).unwrap(), 4);
        assert!(steps_per_unit(0.3).is_err());
        assert!(steps_per_unit(0.0).is_err());
        assert!(steps_per_unit(2.0).is_err());
    }

    #[test]
    fn streamed_units_match_stored_noise() {
        let m = ModelSpec::toy2d();
        let p = simulate_units(&m, &[0.5, -0.5], 2, 0.01, 9, 4).unwrap();
        let noise = NoisePath::sample(1, 200, 0.01, 9, 4).unwrap();
        let t = crate::engine::integrate(&m, &[0.5, -0.5], &noise).unwrap();
        assert_eq!(p.states[2], t.states[200]);
        assert_eq!(p.states[1], t.states[100]);
        let v_max = t.states[100..=200].iter().map(|s| m.lyapunov(s)).fold(f64::MIN, f64::max);
        assert_eq!(p.w_sup[1], v_max);
    }

    #[test]
    fn ensembles_are_ordered_and_reproducible() {
        let m = ModelSpec::toy2d();
        let a = marginals(&m, &[0.0, 0.0], 1, 0.01, 3, 8).unwrap();
        let b = marginals(&m, &[0.0, 0.0], 1, 0.01, 3, 8).unwrap();
        assert_eq!(a, b);
        let single = simulate_units(&m, &[0.0, 0.0], 1, 0.01, 3, 5).unwrap();
        assert_eq!(a[1][5], single.states[1]);
    }

    #[test]
    fn quantiles_of_constant_columns() {
        let q = mean_and_quantiles(&[vec![1.0, 2.0], vec![1.0, 2.0]]);
        assert_eq!(q, vec![[1.0; 4], [2.0; 4]]);
    }
}
