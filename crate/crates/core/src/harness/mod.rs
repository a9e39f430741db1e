//! Experiment runner: config in, deterministic report files out.
//!
//! Every artifact carries the config fingerprint: CSV files in their leading
//! `#` comment line, the JSON report in its `fingerprint` field.

pub mod config;
pub mod presets;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use crate::engine::{integrate_coupled_with, CoupledTrajectory, NoisePath};
use crate::error::{Error, Result};
use crate::estimators::ensemble::{marginals, mean_and_quantiles, par_collect, steps_per_unit};
use crate::estimators::{
    axk_sweep, bootstrap_band, default_probes, density_diagnostics, dual_lipschitz_distance_with,
    fit_contraction, fit_growth_bound, growth_samples, lyapunov_fit, DensitySummary, DistancePoint,
    DualLipschitzOptions, EstimatorReport, Resample,
};
use crate::models::ModelSpec;
pub use config::ExperimentConfig;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;

/// Environment variable that overrides the output directory.
pub const OUT_ENV: &str = "ASYMCOUPLE_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowUpDiagnostics {
    pub member: usize,
    pub t: f64,
    pub message: String,
    /// Last finite recorded values of the failing member.
    pub last_t: f64,
    pub last_v_x: f64,
    pub last_rho_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub fingerprint: String,
    pub estimators: EstimatorReport,
    pub checks: Vec<Check>,
    pub diagnostics: Option<BlowUpDiagnostics>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub model: ModelSpec,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    /// Coupled ensemble, recorded at `record_every`.
    pub trajectories: Vec<CoupledTrajectory>,
    pub files: Vec<PathBuf>,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        if self.report.diagnostics.is_some() {
            EXIT_BLOWUP
        } else if self.report.checks.iter().all(|c| c.passed) {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }
}

/// Maps an error to the process exit code.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::BlowUp { .. } | Error::NonFiniteState => EXIT_BLOWUP,
        _ => EXIT_FAIL,
    }
}

/// Runs `f` on a pool of `jobs` threads (0: the global pool).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn csv_writer(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// Runs the configured experiment and writes its artifacts into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutput> {
    with_jobs(cfg.simulation.jobs, || run_inner(cfg, out))?
}

fn run_inner(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutput> {
    let model = cfg.build_model()?;
    let binding = cfg.build_binding(&model)?;
    let (x0, y0) = cfg.initial_states(&model)?;
    let fp = cfg.fingerprint();
    let s = &cfg.simulation;
    let per = steps_per_unit(s.dt)?;
    let stride = (s.record_every / s.dt).round() as usize;
    fs::create_dir_all(out)?;
    info!("{}: {} coupled members over {} units", model.id.as_str(), s.ensemble, s.horizon);

    let runs = par_collect(s.ensemble, |i| {
        let noise = NoisePath::sample(model.noise_dim(), s.horizon * per, s.dt, s.seed, i as u64)?;
        integrate_coupled_with(&model, &binding, &x0, &y0, &noise, stride)
    })?;
    let mut report = RunReport {
        fingerprint: fp.clone(),
        estimators: EstimatorReport {
            model: Some(model.id),
            fingerprint: fp.clone(),
            seeds: (0..7).map(|k| s.seed.wrapping_add(k)).collect(),
            ..Default::default()
        },
        checks: Vec::new(),
        diagnostics: None,
    };
    let mut files = Vec::new();
    let traj_path = out.join("trajectories.csv");

    if let Some(member) = runs.iter().position(|(_, e)| e.is_some()) {
        let (traj, err) = &runs[member];
        let err = err.as_ref().expect("failing member");
        let last = traj.times.len().saturating_sub(1);
        let diag = BlowUpDiagnostics {
            member,
            t: traj.blow_up.unwrap_or(f64::NAN),
            message: err.to_string(),
            last_t: traj.times.get(last).copied().unwrap_or(0.0),
            last_v_x: traj.x_path.get(last).map_or(f64::NAN, |x| model.lyapunov(x)),
            last_rho_norm: traj.rho_norms().get(last).copied().unwrap_or(f64::NAN),
        };
        traj.write_csv(&model, csv_writer(&traj_path)?, &fp)?;
        files.push(traj_path);
        report.checks.push(Check::new("integration", false, err.to_string()));
        report.diagnostics = Some(diag);
        files.push(write_report(&report, out)?);
        return Ok(RunOutput {
            report,
            model,
            x0,
            y0,
            trajectories: runs.into_iter().map(|r| r.0).collect(),
            files,
        });
    }
    let trajs: Vec<CoupledTrajectory> = runs.into_iter().map(|r| r.0).collect();
    trajs[0].write_csv(&model, csv_writer(&traj_path)?, &fp)?;
    files.push(traj_path);

    let est = &mut report.estimators;
    est.girsanov = DensitySummary::from_trajectories(&trajs);
    let times = trajs[0].times.clone();
    let rho: Vec<Vec<f64>> = trajs.iter().map(|t| t.rho_norms()).collect();
    let rho_stats = mean_and_quantiles(&rho);
    if cfg.estimators.contraction {
        let series: Vec<(f64, f64)> = times
            .iter()
            .zip(&rho_stats)
            .filter(|(t, _)| **t >= 1.0 - 1e-9)
            .map(|(t, q)| (*t, q[0]))
            .collect();
        est.contraction = fit_contraction(&series).ok();
    }

    let e = &cfg.estimators;
    if e.distance {
        let dt = e.distance_dt.unwrap_or(s.dt);
        let seed = s.seed.wrapping_add(1);
        let a = marginals(&model, &x0, s.horizon, dt, seed, e.distance_samples)?;
        let b = marginals(&model, &y0, s.horizon, dt, seed, e.distance_samples)?;
        let opts = DualLipschitzOptions {
            cap: 300,
            subsample_seed: Some(s.seed.wrapping_add(6)),
            s_tolerance: 1e-6,
        };
        for t in 1..=s.horizon {
            let d = dual_lipschitz_distance_with(&a[t], &b[t], &opts)?;
            let band =
                bootstrap_band(&a[t], &b[t], e.bootstrap, s.seed.wrapping_add(6), Resample::Paired, &opts)?;
            est.distances.push(DistancePoint {
                t: t as f64,
                value: d.value,
                se: band.std,
                n_a: d.n_a,
                n_b: d.n_b,
            });
        }
        let series: Vec<(f64, f64)> = est.distances.iter().map(|d| (d.t, d.value)).collect();
        est.distance_fit = fit_contraction(&series).ok();
    }
    if e.lyapunov {
        let probes = default_probes(&model, e.lyapunov_probes, s.seed.wrapping_add(2))?;
        match lyapunov_fit(&model, &probes, e.lyapunov_samples, s.dt, s.seed.wrapping_add(2)) {
            Ok(f) => {
                est.k0 = Some(4.0 * f.b / (1.0 - f.a));
                est.lyapunov = Some(f);
            }
            Err(Error::NoDissipativeFit(a)) => {
                report.checks.push(Check::new("lyapunov", false, format!("no dissipative fit, a = {a}")));
            }
            Err(other) => return Err(other),
        }
    }
    if e.axk {
        est.axk =
            Some(axk_sweep(&model, &x0, &e.axk_k, e.axk_horizon, e.axk_traj, s.dt, s.seed.wrapping_add(3))?);
    }
    if e.density {
        let horizons: Vec<usize> = (1..=e.density_horizons).collect();
        est.density = Some(density_diagnostics(
            &model,
            &binding,
            &x0,
            &y0,
            &horizons,
            e.density_traj,
            e.density_k,
            e.density_big_k,
            s.dt,
            s.seed.wrapping_add(4),
        )?);
    }
    if e.growth && !binding.is_null() {
        let pts = growth_samples(&model, &binding, e.growth_samples, s.seed.wrapping_add(5))?;
        est.growth = fit_growth_bound(&pts).ok();
    }

    let acc = &cfg.acceptance;
    if let Some(g) = acc.min_gamma {
        let detail = match &est.contraction {
            Some(f) => format!("fitted gamma = {:.4} (se {:.2e}), required >= {g}", f.gamma, f.gamma_se),
            None => "no contraction fit".into(),
        };
        let ok = est.contraction.as_ref().is_some_and(|f| f.gamma >= g);
        report.checks.push(Check::new("contraction", ok, detail));
    }
    if let Some(g) = acc.min_distance_gamma {
        let ok = est.distance_fit.as_ref().is_some_and(|f| f.gamma > g);
        let detail = est
            .distance_fit
            .as_ref()
            .map_or("no distance fit".into(), |f| format!("fitted gamma = {:.4}, required > {g}", f.gamma));
        report.checks.push(Check::new("distance-decay", ok, detail));
        report.checks.push(monotone_check(&est.distances));
    }
    if let Some(amax) = acc.max_lyapunov_a {
        let ok = est.lyapunov.as_ref().is_some_and(|f| f.a < amax);
        let detail = est
            .lyapunov
            .as_ref()
            .map_or("no fit".into(), |f| format!("a = {:.4}, b = {:.4}, required a < {amax}", f.a, f.b));
        report.checks.push(Check::new("lyapunov", ok, detail));
    }

    let distance_at =
        |t: f64| report.estimators.distances.iter().find(|d| (d.t - t).abs() < 1e-9).map(|d| d.value);
    let zeta: Vec<Vec<f64>> = trajs
        .iter()
        .map(|t| t.zeta_path.iter().map(|z| z.iter().map(|v| v * v).sum::<f64>().sqrt()).collect())
        .collect();
    let zeta_stats = mean_and_quantiles(&zeta);
    let plot_path = out.join("plot.csv");
    let mut w = csv_writer(&plot_path)?;
    writeln!(
        w,
        "# fingerprint={fp}; columns: t time, rho_* mean and 10/50/90% quantiles of |y-x| over the ensemble, \
         zeta_* the same for |zeta|, distance dual-Lipschitz distance between the laws at integer t (blank otherwise)"
    )?;
    writeln!(w, "t,rho_mean,rho_q10,rho_q50,rho_q90,zeta_mean,zeta_q10,zeta_q50,zeta_q90,distance")?;
    for (i, t) in times.iter().enumerate() {
        let (r, z) = (rho_stats[i], zeta_stats[i]);
        let d = distance_at(*t).map_or(String::new(), |v| v.to_string());
        writeln!(w, "{t},{},{},{},{},{},{},{},{},{d}", r[0], r[1], r[2], r[3], z[0], z[1], z[2], z[3])?;
    }
    w.flush()?;
    files.push(plot_path);
    files.extend(write_tables(&report, out)?);
    files.push(write_report(&report, out)?);
    Ok(RunOutput { report, model, x0, y0, trajectories: trajs, files })
}

/// Each step may rise by at most twice the combined bootstrap spread.
/// Cascade text for the chain with coupling `a_squared` at truncation 4k*.
pub fn dump_cascade(a_squared: f64) -> Result<String> {
    if !(a_squared.is_finite() && a_squared >= 0.0) {
        return Err(Error::Config(format!("a² must be finite and ≥ 0, got {a_squared}")));
    }
    let ks = crate::binding::k_star(a_squared);
    Ok(crate::binding::ZetaCascade::new(a_squared, 4 * ks)?.dump())
}

pub fn monotone_check(d: &[DistancePoint]) -> Check {
    let bad: Vec<String> = d
        .windows(2)
        .filter(|w| w[1].value > w[0].value + 2.0 * (w[0].se.powi(2) + w[1].se.powi(2)).sqrt())
        .map(|w| format!("t={}", w[1].t))
        .collect();
    Check::new(
        "distance-monotone",
        bad.is_empty() && !d.is_empty(),
        if bad.is_empty() {
            format!("{} points non-increasing within 2 bootstrap sd", d.len())
        } else {
            format!("rises beyond noise at {}", bad.join(", "))
        },
    )
}

fn write_report(report: &RunReport, out: &Path) -> Result<PathBuf> {
    let path = out.join("report.json");
    let mut text = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

fn write_tables(report: &RunReport, out: &Path) -> Result<Vec<PathBuf>> {
    let fp = &report.fingerprint;
    let est = &report.estimators;
    let mut files = Vec::new();
    if !est.distances.is_empty() {
        let p = out.join("distances.csv");
        let mut w = csv_writer(&p)?;
        writeln!(w, "# fingerprint={fp}; columns: t, value dual-Lipschitz distance, se bootstrap sd, n_a, n_b sample sizes")?;
        writeln!(w, "t,value,se,n_a,n_b")?;
        for d in &est.distances {
            writeln!(w, "{},{},{},{},{}", d.t, d.value, d.se, d.n_a, d.n_b)?;
        }
        w.flush()?;
        files.push(p);
    }
    if let Some(a) = &est.axk {
        let p = out.join("axk.csv");
        let mut w = csv_writer(&p)?;
        writeln!(w, "# fingerprint={fp}; columns: k, empirical frequency of A_(x,k), bound 1-C/k")?;
        writeln!(w, "k,empirical,bound")?;
        for r in &a.rows {
            writeln!(w, "{},{},{}", r.k, r.empirical, r.bound)?;
        }
        w.flush()?;
        files.push(p);
    }
    if let Some(d) = &est.density {
        let p = out.join("density.csv");
        let mut w = csv_writer(&p)?;
        writeln!(
            w,
            "# fingerprint={fp}; columns: n horizon, mean_density E D^n, mean_density_se, inv_sq_good E[D^-2 | good], \
             p_good, one_step E[(1-D_1)^2; bounded], p_bounded"
        )?;
        writeln!(w, "n,mean_density,mean_density_se,inv_sq_good,p_good,one_step,p_bounded")?;
        for r in &d.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.n, r.mean_density, r.mean_density_se, r.inv_sq_good, r.p_good, r.one_step, r.p_bounded
            )?;
        }
        w.flush()?;
        files.push(p);
    }
    Ok(files)
}
