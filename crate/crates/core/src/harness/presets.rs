//! Pinned experiments with their pass/fail predicates.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{run, Check, ExperimentConfig, RunOutput, EXIT_BLOWUP, EXIT_FAIL, EXIT_PASS};
use crate::binding::cascade::{k_star, ZetaCascade};
use crate::error::{Error, Result};

pub const PRESETS: &[(&str, &str)] = &[
    ("toy-contraction", "toy model: exact e^{-2t} decay of zeta and ensemble contraction rate of |rho|"),
    ("gl-gap", "Ginzburg-Landau, 64 modes: pathwise |rho(t)| <= e^{-at}|rho(0)|"),
    ("rd-zeta", "reaction-diffusion: mode-wise zeta decay and the resulting bound on rho_v"),
    (
        "chain-cascade",
        "chain: derived zeta cascade, exact top-level decay, positive contraction for a^2 in {0, 2, 5}",
    ),
    ("girsanov-martingale", "mean Girsanov density within 3 standard errors of 1 (toy and chain)"),
    ("mixing-distance", "dual-Lipschitz distance between laws from two starts decays, all four models"),
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PresetOutcome {
    pub id: String,
    pub checks: Vec<Check>,
    /// Extra human-readable output (cascade dumps).
    pub text: String,
    pub blow_up: bool,
}

impl PresetOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.blow_up {
            EXIT_BLOWUP
        } else if self.checks.iter().all(|c| c.passed) {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }

    pub fn passed(&self) -> bool {
        self.exit_code() == EXIT_PASS
    }

    fn absorb(&mut self, prefix: &str, out: &RunOutput) {
        if out.report.diagnostics.is_some() {
            self.blow_up = true;
        }
        for c in &out.report.checks {
            self.checks.push(Check::new(format!("{prefix}/{}", c.name), c.passed, c.detail.clone()));
        }
    }
}

pub fn list_presets() -> String {
    PRESETS.iter().map(|(id, d)| format!("{id:<20} {d}\n")).collect()
}

/// Runs preset `id` with outputs under `out/<id>/`. `seed` replaces the
/// pinned base seed; `jobs` sizes the worker pool (0: default).
pub fn reproduce(id: &str, seed: Option<u64>, out: &Path, jobs: usize) -> Result<PresetOutcome> {
    let dir = out.join(id);
    let seed = seed.unwrap_or(1);
    let mut outcome = PresetOutcome { id: id.to_string(), ..Default::default() };
    match id {
        "toy-contraction" => toy_contraction(&mut outcome, &dir, seed, jobs)?,
        "gl-gap" => gl_gap(&mut outcome, &dir, seed, jobs)?,
        "rd-zeta" => rd_zeta(&mut outcome, &dir, seed, jobs)?,
        "chain-cascade" => chain_cascade(&mut outcome, &dir, seed, jobs)?,
        "girsanov-martingale" => girsanov(&mut outcome, &dir, seed, jobs)?,
        "mixing-distance" => mixing(&mut outcome, &dir, seed, jobs)?,
        _ => {
            let ids: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
            return Err(Error::Config(format!("unknown experiment '{id}'; valid ids: {}", ids.join(", "))));
        }
    }
    fs::create_dir_all(&dir)?;
    let mut summary: String = outcome.checks.iter().map(|c| c.line() + "\n").collect();
    summary.insert_str(0, &format!("# {id}\n"));
    fs::write(dir.join("checks.txt"), summary)?;
    Ok(outcome)
}

fn config(text: &str, seed: u64, jobs: usize) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::parse(text)?;
    c.simulation.seed = seed;
    c.simulation.jobs = jobs;
    Ok(c)
}

fn run_in(cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutput> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    run(cfg, dir)
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

fn toy_contraction(o: &mut PresetOutcome, dir: &Path, seed: u64, jobs: usize) -> Result<()> {
    let cfg = config(
        "[model]\nid = \"toy2d\"\n\
         [simulation]\ndt = 0.001\nhorizon = 5\nensemble = 200\nrecord_every = 0.01\n\
         x0 = [1.0, 0.5]\ny0 = [0.5, 1.0]\n\
         [acceptance]\nmin_gamma = 0.9\n",
        seed,
        jobs,
    )?;
    let out = run_in(&cfg, dir)?;
    o.absorb("toy", &out);
    if o.blow_up {
        return Ok(());
    }
    let tol = 10.0 * cfg.simulation.dt;
    let mut worst = 0.0f64;
    for t in &out.trajectories {
        let z0 = t.zeta_path[0][0];
        for (time, z) in t.times.iter().zip(&t.zeta_path) {
            let exact = z0 * (-2.0 * time).exp();
            worst = worst.max(((z[0] - exact) / exact).abs());
        }
    }
    o.checks.push(Check::new(
        "toy/zeta-decay",
        worst <= tol,
        format!("max |zeta(t)/(zeta(0)e^(-2t)) - 1| = {worst:.3e}, tolerance {tol:.1e}"),
    ));
    Ok(())
}

fn gl_gap(o: &mut PresetOutcome, dir: &Path, seed: u64, jobs: usize) -> Result<()> {
    let mut cfg = config(
        "[model]\nid = \"ginzburg_landau\"\nmodes = 64\nnoise = [1.0, 1.0, 1.0]\n\
         [simulation]\ndt = 0.001\nhorizon = 5\nensemble = 50\nrecord_every = 0.01\n",
        seed,
        jobs,
    )?;
    let mut y0 = vec![0.0; 64];
    for (k, y) in y0.iter_mut().enumerate().take(12) {
        *y = 0.4 / (1.0 + k as f64);
    }
    cfg.simulation.y0 = Some(y0);
    let out = run_in(&cfg, dir)?;
    o.absorb("gl", &out);
    if o.blow_up {
        return Ok(());
    }
    let a = out.model.gl_gap().expect("GL model");
    let dt = cfg.simulation.dt;
    let mut worst = 0.0f64;
    let mut slowest = f64::INFINITY;
    for t in &out.trajectories {
        let r = t.rho_norms();
        for (time, rn) in t.times.iter().zip(&r) {
            let bound = (-a * time).exp() * r[0] * (1.0 + 10.0 * dt * time);
            worst = worst.max(rn / bound);
        }
        let tf = *t.times.last().unwrap();
        slowest = slowest.min(-(r.last().unwrap() / r[0]).ln() / tf);
    }
    o.checks.push(Check::new(
        "gl/pathwise-gap",
        worst <= 1.0,
        format!("max |rho(t)| / (e^(-at)|rho(0)|(1+10 dt t)) = {worst:.6} with a = {a}"),
    ));
    o.checks.push(Check::new(
        "gl/measured-rate",
        slowest >= a - 10.0 * dt,
        format!("slowest path rate {slowest:.4} vs configured gap a = {a}"),
    ));
    Ok(())
}

fn rd_zeta(o: &mut PresetOutcome, dir: &Path, seed: u64, jobs: usize) -> Result<()> {
    let mut cfg = config(
        "[model]\nid = \"reaction_diffusion\"\nmodes = 32\n\
         [simulation]\ndt = 0.001\nhorizon = 5\nensemble = 50\nrecord_every = 0.01\n",
        seed,
        jobs,
    )?;
    let m = 32;
    let mut y0 = vec![0.0; 2 * m];
    for k in 0..6 {
        y0[k] = 0.2 / (1.0 + k as f64);
        y0[m + k] = -0.1 / (1.0 + k as f64);
    }
    cfg.simulation.y0 = Some(y0);
    let out = run_in(&cfg, dir)?;
    o.absorb("rd", &out);
    if o.blow_up {
        return Ok(());
    }
    let dt = cfg.simulation.dt;
    let mut worst = 0.0f64;
    let n_rec = out.trajectories[0].times.len();
    let mut mean_v = vec![0.0; n_rec];
    for t in &out.trajectories {
        let z0 = norm_sq(&t.zeta_path[0]);
        for (i, time) in t.times.iter().enumerate() {
            let bound = z0 * (-time).exp() * (1.0 + 10.0 * dt * time);
            worst = worst.max(norm_sq(&t.zeta_path[i]) / bound);
            mean_v[i] += norm_sq(&t.rho_path[i][m..]) / out.trajectories.len() as f64;
        }
    }
    o.checks.push(Check::new(
        "rd/zeta-decay",
        worst <= 1.0,
        format!("max |zeta(t)|^2 / (|zeta(0)|^2 e^(-t)(1+10 dt t)) = {worst:.6}"),
    ));
    let t0 = &out.trajectories[0];
    let z0 = norm_sq(&t0.zeta_path[0]);
    let v0 = norm_sq(&t0.rho_path[0][m..]);
    let ratio = t0
        .times
        .iter()
        .zip(&mean_v)
        .map(|(time, v)| v / (v0 * (-time).exp() + 0.5 * (1.0 + z0) * (-time).exp()))
        .fold(0.0, f64::max);
    o.checks.push(Check::new(
        "rd/rho-v-bound",
        ratio <= 1.0,
        format!("max mean |rho_v(t)|^2 / (|rho_v(0)|^2 e^(-t) + (1+|zeta(0)|^2)/2 e^(-t)) = {ratio:.4}"),
    ));
    Ok(())
}

fn chain_cascade(o: &mut PresetOutcome, dir: &Path, seed: u64, jobs: usize) -> Result<()> {
    for a2 in [0.0, 2.0, 5.0] {
        let ks = k_star(a2);
        let c = ZetaCascade::new(a2, 4 * ks)?;
        writeln!(o.text, "# cascade for a^2 = {a2}").unwrap();
        o.text.push_str(&c.dump());
        let ids = c.verify_identities()?;
        let failed: Vec<&str> = ids.iter().filter(|i| !i.1).map(|i| i.0.as_str()).collect();
        o.checks.push(Check::new(
            format!("chain a2={a2}/identities"),
            failed.is_empty(),
            if failed.is_empty() {
                format!("k* = {ks}, {} symbolic identities exact", ids.len())
            } else {
                format!("failed: {}", failed.join("; "))
            },
        ));
        let mut cfg = config(
            &format!(
                "[model]\nid = \"chain\"\na_squared = {a2:?}\n\
                 [simulation]\ndt = 0.001\nhorizon = 20\nensemble = 20\nrecord_every = 0.05\n\
                 [acceptance]\nmin_gamma = 0.0\n"
            ),
            seed,
            jobs,
        )?;
        let mut y0 = vec![0.0; 4 * ks];
        y0[ks - 1] = 0.3;
        y0[ks] = -0.2;
        cfg.simulation.y0 = Some(y0);
        let sub = dir.join(format!("a2_{a2}"));
        fs::create_dir_all(&sub)?;
        fs::write(sub.join("cascade.txt"), c.dump())?;
        let out = run_in(&cfg, &sub)?;
        o.absorb(&format!("chain a2={a2}"), &out);
        if o.blow_up {
            return Ok(());
        }
        let tol = 10.0 * cfg.simulation.dt;
        let mut worst = 0.0f64;
        for t in &out.trajectories {
            let z0 = *t.zeta_path[0].last().unwrap();
            for (time, z) in t.times.iter().zip(&t.zeta_path) {
                let exact = z0 * (-time).exp();
                worst = worst.max((z.last().unwrap() - exact).abs() / exact.abs());
            }
        }
        o.checks.push(Check::new(
            format!("chain a2={a2}/top-zeta-decay"),
            worst <= tol,
            format!("max relative error of zeta[k*](t) against zeta[k*](0)e^(-t) = {worst:.3e}, tolerance {tol:.1e}"),
        ));
    }
    Ok(())
}

fn girsanov(o: &mut PresetOutcome, dir: &Path, seed: u64, jobs: usize) -> Result<()> {
    let cases = [
        ("toy", "[model]\nid = \"toy2d\"\n[simulation]\nx0 = [1.0, 0.5]\ny0 = [0.8, 0.7]\n"),
        ("chain", "[model]\nid = \"chain\"\na_squared = 2.0\n[simulation]\n"),
    ];
    for (name, head) in cases {
        let mut cfg = config(
            &format!("{head}dt = 0.01\nhorizon = 5\nensemble = 2000\nrecord_every = 1.0\n[estimators]\ncontraction = false\n"),
            seed,
            jobs,
        )?;
        if name == "chain" {
            let mut y0 = vec![0.0; 12];
            y0[2] = 1e-3;
            cfg.simulation.y0 = Some(y0);
        }
        let out = run_in(&cfg, &dir.join(name))?;
        o.absorb(name, &out);
        if o.blow_up {
            return Ok(());
        }
        let g = out.report.estimators.girsanov.clone();
        let (ok, detail) = match g {
            Some(g) => (
                (g.mean - 1.0).abs() <= 3.0 * g.se && g.overflowed == 0,
                format!(
                    "mean density {:.4} +- {:.4} (se) over {} paths, {} overflowed, mean int |G|^2 = {:.3}",
                    g.mean, g.se, g.n, g.overflowed, g.mean_g_l2
                ),
            ),
            None => (false, "every path overflowed".into()),
        };
        o.checks.push(Check::new(format!("{name}/martingale"), ok, detail));
    }
    Ok(())
}

fn mixing(o: &mut PresetOutcome, dir: &Path, seed: u64, jobs: usize) -> Result<()> {
    let tail = "dt = 0.01\nhorizon = 8\nensemble = 1\nrecord_every = 1.0\n\
                [estimators]\ncontraction = false\ndistance = true\ndistance_samples = 300\nbootstrap = 6\n\
                [acceptance]\nmin_distance_gamma = 0.0\n";
    let unit = |n: usize, at: &[(usize, f64)]| {
        let mut v = vec![0.0; n];
        for &(i, a) in at {
            v[i] = a;
        }
        v
    };
    // (name, model section, x0, y0, relax)
    type Case = (&'static str, String, Vec<f64>, Vec<f64>, usize);
    let cases: Vec<Case> = vec![
        ("toy", "[model]\nid = \"toy2d\"\n".into(), vec![1.0, 1.0], vec![2.0, 1.0], 20),
        (
            "ginzburg_landau",
            "[model]\nid = \"ginzburg_landau\"\nmodes = 16\n".into(),
            unit(16, &[(0, 1.0)]),
            unit(16, &[(0, 2.0)]),
            20,
        ),
        (
            "reaction_diffusion",
            "[model]\nid = \"reaction_diffusion\"\nmodes = 8\n".into(),
            unit(16, &[(0, 1.0), (8, 1.0)]),
            unit(16, &[(0, 2.0), (8, 1.0)]),
            20,
        ),
        ("chain", "[model]\nid = \"chain\"\na_squared = 0.0\n".into(), unit(8, &[]), unit(8, &[(0, 1.0)]), 0),
    ];
    for (name, head, x0, y0, relax) in cases {
        let mut cfg = config(&format!("{head}[simulation]\n{tail}"), seed, jobs)?;
        cfg.simulation.x0 = Some(x0);
        cfg.simulation.y0 = Some(y0);
        cfg.simulation.relax = relax;
        let out = run_in(&cfg, &dir.join(name))?;
        o.absorb(name, &out);
        if o.blow_up {
            return Ok(());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_preset_lists_valid_ids() {
        let d = tempfile::tempdir().unwrap();
        let e = reproduce("nope", None, d.path(), 0).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        assert!(e.to_string().contains("mixing-distance"));
    }

    #[test]
    fn list_has_every_preset() {
        let l = list_presets();
        assert_eq!(l.lines().count(), PRESETS.len());
    }
}
