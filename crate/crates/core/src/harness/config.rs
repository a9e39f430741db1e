//! Experiment configuration: a sectioned `key = value` file (TOML syntax).
//!
//! ```toml
//! [model]
//! id = "ginzburg_landau"
//! modes = 64
//! noise = [1.0, 1.0, 1.0]
//!
//! [simulation]
//! dt = 0.001
//! horizon = 5
//! ensemble = 50
//! seed = 7
//!
//! [estimators]
//! lyapunov = true
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::binding::{cascade::k_star, BindingSpec};
use crate::engine::{integrate, NoisePath};
use crate::error::{Error, Result};
use crate::estimators::ensemble::steps_per_unit;
use crate::models::{ModelId, ModelSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub id: String,
    pub half_length: Option<f64>,
    pub modes: Option<usize>,
    /// Noise coefficients `q_k` of the forced Ginzburg-Landau modes, or of
    /// `noise_dims` for the linear model.
    pub noise: Option<Vec<f64>>,
    pub a_squared: Option<f64>,
    pub truncation: Option<usize>,
    pub lyapunov_p: Option<f64>,
    pub spectrum: Option<Vec<f64>>,
    pub noise_dims: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub dt: f64,
    /// Number of unit time intervals.
    pub horizon: usize,
    pub ensemble: usize,
    pub seed: u64,
    pub binding: bool,
    /// Spacing of recorded times; a multiple of `dt`.
    pub record_every: f64,
    /// Worker threads; 0 picks the machine default.
    pub jobs: usize,
    /// Defaults to the origin.
    pub x0: Option<Vec<f64>>,
    /// Defaults to `x0` plus `0.5` on the first coordinate.
    pub y0: Option<Vec<f64>>,
    /// Noise-free time units applied to `x0` first; `y0` keeps its offset
    /// from `x0`. Used to start near an attractor.
    pub relax: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 5,
            ensemble: 100,
            seed: 1,
            binding: true,
            record_every: 0.1,
            jobs: 0,
            x0: None,
            y0: None,
            relax: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSection {
    pub contraction: bool,
    pub distance: bool,
    pub distance_samples: usize,
    pub distance_dt: Option<f64>,
    pub bootstrap: usize,
    pub lyapunov: bool,
    pub lyapunov_probes: usize,
    pub lyapunov_samples: usize,
    pub axk: bool,
    pub axk_k: Vec<f64>,
    pub axk_horizon: usize,
    pub axk_traj: usize,
    pub density: bool,
    pub density_horizons: usize,
    pub density_traj: usize,
    pub density_k: f64,
    pub density_big_k: f64,
    pub growth: bool,
    pub growth_samples: usize,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            contraction: true,
            distance: false,
            distance_samples: 300,
            distance_dt: None,
            bootstrap: 8,
            lyapunov: false,
            lyapunov_probes: 12,
            lyapunov_samples: 40,
            axk: false,
            axk_k: vec![1.0, 3.0, 10.0, 100.0, 1e4],
            axk_horizon: 5,
            axk_traj: 500,
            density: false,
            density_horizons: 10,
            density_traj: 500,
            density_k: 10.0,
            density_big_k: 100.0,
            growth: false,
            growth_samples: 500,
        }
    }
}

/// Optional pass/fail thresholds evaluated by `run`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcceptanceSection {
    pub min_gamma: Option<f64>,
    pub min_distance_gamma: Option<f64>,
    pub max_lyapunov_a: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub estimators: EstimatorSection,
    #[serde(default)]
    pub acceptance: AcceptanceSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Line (1-based) of `key = …` inside `[section]`, if present.
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
        } else if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

impl ExperimentConfig {
    /// Parses and validates. Errors carry the offending line.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            let msg = e.message().to_string();
            match line {
                Some(l) => Error::Config(format!("line {l}: {msg}")),
                None => Error::Config(msg),
            }
        })?;
        cfg.validate().map_err(|(section, key, msg)| {
            let at = locate(text, section, key)
                .or_else(|| locate(text, section, "id"))
                .map_or(String::new(), |l| format!("line {l}: "));
            Error::Config(format!("{at}[{section}] {key}: {msg}"))
        })?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks everything `build_model` and `run` rely on; the error names
    /// the section and key at fault.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, &'static str, String)> {
        let s = &self.simulation;
        steps_per_unit(s.dt).map_err(|e| ("simulation", "dt", e.to_string()))?;
        if s.horizon == 0 {
            return Err(("simulation", "horizon", "must be at least 1".into()));
        }
        if s.ensemble == 0 {
            return Err(("simulation", "ensemble", "must be at least 1".into()));
        }
        let ratio = s.record_every / s.dt;
        if !(ratio >= 1.0) || (ratio - ratio.round()).abs() > 1e-6 {
            return Err(("simulation", "record_every", "must be a positive multiple of dt".into()));
        }
        if let Some(d) = self.estimators.distance_dt {
            steps_per_unit(d).map_err(|e| ("estimators", "distance_dt", e.to_string()))?;
        }
        let e = &self.estimators;
        if e.distance && (e.distance_samples < 2 || e.bootstrap < 2 || s.horizon < 5) {
            return Err((
                "estimators",
                "distance",
                "needs distance_samples >= 2, bootstrap >= 2 and horizon >= 5".into(),
            ));
        }
        if e.axk && (e.axk_k.is_empty() || e.axk_k.iter().any(|k| !(*k > 0.0))) {
            return Err(("estimators", "axk_k", "needs positive values".into()));
        }
        if e.density && e.density_horizons < 1 {
            return Err(("estimators", "density_horizons", "must be at least 1".into()));
        }
        let model = self.build_model_inner()?;
        let check_state = |v: &Option<Vec<f64>>, key: &'static str| match v {
            Some(v) if v.len() != model.dim => Err((
                "simulation",
                key,
                format!("has {} entries, the model has dimension {}", v.len(), model.dim),
            )),
            Some(v) if v.iter().any(|x| !x.is_finite()) => Err(("simulation", key, "must be finite".into())),
            _ => Ok(()),
        };
        check_state(&s.x0, "x0")?;
        check_state(&s.y0, "y0")?;
        if s.binding {
            BindingSpec::for_model(&model).map_err(|e| ("model", "noise", e.to_string()))?;
        }
        Ok(())
    }

    fn build_model_inner(&self) -> std::result::Result<ModelSpec, (&'static str, &'static str, String)> {
        let m = &self.model;
        let id = ModelId::parse(&m.id).ok_or((
            "model",
            "id",
            format!(
                "unknown model '{}'; expected toy2d, ginzburg_landau, reaction_diffusion, chain or linear",
                m.id
            ),
        ))?;
        let pi = std::f64::consts::PI;
        let wrap = |key: &'static str| move |e: Error| ("model", key, e.to_string());
        match id {
            ModelId::Toy2d => Ok(ModelSpec::toy2d()),
            ModelId::GinzburgLandau => {
                let q = m.noise.clone().unwrap_or_else(|| vec![1.0; 3]);
                ModelSpec::ginzburg_landau(m.half_length.unwrap_or(pi), m.modes.unwrap_or(64), q)
                    .map_err(wrap("noise"))
            }
            ModelId::ReactionDiffusion => {
                ModelSpec::reaction_diffusion(m.half_length.unwrap_or(pi), m.modes.unwrap_or(32))
                    .map_err(wrap("modes"))
            }
            ModelId::Chain => {
                let a2 = m.a_squared.unwrap_or(0.0);
                if !(a2.is_finite() && a2 >= 0.0) {
                    return Err(("model", "a_squared", "must be finite and non-negative".into()));
                }
                let min = 4 * k_star(a2);
                let t = m.truncation.unwrap_or(min);
                if t < min {
                    return Err((
                        "model",
                        "truncation",
                        format!("chain needs truncation >= 4k* = {min}, got {t}"),
                    ));
                }
                ModelSpec::chain(a2, t, m.lyapunov_p.unwrap_or(2.0)).map_err(wrap("a_squared"))
            }
            ModelId::Linear => {
                let spec = m.spectrum.clone().ok_or((
                    "model",
                    "spectrum",
                    "required for the linear model".into(),
                ))?;
                let dims = m.noise_dims.clone().unwrap_or_default();
                let q = m.noise.clone().unwrap_or_else(|| vec![1.0; dims.len()]);
                if q.len() != dims.len() || dims.iter().any(|&d| d >= spec.len()) {
                    return Err((
                        "model",
                        "noise_dims",
                        "needs one in-range index per noise coefficient".into(),
                    ));
                }
                Ok(ModelSpec::linear(spec, dims.into_iter().zip(q).collect()))
            }
        }
    }

    pub fn build_model(&self) -> Result<ModelSpec> {
        self.build_model_inner().map_err(|(s, k, m)| Error::Config(format!("[{s}] {k}: {m}")))
    }

    pub fn build_binding(&self, model: &ModelSpec) -> Result<BindingSpec> {
        if self.simulation.binding {
            BindingSpec::for_model(model)
        } else {
            Ok(BindingSpec::null(model))
        }
    }

    /// `(x0, y0)` after the optional noise-free relaxation.
    pub fn initial_states(&self, model: &ModelSpec) -> Result<(Vec<f64>, Vec<f64>)> {
        let s = &self.simulation;
        let x = s.x0.clone().unwrap_or_else(|| vec![0.0; model.dim]);
        let y = s.y0.clone().unwrap_or_else(|| {
            let mut y = x.clone();
            y[0] += 0.5;
            y
        });
        if s.relax == 0 {
            return Ok((x, y));
        }
        let steps = s.relax * steps_per_unit(s.dt)?;
        let zero =
            NoisePath::from_increments(s.dt, model.noise_dim(), vec![0.0; steps * model.noise_dim()], 0, 0)?;
        let xr = integrate(model, &x, &zero)?.final_state().to_vec();
        let yr = xr.iter().zip(y.iter().zip(&x)).map(|(r, (b, a))| r + b - a).collect();
        Ok((xr, yr))
    }

    /// SHA-256 of the canonical JSON form, ignoring settings that cannot
    /// change results (output directory and thread count).
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSection::default();
        c.simulation.jobs = 0;
        let json = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn model_id(&self) -> Option<ModelId> {
        ModelId::parse(&self.model.id)
    }
}
