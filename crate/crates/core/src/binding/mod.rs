//! Binding drifts `G(x, y)` that pull the shifted copy onto the reference
//! trajectory. Forces live in noise space; the engine multiplies by `Q`.

pub mod cascade;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::models::{ModelId, ModelSpec};
pub use cascade::{build_zeta_cascade, chain_field, k_star, parse_cascade_dump, ZetaCascade};

#[derive(Debug, Clone)]
pub enum BindingKind {
    /// `G ≡ 0`: the two copies see the same noise and no control.
    Null,
    /// `ζ = ρ₁ + 3ρ₂`, forced to obey `ζ̇ = −2ζ`.
    Toy,
    /// `G_k = −(2 + λ_k) ρ_k / q_k` on the forced modes.
    GinzburgLandau { gains: Vec<f64> },
    /// `ζ = ρ_u + 3ρ_v` mode-wise, forced to obey `ζ̇ = Δζ − ζ`.
    ReactionDiffusion,
    /// Scalar `G` from the ζ-cascade.
    Chain(Arc<ZetaCascade>),
}

#[derive(Debug, Clone)]
pub struct BindingSpec {
    pub model: ModelId,
    pub kind: BindingKind,
    noise_dim: usize,
    rho_spectrum: Vec<f64>,
}

impl BindingSpec {
    /// The construction for the given model.
    pub fn for_model(model: &ModelSpec) -> Result<Self> {
        let (kind, rho_spectrum) = match model.id {
            ModelId::Toy2d => (BindingKind::Toy, vec![-2.0, -2.0]),
            ModelId::GinzburgLandau => {
                let mut gains = Vec::with_capacity(model.noise_dim());
                let mut spectrum = model.linear_spectrum.clone();
                for (&k, &q) in model.noise_dims.iter().zip(&model.noise_coeffs) {
                    if q == 0.0 {
                        return Err(Error::Config(format!("G_{k} undefined: q_{k} = 0")));
                    }
                    let lambda = model.linear_spectrum[k] - 1.0;
                    gains.push(-(2.0 + lambda) / q);
                    spectrum[k] = -1.0;
                }
                (BindingKind::GinzburgLandau { gains }, spectrum)
            }
            ModelId::ReactionDiffusion => {
                // Both blocks share the rate of ζ, so ζ is advanced exactly.
                let spectrum = model.linear_spectrum.iter().map(|l| l - 3.0).collect();
                (BindingKind::ReactionDiffusion, spectrum)
            }
            ModelId::Chain => {
                (BindingKind::Chain(Arc::new(ZetaCascade::for_model(model)?)), model.linear_spectrum.clone())
            }
            ModelId::Linear => (BindingKind::Null, model.linear_spectrum.clone()),
        };
        Ok(Self { model: model.id, kind, noise_dim: model.noise_dim(), rho_spectrum })
    }

    pub fn null(model: &ModelSpec) -> Self {
        Self {
            model: model.id,
            kind: BindingKind::Null,
            noise_dim: model.noise_dim(),
            rho_spectrum: model.linear_spectrum.clone(),
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self.kind, BindingKind::Null)
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn cascade(&self) -> Option<&ZetaCascade> {
        match &self.kind {
            BindingKind::Chain(c) => Some(c),
            _ => None,
        }
    }

    /// Diagonal treated exactly when integrating `ρ`. Chosen so that each
    /// linear ζ variable has a single shared rate, which the exponential
    /// step then reproduces without discretization error.
    pub fn rho_spectrum(&self) -> &[f64] {
        &self.rho_spectrum
    }

    fn check(&self, model: &ModelSpec, x: &[f64], other: &[f64]) -> Result<()> {
        if model.id != self.model {
            return Err(Error::Config(format!(
                "binding built for {} used with {}",
                self.model.as_str(),
                model.id.as_str()
            )));
        }
        for v in [x, other] {
            if v.len() != model.dim {
                return Err(Error::DimensionMismatch { expected: model.dim, got: v.len() });
            }
        }
        Ok(())
    }

    /// `G(x, y)` in noise space.
    pub fn force(&self, model: &ModelSpec, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check(model, x, y)?;
        let rho: Vec<f64> = y.iter().zip(x).map(|(b, a)| b - a).collect();
        let mut out = vec![0.0; self.noise_dim];
        let mut scratch = Scratch::default();
        self.force_rho(model, x, &rho, &mut out, &mut scratch)?;
        Ok(out)
    }

    /// `G(x, x + ρ)` written into `out`; the integrator's entry point.
    pub fn force_rho(
        &self,
        model: &ModelSpec,
        x: &[f64],
        rho: &[f64],
        out: &mut [f64],
        scratch: &mut Scratch,
    ) -> Result<()> {
        match &self.kind {
            BindingKind::Null => out.iter_mut().for_each(|o| *o = 0.0),
            BindingKind::GinzburgLandau { gains } => {
                for ((o, &k), g) in out.iter_mut().zip(&model.noise_dims).zip(gains) {
                    *o = g * rho[k];
                }
            }
            BindingKind::Toy => {
                let rhs = scratch.rhs(model, x, rho);
                let zeta = rho[0] + 3.0 * rho[1];
                out[0] = -2.0 * zeta - (rhs[0] + 3.0 * rhs[1]);
            }
            BindingKind::ReactionDiffusion => {
                let rhs = scratch.rhs(model, x, rho);
                let m = model.dim / 2;
                for j in 0..m {
                    let rate = model.linear_spectrum[j] - 3.0;
                    let zeta = rho[j] + 3.0 * rho[m + j];
                    out[j] = rate * zeta - (rhs[j] + 3.0 * rhs[m + j]);
                }
            }
            BindingKind::Chain(c) => {
                c.pack(x, rho, &mut scratch.packed);
                out[0] = c.eval_g(&scratch.packed)?;
            }
        }
        Ok(())
    }

    /// Number of ζ diagnostics produced by [`BindingSpec::zeta`].
    pub fn zeta_len(&self, model: &ModelSpec) -> usize {
        match &self.kind {
            BindingKind::Toy => 1,
            BindingKind::ReactionDiffusion => model.dim / 2,
            BindingKind::Chain(c) => c.k_star,
            BindingKind::Null | BindingKind::GinzburgLandau { .. } => 0,
        }
    }

    /// ζ variables at `(x, x + ρ)`: the toy scalar, the RD mode vector, or
    /// `ζ₁ … ζ_{k*}` for the chain. Empty for constructions without ζ.
    pub fn zeta(&self, model: &ModelSpec, x: &[f64], rho: &[f64], scratch: &mut Scratch) -> Result<Vec<f64>> {
        Ok(match &self.kind {
            BindingKind::Toy => vec![rho[0] + 3.0 * rho[1]],
            BindingKind::ReactionDiffusion => {
                let m = model.dim / 2;
                (0..m).map(|j| rho[j] + 3.0 * rho[m + j]).collect()
            }
            BindingKind::Chain(c) => {
                c.pack(x, rho, &mut scratch.packed);
                let mut out = vec![0.0; c.k_star];
                c.eval_zetas(&scratch.packed, &mut out)?;
                out
            }
            BindingKind::Null | BindingKind::GinzburgLandau { .. } => Vec::new(),
        })
    }
}

/// Reusable buffers for force evaluation.
#[derive(Debug, Default, Clone)]
pub struct Scratch {
    rhs: Vec<f64>,
    packed: Vec<f64>,
}

impl Scratch {
    /// `Λρ + F(x+ρ) − F(x)`: the ρ equation without the binding term.
    fn rhs(&mut self, model: &ModelSpec, x: &[f64], rho: &[f64]) -> &[f64] {
        self.rhs.resize(model.dim, 0.0);
        model.nonlinear_difference(x, rho, &mut self.rhs);
        for ((r, l), p) in self.rhs.iter_mut().zip(&model.linear_spectrum).zip(rho) {
            *r += l * p;
        }
        &self.rhs
    }
}
