//! The four example systems on finite Galerkin truncations.
//!
//! Every model is written as `dx = (Λx + F(x)) dt + Q dω` with `Λ` diagonal
//! (`linear_spectrum`) and `Q` acting on the coordinates in `noise_dims`.
//! The integrator treats `Λ` exactly and `F` explicitly.

pub mod spectral;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use spectral::FourierBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    Toy2d,
    GinzburgLandau,
    ReactionDiffusion,
    Chain,
    /// Diagonal linear system with no nonlinearity; used for calibration.
    Linear,
}

impl ModelId {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::Toy2d => "toy2d",
            ModelId::GinzburgLandau => "ginzburg_landau",
            ModelId::ReactionDiffusion => "reaction_diffusion",
            ModelId::Chain => "chain",
            ModelId::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "toy2d" => ModelId::Toy2d,
            "ginzburg_landau" => ModelId::GinzburgLandau,
            "reaction_diffusion" => ModelId::ReactionDiffusion,
            "chain" => ModelId::Chain,
            "linear" => ModelId::Linear,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovKind {
    L2Norm,
    LinfNorm,
    L2NormPowP,
}

/// Lyapunov function `V` together with the constant `C` of `‖x‖ ≤ C(1 + V(x))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSpec {
    pub kind: LyapunovKind,
    pub p: f64,
    pub norm_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    Toy2d,
    GinzburgLandau { half_length: f64, modes: usize, forced: usize },
    ReactionDiffusion { half_length: f64, modes: usize },
    Chain { a_squared: f64, truncation: usize },
    Linear,
}

#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub id: ModelId,
    pub dim: usize,
    pub linear_spectrum: Vec<f64>,
    pub noise_dims: Vec<usize>,
    pub noise_coeffs: Vec<f64>,
    pub params: ModelParams,
    pub lyapunov: LyapunovSpec,
    basis: Option<Arc<FourierBasis>>,
}

impl ModelSpec {
    /// `dx₁ = (2x₁ + x₂ − x₁³)dt + dω`, `dx₂ = (2x₂ + x₁ − x₂³)dt`.
    /// `V(x) = ‖x‖²`.
    pub fn toy2d() -> Self {
        Self {
            id: ModelId::Toy2d,
            dim: 2,
            linear_spectrum: vec![2.0, 2.0],
            noise_dims: vec![0],
            noise_coeffs: vec![1.0],
            params: ModelParams::Toy2d,
            lyapunov: LyapunovSpec { kind: LyapunovKind::L2NormPowP, p: 2.0, norm_constant: 1.0 },
            basis: None,
        }
    }

    /// Stochastic Ginzburg-Landau `du = (Δu + u − u³)dt + Σ_{i<N} q_i e_i dω_i`
    /// on `[-L, L]` with `modes` Fourier modes, the first `forced` of which
    /// carry noise. Requires `λ_N + 1 < 0` for the first unforced mode.
    pub fn ginzburg_landau(half_length: f64, modes: usize, q: Vec<f64>) -> Result<Self> {
        let forced = q.len();
        if !(half_length > 0.0) {
            return Err(Error::Config("ginzburg_landau: L must be positive".into()));
        }
        if forced == 0 || forced >= modes {
            return Err(Error::Config(format!("ginzburg_landau: need 0 < N < M, got N={forced}, M={modes}")));
        }
        if q.iter().any(|&qi| !(qi > 0.0)) {
            return Err(Error::Config("ginzburg_landau: all q_i must be > 0".into()));
        }
        let basis = FourierBasis::new(half_length, modes);
        let lambda = basis.laplacian_eigenvalues();
        if !(lambda[forced] + 1.0 < 0.0) {
            return Err(Error::Config(format!(
                "ginzburg_landau: first unforced mode has λ+1 = {} ≥ 0; force more modes",
                lambda[forced] + 1.0
            )));
        }
        Ok(Self {
            id: ModelId::GinzburgLandau,
            dim: modes,
            linear_spectrum: lambda.iter().map(|l| l + 1.0).collect(),
            noise_dims: (0..forced).collect(),
            noise_coeffs: q,
            params: ModelParams::GinzburgLandau { half_length, modes, forced },
            lyapunov: LyapunovSpec { kind: LyapunovKind::L2Norm, p: 1.0, norm_constant: 1.0 },
            basis: Some(Arc::new(basis)),
        })
    }

    /// Reaction-diffusion pair `du = (Δu + 2u + v − u³)dt + dw`,
    /// `dv = (Δv + 2v + u − v³)dt`, with unit noise on every retained
    /// `u`-mode. State layout is `[u modes…, v modes…]`.
    pub fn reaction_diffusion(half_length: f64, modes: usize) -> Result<Self> {
        if !(half_length > 0.0) || modes == 0 {
            return Err(Error::Config("reaction_diffusion: need L > 0 and M ≥ 1".into()));
        }
        let basis = FourierBasis::new(half_length, modes);
        let lambda = basis.laplacian_eigenvalues();
        let spectrum: Vec<f64> = lambda.iter().chain(lambda.iter()).map(|l| l + 2.0).collect();
        Ok(Self {
            id: ModelId::ReactionDiffusion,
            dim: 2 * modes,
            linear_spectrum: spectrum,
            noise_dims: (0..modes).collect(),
            noise_coeffs: vec![1.0; modes],
            params: ModelParams::ReactionDiffusion { half_length, modes },
            lyapunov: LyapunovSpec {
                kind: LyapunovKind::LinfNorm,
                p: 1.0,
                norm_constant: (2.0 * half_length).sqrt(),
            },
            basis: Some(Arc::new(basis)),
        })
    }

    /// Nearest-neighbour chain `ẋ_k = (a² − k²)x_k + x_{k−1} + x_{k+1} − x_k³`
    /// with unit noise on `x₀`, truncated at `M` sites (`x_M ≡ 0`).
    /// `V(x) = ‖x‖^p`.
    pub fn chain(a_squared: f64, truncation: usize, p: f64) -> Result<Self> {
        if !(a_squared >= 0.0) {
            return Err(Error::Config("chain: a² must be ≥ 0".into()));
        }
        if truncation < 2 {
            return Err(Error::Config("chain: truncation must be ≥ 2".into()));
        }
        let last = (truncation - 1) as f64;
        if a_squared >= last * last {
            return Err(Error::Config(format!(
                "chain: a² = {a_squared} ≥ (M−1)² = {}; truncation too small",
                last * last
            )));
        }
        if !(p >= 1.0) {
            return Err(Error::Config("chain: Lyapunov exponent p must be ≥ 1".into()));
        }
        Ok(Self {
            id: ModelId::Chain,
            dim: truncation,
            linear_spectrum: (0..truncation).map(|k| a_squared - (k * k) as f64).collect(),
            noise_dims: vec![0],
            noise_coeffs: vec![1.0],
            params: ModelParams::Chain { a_squared, truncation },
            lyapunov: LyapunovSpec { kind: LyapunovKind::L2NormPowP, p, norm_constant: 1.0 },
            basis: None,
        })
    }

    /// `dx = Λx dt + Q dω` with `noise` pairs `(coordinate, q)`.
    pub fn linear(spectrum: Vec<f64>, noise: Vec<(usize, f64)>) -> Self {
        Self {
            id: ModelId::Linear,
            dim: spectrum.len(),
            linear_spectrum: spectrum,
            noise_dims: noise.iter().map(|n| n.0).collect(),
            noise_coeffs: noise.iter().map(|n| n.1).collect(),
            params: ModelParams::Linear,
            lyapunov: LyapunovSpec { kind: LyapunovKind::L2Norm, p: 1.0, norm_constant: 1.0 },
            basis: None,
        }
    }

    pub fn basis(&self) -> Option<&FourierBasis> {
        self.basis.as_deref()
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dims.len()
    }

    /// Spectral gap `a = min(1, −(λ_N + 1))` of the bound GL difference
    /// dynamics; `None` for other models.
    pub fn gl_gap(&self) -> Option<f64> {
        match self.params {
            ModelParams::GinzburgLandau { forced, .. } => Some((-self.linear_spectrum[forced]).min(1.0)),
            _ => None,
        }
    }

    pub fn a_squared(&self) -> Option<f64> {
        match self.params {
            ModelParams::Chain { a_squared, .. } => Some(a_squared),
            _ => None,
        }
    }

    fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState);
        }
        Ok(())
    }

    /// Full deterministic drift `Λx + F(x)`.
    pub fn drift(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_state(x)?;
        let mut out = vec![0.0; self.dim];
        self.nonlinear(x, &mut out);
        for ((o, l), xi) in out.iter_mut().zip(&self.linear_spectrum).zip(x) {
            *o += l * xi;
        }
        Ok(out)
    }

    /// Off-diagonal remainder `F(x)` written into `out`.
    pub fn nonlinear(&self, x: &[f64], out: &mut [f64]) {
        match self.id {
            ModelId::Toy2d => {
                out[0] = x[1] - x[0].powi(3);
                out[1] = x[0] - x[1].powi(3);
            }
            ModelId::Chain => {
                let m = self.dim;
                for k in 0..m {
                    let left = if k > 0 { x[k - 1] } else { 0.0 };
                    let right = if k + 1 < m { x[k + 1] } else { 0.0 };
                    out[k] = left + right - x[k].powi(3);
                }
            }
            ModelId::GinzburgLandau => {
                let b = self.basis.as_deref().expect("GL basis");
                let mut g = vec![0.0; b.grid_len()];
                b.to_grid(x, &mut g);
                g.iter_mut().for_each(|u| *u = -u.powi(3));
                b.project(&g, out);
            }
            ModelId::ReactionDiffusion => {
                let b = self.basis.as_deref().expect("RD basis");
                let m = b.modes();
                let (u, v) = x.split_at(m);
                let (ou, ov) = out.split_at_mut(m);
                let mut g = vec![0.0; b.grid_len()];
                b.to_grid(u, &mut g);
                g.iter_mut().for_each(|w| *w = -w.powi(3));
                b.project(&g, ou);
                b.to_grid(v, &mut g);
                g.iter_mut().for_each(|w| *w = -w.powi(3));
                b.project(&g, ov);
                for i in 0..m {
                    ou[i] += v[i];
                    ov[i] += u[i];
                }
            }
            ModelId::Linear => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }

    /// `F(x + ρ) − F(x)` in factored form, so the result is proportional to
    /// `ρ` without cancellation: cubic terms become `−ρ(3x² + 3xρ + ρ²)`.
    pub fn nonlinear_difference(&self, x: &[f64], rho: &[f64], out: &mut [f64]) {
        let cubic_diff = |x: f64, r: f64| -r * (3.0 * x * x + 3.0 * x * r + r * r);
        match self.id {
            ModelId::Toy2d => {
                out[0] = rho[1] + cubic_diff(x[0], rho[0]);
                out[1] = rho[0] + cubic_diff(x[1], rho[1]);
            }
            ModelId::Chain => {
                let m = self.dim;
                for k in 0..m {
                    let left = if k > 0 { rho[k - 1] } else { 0.0 };
                    let right = if k + 1 < m { rho[k + 1] } else { 0.0 };
                    out[k] = left + right + cubic_diff(x[k], rho[k]);
                }
            }
            ModelId::GinzburgLandau => {
                let b = self.basis.as_deref().expect("GL basis");
                let n = b.grid_len();
                let (mut gx, mut gr) = (vec![0.0; n], vec![0.0; n]);
                b.to_grid(x, &mut gx);
                b.to_grid(rho, &mut gr);
                for (r, xv) in gr.iter_mut().zip(&gx) {
                    *r = cubic_diff(*xv, *r);
                }
                b.project(&gr, out);
            }
            ModelId::ReactionDiffusion => {
                let b = self.basis.as_deref().expect("RD basis");
                let m = b.modes();
                let n = b.grid_len();
                let (mut gx, mut gr) = (vec![0.0; n], vec![0.0; n]);
                for half in 0..2 {
                    let s = half * m;
                    b.to_grid(&x[s..s + m], &mut gx);
                    b.to_grid(&rho[s..s + m], &mut gr);
                    for (r, xv) in gr.iter_mut().zip(&gx) {
                        *r = cubic_diff(*xv, *r);
                    }
                    b.project(&gr, &mut out[s..s + m]);
                }
                for i in 0..m {
                    out[i] += rho[m + i];
                    out[m + i] += rho[i];
                }
            }
            ModelId::Linear => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }

    /// Lyapunov function `V(x)`.
    pub fn lyapunov(&self, x: &[f64]) -> f64 {
        let l2 = || x.iter().map(|v| v * v).sum::<f64>().sqrt();
        match self.lyapunov.kind {
            LyapunovKind::L2Norm => l2(),
            LyapunovKind::L2NormPowP => l2().powf(self.lyapunov.p),
            LyapunovKind::LinfNorm => match self.basis.as_deref() {
                Some(b) => {
                    let m = b.modes();
                    let mut g = vec![0.0; b.grid_len()];
                    let mut total = 0.0;
                    for block in x.chunks(m) {
                        b.to_grid(block, &mut g);
                        total += g.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                    }
                    total
                }
                None => x.iter().fold(0.0f64, |acc, v| acc.max(v.abs())),
            },
        }
    }

    /// Places `q_i · dω_i` at the forced coordinates.
    pub fn apply_noise(&self, increments: &[f64]) -> Result<Vec<f64>> {
        if increments.len() != self.noise_dim() {
            return Err(Error::DimensionMismatch { expected: self.noise_dim(), got: increments.len() });
        }
        let mut out = vec![0.0; self.dim];
        for ((&d, &q), &dw) in self.noise_dims.iter().zip(&self.noise_coeffs).zip(increments) {
            out[d] += q * dw;
        }
        Ok(out)
    }

    /// Radius `R₀` such that `⟨x, drift(x)⟩ < 0` whenever `‖x‖∞ > R₀`
    /// (state-vector sup norm).
    ///
    /// Each bound follows from `⟨x, Λx + linear coupling⟩ ≤ c‖x‖²` and the
    /// quartic term dominating `‖x‖⁴ / D` by Cauchy-Schwarz, giving
    /// `R₀ = √(c·D)`.
    pub fn dissipativity_radius(&self) -> f64 {
        match &self.params {
            ModelParams::Toy2d => (3.0f64 * 2.0).sqrt(),
            ModelParams::Chain { a_squared, truncation } => ((a_squared + 2.0) * *truncation as f64).sqrt(),
            ModelParams::GinzburgLandau { half_length, .. } => (2.0 * half_length).sqrt(),
            ModelParams::ReactionDiffusion { half_length, .. } => (3.0 * 4.0 * half_length).sqrt(),
            ModelParams::Linear => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_drift_examples() {
        let m = ModelSpec::toy2d();
        assert_eq!(m.drift(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(m.drift(&[1.0, 1.0]).unwrap(), vec![2.0, 2.0]);
        assert_eq!(m.drift(&[f64::NAN, 0.0]).unwrap_err(), Error::NonFiniteState);
        assert!(matches!(m.drift(&[0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn chain_drift_matches_naive_per_site() {
        let m = ModelSpec::chain(5.0, 8, 2.0).unwrap();
        let mut e2 = vec![0.0; 8];
        e2[2] = 1.0;
        let d = m.drift(&e2).unwrap();
        // Straight-line evaluation of each site equation.
        let naive = |x: &[f64], k: usize| {
            let left = if k == 0 { 0.0 } else { x[k - 1] };
            let right = if k == 7 { 0.0 } else { x[k + 1] };
            (5.0 - (k * k) as f64) * x[k] + left + right - x[k] * x[k] * x[k]
        };
        for k in 0..8 {
            assert_eq!(d[k], naive(&e2, k));
        }
        assert_eq!(d[1], 1.0);
        assert_eq!(d[2], 0.0);
        assert_eq!(d[3], 1.0);
    }

    #[test]
    fn lyapunov_examples() {
        let gl = ModelSpec::ginzburg_landau(std::f64::consts::PI, 16, vec![1.0; 3]).unwrap();
        assert_eq!(gl.lyapunov(&[0.0; 16]), 0.0);

        let l = 1.5;
        let rd = ModelSpec::reaction_diffusion(l, 8).unwrap();
        let mut x = vec![0.0; 16];
        x[0] = 2.0 * (2.0 * l).sqrt();
        x[8] = -3.0 * (2.0 * l).sqrt();
        assert!((rd.lyapunov(&x) - 5.0).abs() < 1e-12);

        let ch = ModelSpec::chain(0.0, 6, 2.0).unwrap();
        let mut e = vec![0.0; 6];
        e[0] = 1.0;
        e[1] = 1.0;
        assert!((ch.lyapunov(&e) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn apply_noise_examples() {
        let gl = ModelSpec::ginzburg_landau(std::f64::consts::PI, 8, vec![1.0, 0.5, 0.5]).unwrap();
        assert_eq!(gl.apply_noise(&[0.0; 3]).unwrap(), vec![0.0; 8]);
        let v = gl.apply_noise(&[1.0, 1.0, 0.0]).unwrap();
        assert_eq!(&v[..3], &[1.0, 0.5, 0.0]);

        let gl2 = ModelSpec::ginzburg_landau(0.5, 8, vec![1.0, 0.5]).unwrap();
        let v = gl2.apply_noise(&[1.0, 1.0]).unwrap();
        assert_eq!(v, vec![1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);

        let ch = ModelSpec::chain(2.0, 12, 2.0).unwrap();
        let v = ch.apply_noise(&[0.3]).unwrap();
        assert_eq!(v[0], 0.3);
        assert!(v[1..].iter().all(|&x| x == 0.0));
        assert!(ch.apply_noise(&[0.3, 0.1]).is_err());
    }

    #[test]
    fn gl_validation() {
        use std::f64::consts::PI;
        // With L = π the first cos/sin pair has λ = −1, so λ+1 = 0 is not enough.
        assert!(ModelSpec::ginzburg_landau(PI, 16, vec![1.0]).is_err());
        assert!(ModelSpec::ginzburg_landau(PI, 16, vec![1.0, 1.0]).is_err());
        let m = ModelSpec::ginzburg_landau(PI, 16, vec![1.0; 3]).unwrap();
        assert_eq!(m.gl_gap(), Some(1.0));
        assert!(ModelSpec::ginzburg_landau(PI, 16, vec![1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn gl_spectrum_ordering() {
        let m = ModelSpec::ginzburg_landau(std::f64::consts::PI, 64, vec![1.0; 3]).unwrap();
        assert_eq!(m.linear_spectrum[0], 1.0);
        assert!(m.linear_spectrum.windows(2).all(|w| w[1] <= w[0]));
        // Strict decrease between wavenumber shells.
        let b = m.basis().unwrap();
        for i in 1..63 {
            if b.wavenumber(i + 1) > b.wavenumber(i) {
                assert!(m.linear_spectrum[i + 1] < m.linear_spectrum[i]);
            }
        }
    }

    #[test]
    fn chain_validation() {
        assert!(ModelSpec::chain(9.0, 4, 2.0).is_err());
        assert!(ModelSpec::chain(8.9, 4, 2.0).is_ok());
        assert!(ModelSpec::chain(-1.0, 8, 2.0).is_err());
        let m = ModelSpec::chain(5.0, 12, 2.0).unwrap();
        assert_eq!(m.linear_spectrum[3], 5.0 - 9.0);
    }

    #[test]
    fn nonlinear_difference_matches_direct_difference() {
        let models = vec![
            ModelSpec::toy2d(),
            ModelSpec::chain(2.0, 9, 2.0).unwrap(),
            ModelSpec::ginzburg_landau(std::f64::consts::PI, 12, vec![1.0; 3]).unwrap(),
            ModelSpec::reaction_diffusion(2.0, 6).unwrap(),
        ];
        for m in models {
            let x: Vec<f64> = (0..m.dim).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
            let r: Vec<f64> = (0..m.dim).map(|i| ((i * 13 % 7) as f64 - 3.0) / 9.0).collect();
            let y: Vec<f64> = x.iter().zip(&r).map(|(a, b)| a + b).collect();
            let (mut fx, mut fy, mut nd) = (vec![0.0; m.dim], vec![0.0; m.dim], vec![0.0; m.dim]);
            m.nonlinear(&x, &mut fx);
            m.nonlinear(&y, &mut fy);
            m.nonlinear_difference(&x, &r, &mut nd);
            for i in 0..m.dim {
                assert!((fy[i] - fx[i] - nd[i]).abs() < 1e-12, "{:?} {i}", m.id);
            }
        }
    }
}
