//! Real orthonormal Fourier basis on the periodic interval `[-L, L]`.
//!
//! Mode order: the constant, then `cos_k`, `sin_k` for `k = 1, 2, …`; an even
//! mode count ends on a lone `cos_{M/2}`. Products are evaluated on a grid
//! of `3M/2` points and projected back, so the discrete inner product of a
//! band-limited field with a projected product is an exact quadrature.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Const,
    Cos,
    Sin,
}

#[derive(Clone)]
pub struct FourierBasis {
    half_length: f64,
    kinds: Vec<ModeKind>,
    wavenumbers: Vec<usize>,
    grid: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FourierBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierBasis")
            .field("half_length", &self.half_length)
            .field("modes", &self.kinds.len())
            .field("grid", &self.grid)
            .finish()
    }
}

impl FourierBasis {
    pub fn new(half_length: f64, modes: usize) -> Self {
        assert!(modes >= 1 && half_length > 0.0);
        let mut kinds = vec![ModeKind::Const];
        let mut wavenumbers = vec![0];
        let mut k = 1;
        while kinds.len() < modes {
            kinds.push(ModeKind::Cos);
            wavenumbers.push(k);
            if kinds.len() < modes {
                kinds.push(ModeKind::Sin);
                wavenumbers.push(k);
            }
            k += 1;
        }
        let mut grid = (3 * modes).div_ceil(2);
        grid += grid % 2;
        grid = grid.max(4);
        let mut planner = FftPlanner::new();
        Self {
            half_length,
            kinds,
            wavenumbers,
            grid,
            forward: planner.plan_fft_forward(grid),
            inverse: planner.plan_fft_inverse(grid),
        }
    }

    pub fn modes(&self) -> usize {
        self.kinds.len()
    }

    pub fn grid_len(&self) -> usize {
        self.grid
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn kind(&self, mode: usize) -> ModeKind {
        self.kinds[mode]
    }

    pub fn wavenumber(&self, mode: usize) -> usize {
        self.wavenumbers[mode]
    }

    /// Laplacian eigenvalue `-(πk/L)²` of each mode.
    pub fn laplacian_eigenvalues(&self) -> Vec<f64> {
        self.wavenumbers
            .iter()
            .map(|&k| {
                let w = std::f64::consts::PI * k as f64 / self.half_length;
                -w * w
            })
            .collect()
    }

    /// Grid spacing `2L / grid`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.grid as f64
    }

    /// Evaluates mode `m` at grid point `j` directly (slow; for checks).
    pub fn mode_value(&self, m: usize, j: usize) -> f64 {
        let l = self.half_length;
        let theta = 2.0 * std::f64::consts::PI * (self.wavenumbers[m] * j) as f64 / self.grid as f64;
        match self.kinds[m] {
            ModeKind::Const => 1.0 / (2.0 * l).sqrt(),
            ModeKind::Cos => theta.cos() / l.sqrt(),
            ModeKind::Sin => theta.sin() / l.sqrt(),
        }
    }

    /// Synthesizes grid values from mode coefficients.
    pub fn to_grid(&self, coeffs: &[f64], out: &mut [f64]) {
        debug_assert_eq!(coeffs.len(), self.modes());
        debug_assert_eq!(out.len(), self.grid);
        let l = self.half_length;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.grid];
        let s = 0.5 / l.sqrt();
        for (m, &c) in coeffs.iter().enumerate() {
            let k = self.wavenumbers[m];
            match self.kinds[m] {
                ModeKind::Const => buf[0].re += c / (2.0 * l).sqrt(),
                ModeKind::Cos => {
                    buf[k].re += c * s;
                    buf[self.grid - k].re += c * s;
                }
                ModeKind::Sin => {
                    buf[k].im -= c * s;
                    buf[self.grid - k].im += c * s;
                }
            }
        }
        self.inverse.process(&mut buf);
        for (o, z) in out.iter_mut().zip(&buf) {
            *o = z.re;
        }
    }

    /// Discrete projection of grid values onto the retained modes.
    pub fn project(&self, values: &[f64], out: &mut [f64]) {
        debug_assert_eq!(values.len(), self.grid);
        debug_assert_eq!(out.len(), self.modes());
        let l = self.half_length;
        let h = self.spacing();
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        for (m, o) in out.iter_mut().enumerate() {
            let k = self.wavenumbers[m];
            *o = match self.kinds[m] {
                ModeKind::Const => h * buf[0].re / (2.0 * l).sqrt(),
                ModeKind::Cos => h * buf[k].re / l.sqrt(),
                ModeKind::Sin => -h * buf[k].im / l.sqrt(),
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthesis_matches_direct_evaluation() {
        let b = FourierBasis::new(std::f64::consts::PI, 9);
        let coeffs: Vec<f64> = (0..9).map(|i| (i as f64 * 0.7).sin() + 0.1).collect();
        let mut grid = vec![0.0; b.grid_len()];
        b.to_grid(&coeffs, &mut grid);
        for (j, g) in grid.iter().enumerate() {
            let direct: f64 = (0..9).map(|m| coeffs[m] * b.mode_value(m, j)).sum();
            assert!((g - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_inverts_synthesis() {
        for modes in [1, 2, 7, 64] {
            let b = FourierBasis::new(2.5, modes);
            let coeffs: Vec<f64> = (0..modes).map(|i| 1.0 / (1.0 + i as f64)).collect();
            let mut grid = vec![0.0; b.grid_len()];
            b.to_grid(&coeffs, &mut grid);
            let mut back = vec![0.0; modes];
            b.project(&grid, &mut back);
            for (a, c) in coeffs.iter().zip(&back) {
                assert!((a - c).abs() < 1e-12, "modes={modes}");
            }
        }
    }

    #[test]
    fn grid_quadrature_matches_coefficient_norm() {
        let b = FourierBasis::new(1.3, 64);
        let coeffs: Vec<f64> = (0..64).map(|i| ((i * 7 % 11) as f64 - 5.0) / 10.0).collect();
        let mut grid = vec![0.0; b.grid_len()];
        b.to_grid(&coeffs, &mut grid);
        let quad: f64 = grid.iter().map(|v| v * v).sum::<f64>() * b.spacing();
        let norm: f64 = coeffs.iter().map(|c| c * c).sum();
        assert!((quad - norm).abs() < 1e-10);
    }

    #[test]
    fn eigenvalues_non_increasing() {
        let b = FourierBasis::new(std::f64::consts::PI, 10);
        let ev = b.laplacian_eigenvalues();
        assert_eq!(&ev[..5], &[0.0, -1.0, -1.0, -4.0, -4.0]);
        assert!(ev.windows(2).all(|w| w[1] <= w[0]));
    }
}
