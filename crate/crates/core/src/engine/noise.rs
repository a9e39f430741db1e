//! Brownian increments on a fixed time grid.
//!
//! A path is fully determined by `(seed, stream, dt, steps, dims)`: the
//! generator is ChaCha8 seeded from `seed` and switched to `stream`, and
//! increments are drawn row by row as `√dt · N(0, 1)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::models::ModelSpec;

const MAGIC: &[u8; 8] = b"ACNOISE1";

/// Streaming source of increments; yields the same numbers as
/// [`NoisePath::sample`] with the same parameters.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
    scale: f64,
}

impl NoiseSource {
    pub fn new(dt: f64, seed: u64, stream: u64) -> Result<Self> {
        check_dt(dt)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Ok(Self { rng, scale: dt.sqrt() })
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for o in out {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            *o = self.scale * z;
        }
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub seed: u64,
    pub stream: u64,
    pub dt: f64,
    steps: usize,
    dims: usize,
    increments: Vec<f64>,
}

/// Samples `steps` increments for every forced coordinate of `model`.
pub fn sample_noise(model: &ModelSpec, steps: usize, dt: f64, seed: u64, stream: u64) -> Result<NoisePath> {
    NoisePath::sample(model.noise_dim(), steps, dt, seed, stream)
}

impl NoisePath {
    pub fn sample(dims: usize, steps: usize, dt: f64, seed: u64, stream: u64) -> Result<Self> {
        let mut src = NoiseSource::new(dt, seed, stream)?;
        let mut increments = vec![0.0; dims * steps];
        src.fill(&mut increments);
        Ok(Self { seed, stream, dt, steps, dims, increments })
    }

    /// Wraps explicit increments, stored row-major `[steps × dims]`.
    pub fn from_increments(
        dt: f64,
        dims: usize,
        increments: Vec<f64>,
        seed: u64,
        stream: u64,
    ) -> Result<Self> {
        check_dt(dt)?;
        if dims == 0 && !increments.is_empty() || dims > 0 && increments.len() % dims != 0 {
            return Err(Error::NoiseFormat(format!(
                "{} increments do not split into rows of {dims}",
                increments.len()
            )));
        }
        if increments.iter().any(|v| !v.is_finite()) {
            return Err(Error::NoiseFormat("non-finite increment".into()));
        }
        let steps = increments.len().checked_div(dims).unwrap_or(0);
        Ok(Self { seed, stream, dt, steps, dims, increments })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.increments[n * self.dims..(n + 1) * self.dims]
    }

    /// Sums blocks of `factor` consecutive increments: the same Brownian
    /// path seen on a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.steps % factor != 0 {
            return Err(Error::Config(format!("cannot coarsen {} steps by {factor}", self.steps)));
        }
        let steps = self.steps / factor;
        let mut inc = vec![0.0; steps * self.dims];
        for n in 0..self.steps {
            let c = n / factor;
            for d in 0..self.dims {
                inc[c * self.dims + d] += self.increments[n * self.dims + d];
            }
        }
        Ok(Self {
            seed: self.seed,
            stream: self.stream,
            dt: self.dt * factor as f64,
            steps,
            dims: self.dims,
            increments: inc,
        })
    }

    /// `Δω̃ = Δω + s · G · dt` for a per-step record of `G`; `s = ±1`.
    pub(crate) fn shifted(&self, forces: &[f64], sign: f64) -> Result<Self> {
        if forces.len() != self.increments.len() {
            return Err(Error::DimensionMismatch { expected: self.increments.len(), got: forces.len() });
        }
        let increments = self.increments.iter().zip(forces).map(|(w, g)| w + sign * g * self.dt).collect();
        Ok(Self { increments, ..self.clone() })
    }

    /// Binary layout: magic `ACNOISE1`, then little-endian `seed: u64`,
    /// `stream: u64`, `dt: f64`, `steps: u64`, `dims: u64`, then the
    /// increments as `f64` row-major.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.stream.to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&(self.steps as u64).to_le_bytes())?;
        w.write_all(&(self.dims as u64).to_le_bytes())?;
        for v in &self.increments {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| Error::NoiseFormat("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(Error::NoiseFormat("bad magic".into()));
        }
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut word).map_err(|_| Error::NoiseFormat("truncated data".into()))?;
            Ok(word)
        };
        let seed = u64::from_le_bytes(next(&mut r)?);
        let stream = u64::from_le_bytes(next(&mut r)?);
        let dt = f64::from_le_bytes(next(&mut r)?);
        let steps = u64::from_le_bytes(next(&mut r)?) as usize;
        let dims = u64::from_le_bytes(next(&mut r)?) as usize;
        let total = steps.checked_mul(dims).ok_or_else(|| Error::NoiseFormat("size overflow".into()))?;
        let mut increments = Vec::with_capacity(total.min(1 << 24));
        for _ in 0..total {
            increments.push(f64::from_le_bytes(next(&mut r)?));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::NoiseFormat(format!("{} trailing bytes", rest.len())));
        }
        Self::from_increments(dt, dims, increments, seed, stream)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_and_stream_dependent() {
        let a = NoisePath::sample(3, 100, 1e-3, 7, 0).unwrap();
        let b = NoisePath::sample(3, 100, 1e-3, 7, 0).unwrap();
        let c = NoisePath::sample(3, 100, 1e-3, 7, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.increments(), c.increments());
    }

    #[test]
    fn streaming_matches_stored() {
        let p = NoisePath::sample(2, 50, 0.01, 3, 9).unwrap();
        let mut src = NoiseSource::new(0.01, 3, 9).unwrap();
        let mut row = [0.0; 2];
        for n in 0..50 {
            src.fill(&mut row);
            assert_eq!(&row, p.row(n));
        }
    }

    #[test]
    fn rejects_bad_dt() {
        assert!(matches!(NoisePath::sample(1, 10, 0.0, 1, 0), Err(Error::Config(_))));
        assert!(matches!(NoisePath::sample(1, 10, -1.0, 1, 0), Err(Error::Config(_))));
    }

    #[test]
    fn moments() {
        let dt = 1e-3;
        let p = NoisePath::sample(1, 100_000, dt, 42, 0).unwrap();
        let n = p.increments().len() as f64;
        let mean = p.increments().iter().sum::<f64>() / n;
        assert!(mean.abs() < 4.0 * dt.sqrt() / n.sqrt());
        let q = NoisePath::sample(1, 10_000, dt, 43, 0).unwrap();
        let var = q.increments().iter().map(|v| v * v).sum::<f64>() / 10_000.0;
        assert!((var / dt - 1.0).abs() < 0.05);
    }

    #[test]
    fn binary_round_trip() {
        let p = NoisePath::sample(4, 33, 0.125, 5, 2).unwrap();
        let mut buf = Vec::new();
        p.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 5 * 8 + 4 * 33 * 8);
        let q = NoisePath::read_from(&buf[..]).unwrap();
        assert_eq!(p, q);
        assert!(NoisePath::read_from(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(NoisePath::read_from(&bad[..]).is_err());
    }

    #[test]
    fn coarsen_sums_blocks() {
        let p = NoisePath::from_increments(0.5, 1, vec![1.0, 2.0, 3.0, 4.0], 0, 0).unwrap();
        let c = p.coarsen(2).unwrap();
        assert_eq!(c.increments(), &[3.0, 7.0]);
        assert_eq!(c.dt, 1.0);
        assert!(p.coarsen(3).is_err());
    }
}
