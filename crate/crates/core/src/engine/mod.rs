//! Exponential Euler integration of single and coupled trajectories.
//!
//! One step of `dx = (Λx + F(x))dt + Q dω` with diagonal `Λ` is
//!
//! `x ← e^{ΛΔ}x + φ(Λ)·(F(x)Δ + QΔω)`,   `φ(λ) = (e^{λΔ} − 1)/(λΔ)`.
//!
//! The coupled system integrates `x` this way and the difference `ρ = y − x`
//! with drift `Λρ + F(x+ρ) − F(x) + QG(x, x+ρ)`. The noise cancels from the
//! ρ equation, so ρ is advanced deterministically given `x`; `y` is only ever
//! reconstructed as `x + ρ`.
//!
//! For the chain the force applied over a step is the value that advances
//! `ζ_{k*}` by exactly `e^{−Δ}`; it agrees with the polynomial `G(x_n, y_n)`
//! up to `O(Δ)` and, like it, depends only on the state at the left point.

pub mod noise;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::binding::{BindingSpec, Scratch};
use crate::error::{Error, Result};
use crate::models::ModelSpec;
pub use noise::{sample_noise, NoisePath, NoiseSource};

/// `|log 𝒟|` beyond this is flagged instead of exponentiated.
pub const LOG_DENSITY_LIMIT: f64 = 700.0;

#[derive(Debug, Clone)]
struct Propagator {
    decay: Vec<f64>,
    weight: Vec<f64>,
}

impl Propagator {
    fn new(spectrum: &[f64], dt: f64) -> Self {
        let decay = spectrum.iter().map(|l| (l * dt).exp()).collect();
        let weight = spectrum.iter().map(|&l| if l == 0.0 { dt } else { (l * dt).exp_m1() / l }).collect();
        Self { decay, weight }
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    Ok(())
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Single-trajectory stepper; cheap to build, one per worker.
#[derive(Debug, Clone)]
pub struct Stepper<'m> {
    model: &'m ModelSpec,
    dt: f64,
    prop: Propagator,
    noise_gain: Vec<f64>,
    f: Vec<f64>,
}

impl<'m> Stepper<'m> {
    pub fn new(model: &'m ModelSpec, dt: f64) -> Result<Self> {
        check_dt(dt)?;
        let prop = Propagator::new(&model.linear_spectrum, dt);
        let noise_gain =
            model.noise_dims.iter().zip(&model.noise_coeffs).map(|(&d, q)| q * prop.weight[d] / dt).collect();
        Ok(Self { model, dt, prop, noise_gain, f: vec![0.0; model.dim] })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `x` by one step; returns `false` if the state became
    /// non-finite.
    pub fn step(&mut self, x: &mut [f64], dw: &[f64]) -> bool {
        self.model.nonlinear(x, &mut self.f);
        for i in 0..x.len() {
            x[i] = self.prop.decay[i] * x[i] + self.prop.weight[i] * self.f[i];
        }
        for ((&d, g), w) in self.model.noise_dims.iter().zip(&self.noise_gain).zip(dw) {
            x[d] += g * w;
        }
        all_finite(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has the initial state")
    }
}

/// Integrates `x0` along `noise`, recording every grid time.
pub fn integrate(model: &ModelSpec, x0: &[f64], noise: &NoisePath) -> Result<Trajectory> {
    check_dims(model, x0, noise)?;
    let mut stepper = Stepper::new(model, noise.dt)?;
    let mut x = x0.to_vec();
    let mut times = vec![0.0];
    let mut states = vec![x.clone()];
    for n in 0..noise.steps() {
        let t = (n + 1) as f64 * noise.dt;
        if !stepper.step(&mut x, noise.row(n)) {
            return Err(Error::BlowUp { t });
        }
        times.push(t);
        states.push(x.clone());
    }
    Ok(Trajectory { dt: noise.dt, times, states })
}

fn check_dims(model: &ModelSpec, x0: &[f64], noise: &NoisePath) -> Result<()> {
    if x0.len() != model.dim {
        return Err(Error::DimensionMismatch { expected: model.dim, got: x0.len() });
    }
    if noise.dims() != model.noise_dim() {
        return Err(Error::DimensionMismatch { expected: model.noise_dim(), got: noise.dims() });
    }
    if !all_finite(x0) {
        return Err(Error::NonFiniteState);
    }
    Ok(())
}

/// Running `∫G·dω − ½∫‖G‖²dt` with left-point evaluation of `G`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GirsanovAccumulator {
    pub log_density: f64,
    pub g_l2: f64,
    pub overflow: bool,
}

impl GirsanovAccumulator {
    pub fn update(&mut self, g: &[f64], dw: &[f64], dt: f64) {
        let gg: f64 = g.iter().map(|v| v * v).sum();
        let gw: f64 = g.iter().zip(dw).map(|(a, b)| a * b).sum();
        self.log_density += gw - 0.5 * gg * dt;
        self.g_l2 += gg * dt;
        if !(self.log_density.abs() <= LOG_DENSITY_LIMIT) {
            self.overflow = true;
        }
    }

    pub fn density(&self) -> Result<f64> {
        if self.overflow {
            return Err(Error::DensityOverflow);
        }
        Ok(self.log_density.exp())
    }
}

/// State of the coupled pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub t: f64,
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
    pub girsanov: GirsanovAccumulator,
}

impl CoupledState {
    pub fn new(x0: &[f64], y0: &[f64]) -> Self {
        Self {
            t: 0.0,
            x: x0.to_vec(),
            rho: y0.iter().zip(x0).map(|(b, a)| b - a).collect(),
            girsanov: GirsanovAccumulator::default(),
        }
    }

    pub fn y(&self) -> Vec<f64> {
        self.x.iter().zip(&self.rho).map(|(a, r)| a + r).collect()
    }

    pub fn rho_norm(&self) -> f64 {
        self.rho.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Coupled stepper: `x` with the model's exact diagonal, `ρ` with the
/// binding's diagonal (see [`BindingSpec::rho_spectrum`]), the remainder
/// explicit.
#[derive(Debug, Clone)]
pub struct CoupledStepper<'m> {
    inner: Stepper<'m>,
    binding: &'m BindingSpec,
    rho_prop: Propagator,
    rho_shift: Vec<f64>,
    nd: Vec<f64>,
    g: Vec<f64>,
    packed: Vec<f64>,
    scratch: Scratch,
}

impl<'m> CoupledStepper<'m> {
    pub fn new(model: &'m ModelSpec, binding: &'m BindingSpec, dt: f64) -> Result<Self> {
        if binding.model != model.id || binding.noise_dim() != model.noise_dim() {
            return Err(Error::Config(format!(
                "binding built for {} used with {}",
                binding.model.as_str(),
                model.id.as_str()
            )));
        }
        let inner = Stepper::new(model, dt)?;
        let rs = binding.rho_spectrum();
        Ok(Self {
            inner,
            binding,
            rho_prop: Propagator::new(rs, dt),
            rho_shift: model.linear_spectrum.iter().zip(rs).map(|(a, b)| a - b).collect(),
            nd: vec![0.0; model.dim],
            g: vec![0.0; model.noise_dim()],
            packed: Vec::new(),
            scratch: Scratch::default(),
        })
    }

    pub fn model(&self) -> &ModelSpec {
        self.inner.model
    }

    pub fn dt(&self) -> f64 {
        self.inner.dt
    }

    /// `G` used in the most recent step (left point).
    pub fn last_force(&self) -> &[f64] {
        &self.g
    }

    pub fn scratch(&mut self) -> &mut Scratch {
        &mut self.scratch
    }

    /// One step; errors with `BlowUp` at the new time if either component
    /// leaves the finite range.
    pub fn step(&mut self, s: &mut CoupledState, dw: &[f64]) -> Result<()> {
        let model = self.inner.model;
        let dt = self.inner.dt;
        let cascade = self.binding.cascade();
        if cascade.is_none() {
            self.binding.force_rho(model, &s.x, &s.rho, &mut self.g, &mut self.scratch)?;
        }
        model.nonlinear_difference(&s.x, &s.rho, &mut self.nd);
        for i in 0..model.dim {
            self.nd[i] += self.rho_shift[i] * s.rho[i];
        }
        if cascade.is_none() {
            for ((&d, q), g) in model.noise_dims.iter().zip(&model.noise_coeffs).zip(&self.g) {
                self.nd[d] += q * g;
            }
        }
        let zeta_old = match cascade {
            Some(c) => {
                c.pack(&s.x, &s.rho, &mut self.packed);
                c.eval_top(&self.packed)?
            }
            None => 0.0,
        };
        for i in 0..model.dim {
            s.rho[i] = self.rho_prop.decay[i] * s.rho[i] + self.rho_prop.weight[i] * self.nd[i];
        }
        let ok = self.inner.step(&mut s.x, dw);
        if let Some(c) = cascade {
            // ζ_{k*} = ρ₀ + 𝒬 with 𝒬 free of x₀ and ρ₀, so the new x and the
            // G-free ρ fix 𝒬; choose G so the step advances ζ_{k*} by e^{−Δ}.
            // G depends only on time-n data, so the Itô integral stays exact.
            if ok && all_finite(&s.rho) {
                c.pack(&s.x, &s.rho, &mut self.packed);
                let free = c.eval_top(&self.packed)?;
                let target = (-dt).exp() * zeta_old - (free - s.rho[0]);
                let gain = self.rho_prop.weight[0] * model.noise_coeffs[0];
                self.g[0] = (target - s.rho[0]) / gain;
                s.rho[0] = target;
            } else {
                self.g[0] = f64::NAN;
            }
        }
        s.girsanov.update(&self.g, dw, dt);
        s.t += dt;
        if !ok || !all_finite(&s.rho) || !all_finite(&self.g) {
            return Err(Error::BlowUp { t: s.t });
        }
        Ok(())
    }
}

/// Running supremum of a quantity over each closed unit interval `[n, n+1]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UnitSup {
    pub values: Vec<f64>,
}

impl UnitSup {
    pub fn with_intervals(n: usize) -> Self {
        Self { values: vec![f64::NEG_INFINITY; n] }
    }

    pub fn observe(&mut self, t: f64, v: f64) {
        let eps = 1e-9;
        let k = (t + eps).floor();
        let mut update = |i: f64| {
            if i >= 0.0 && (i as usize) < self.values.len() {
                let s = &mut self.values[i as usize];
                *s = s.max(v);
            }
        };
        update(k);
        if (t - k).abs() < eps {
            update(k - 1.0);
        }
    }
}

/// Number of complete unit intervals in `[0, steps·dt]`.
pub fn unit_intervals(steps: usize, dt: f64) -> usize {
    (steps as f64 * dt + 1e-9).floor() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledTrajectory {
    pub dt: f64,
    pub stride: usize,
    pub times: Vec<f64>,
    pub x_path: Vec<Vec<f64>>,
    pub rho_path: Vec<Vec<f64>>,
    pub zeta_path: Vec<Vec<f64>>,
    pub log_density_path: Vec<f64>,
    /// `G` at the left point of every step, row-major `[steps × noise_dim]`.
    pub forces: Vec<f64>,
    pub girsanov: GirsanovAccumulator,
    pub w_sup_x: UnitSup,
    pub w_sup_y: UnitSup,
    /// Time of blow-up if integration stopped early.
    pub blow_up: Option<f64>,
}

impl CoupledTrajectory {
    pub fn y_path(&self) -> Vec<Vec<f64>> {
        self.x_path
            .iter()
            .zip(&self.rho_path)
            .map(|(x, r)| x.iter().zip(r).map(|(a, b)| a + b).collect())
            .collect()
    }

    pub fn rho_norms(&self) -> Vec<f64> {
        self.rho_path.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect()
    }

    /// Trajectory dump: a `#` comment line documenting the columns, a header
    /// row, then one row per recorded time.
    pub fn write_csv<W: Write>(&self, model: &ModelSpec, mut w: W, fingerprint: &str) -> Result<()> {
        let nz = self.zeta_path.first().map_or(0, Vec::len);
        writeln!(
            w,
            "# fingerprint={fingerprint}; columns: t time, V_x and V_y Lyapunov values, \
             rho_norm Euclidean norm of y-x, zeta_i binding variables, log_density Girsanov log density"
        )?;
        let mut header = String::from("t,V_x,V_y,rho_norm");
        for i in 0..nz {
            header.push_str(&format!(",zeta_{}", i + 1));
        }
        header.push_str(",log_density");
        writeln!(w, "{header}")?;
        let ys = self.y_path();
        for i in 0..self.times.len() {
            let rn: f64 = self.rho_path[i].iter().map(|v| v * v).sum::<f64>().sqrt();
            write!(
                w,
                "{},{},{},{}",
                self.times[i],
                model.lyapunov(&self.x_path[i]),
                model.lyapunov(&ys[i]),
                rn
            )?;
            for z in &self.zeta_path[i] {
                write!(w, ",{z}")?;
            }
            writeln!(w, ",{}", self.log_density_path[i])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Coupled integration recording every step; blow-up is an error.
pub fn integrate_coupled(
    model: &ModelSpec,
    binding: &BindingSpec,
    x0: &[f64],
    y0: &[f64],
    noise: &NoisePath,
) -> Result<CoupledTrajectory> {
    let (traj, err) = integrate_coupled_with(model, binding, x0, y0, noise, 1)?;
    match err {
        Some(e) => Err(e),
        None => Ok(traj),
    }
}

/// Coupled integration recording every `stride` steps (and the final
/// step). Blow-up returns the partial trajectory alongside the error.
pub fn integrate_coupled_with(
    model: &ModelSpec,
    binding: &BindingSpec,
    x0: &[f64],
    y0: &[f64],
    noise: &NoisePath,
    stride: usize,
) -> Result<(CoupledTrajectory, Option<Error>)> {
    check_dims(model, x0, noise)?;
    check_dims(model, y0, noise)?;
    let stride = stride.max(1);
    let dt = noise.dt;
    let mut stepper = CoupledStepper::new(model, binding, dt)?;
    let mut s = CoupledState::new(x0, y0);
    let units = unit_intervals(noise.steps(), dt);
    let mut traj = CoupledTrajectory {
        dt,
        stride,
        times: Vec::new(),
        x_path: Vec::new(),
        rho_path: Vec::new(),
        zeta_path: Vec::new(),
        log_density_path: Vec::new(),
        forces: Vec::with_capacity(noise.steps() * model.noise_dim()),
        girsanov: GirsanovAccumulator::default(),
        w_sup_x: UnitSup::with_intervals(units),
        w_sup_y: UnitSup::with_intervals(units),
        blow_up: None,
    };
    let record = |traj: &mut CoupledTrajectory, s: &CoupledState, st: &mut CoupledStepper| -> Result<()> {
        traj.times.push(s.t);
        traj.x_path.push(s.x.clone());
        traj.rho_path.push(s.rho.clone());
        traj.zeta_path.push(binding.zeta(model, &s.x, &s.rho, st.scratch())?);
        traj.log_density_path.push(s.girsanov.log_density);
        Ok(())
    };
    let observe = |traj: &mut CoupledTrajectory, s: &CoupledState| {
        traj.w_sup_x.observe(s.t, model.lyapunov(&s.x));
        traj.w_sup_y.observe(s.t, model.lyapunov(&s.y()));
    };
    record(&mut traj, &s, &mut stepper)?;
    observe(&mut traj, &s);
    let mut failure = None;
    for n in 0..noise.steps() {
        if let Err(e) = stepper.step(&mut s, noise.row(n)) {
            traj.forces.extend_from_slice(stepper.last_force());
            if let Error::BlowUp { t } = e {
                traj.blow_up = Some(t);
            }
            failure = Some(e);
            break;
        }
        traj.forces.extend_from_slice(stepper.last_force());
        observe(&mut traj, &s);
        if (n + 1) % stride == 0 || n + 1 == noise.steps() {
            record(&mut traj, &s, &mut stepper)?;
        }
    }
    traj.girsanov = s.girsanov;
    Ok((traj, failure))
}

/// `exp(log 𝒟)` at the end of the trajectory.
pub fn girsanov_density(traj: &CoupledTrajectory) -> Result<f64> {
    traj.girsanov.density()
}

/// Binding image `Δω̃ = Δω + G·dt` of the noise that produced `traj`.
pub fn shift_noise(noise: &NoisePath, traj: &CoupledTrajectory) -> Result<NoisePath> {
    noise.shifted(&traj.forces, 1.0)
}

/// Inverse of [`shift_noise`]: `Δω = Δω̃ − G·dt`.
pub fn unshift_noise(shifted: &NoisePath, traj: &CoupledTrajectory) -> Result<NoisePath> {
    shifted.shifted(&traj.forces, -1.0)
}
