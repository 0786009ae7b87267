//! Diffusion limit around the fluid equilibrium.
//!
//! `(Ŷ, X̂)` solves the linear SDE `d(Ŷ, X̂) = (Ŷ, X̂) A dt + σ dW` with the
//! fluid matrix `A` and the degenerate noise row `σ = (−√(2λ), γ√(2λ))`
//! driven by one Brownian motion. The law is Gaussian with mean `ṁ = mA`
//! and covariance `V̇ = VA + AᵀV + σᵀσ`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};
use thiserror::Error;

use crate::params::{ModelError, ModelParams};
use crate::spectral::{fluid_matrix, spectral_decompose, Mat2, SpectralData, Vec2};

pub const DEFAULT_SDE_DT: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffusionError {
    #[error("initial covariance is not symmetric (asymmetry {0:e})")]
    NonSymmetricV0(f64),
    #[error("initial covariance is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),
    #[error("invalid {name}: {value}")]
    InvalidStep { name: &'static str, value: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DiffusionState {
    pub y_hat: f64,
    pub x_hat: f64,
}

impl DiffusionState {
    pub fn new(y_hat: f64, x_hat: f64) -> Self {
        Self { y_hat, x_hat }
    }
}

/// Row vector multiplying the scalar Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseVector {
    pub sigma: Vec2,
}

impl NoiseVector {
    pub fn new(params: &ModelParams) -> Self {
        Self::with_lambda(params.lambda, params.gamma)
    }

    /// Noise built from an arbitrary `λ`, independent of the drift. `λ = 0`
    /// gives the noiseless system.
    pub fn with_lambda(lambda: f64, gamma: f64) -> Self {
        let s = (2.0 * lambda).sqrt();
        Self {
            sigma: Vec2::new(-s, gamma * s),
        }
    }

    /// `σᵀσ`.
    pub fn outer(&self) -> Mat2 {
        self.sigma.transpose() * self.sigma
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdePath {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<DiffusionState>,
}

/// Euler–Maruyama driven by the supplied standard-normal draws, one per
/// step. Returns the state after every step (the initial state first).
pub fn euler_maruyama<I>(
    initial: DiffusionState,
    params: &ModelParams,
    dt: f64,
    noise: &NoiseVector,
    normals: I,
) -> Vec<DiffusionState>
where
    I: IntoIterator<Item = f64>,
{
    let (beta, gamma, eps) = (params.beta, params.gamma, params.epsilon);
    let root_dt = dt.sqrt();
    let mut s = initial;
    let mut out = vec![s];
    for z in normals {
        let dw = root_dt * z;
        let y = s.y_hat + beta * s.x_hat * dt + noise.sigma[0] * dw;
        let x = s.x_hat + (-beta * gamma * s.x_hat - eps * s.y_hat) * dt + noise.sigma[1] * dw;
        s = DiffusionState::new(y, x);
        out.push(s);
    }
    out
}

fn step_count(horizon: f64, dt: f64) -> Result<usize, DiffusionError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DiffusionError::InvalidStep { name: "dt", value: dt });
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(DiffusionError::InvalidStep {
            name: "horizon",
            value: horizon,
        });
    }
    Ok((horizon / dt - 1e-9).ceil().max(0.0) as usize)
}

/// Simulates one path on `[0, horizon]` with step `dt`, recording every
/// `record_every`-th step and the final one.
pub fn simulate_sde<R: Rng + ?Sized>(
    initial: DiffusionState,
    params: &ModelParams,
    horizon: f64,
    dt: f64,
    record_every: usize,
    rng: &mut R,
) -> Result<SdePath, DiffusionError> {
    params.validate()?;
    let n = step_count(horizon, dt)?;
    let noise = NoiseVector::new(params);
    let normals: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let states = euler_maruyama(initial, params, dt, &noise, normals);
    let every = record_every.max(1);
    let (times, states) = states
        .into_iter()
        .enumerate()
        .filter(|(k, _)| k % every == 0 || *k == n)
        .map(|(k, s)| ((k as f64 * dt).min(horizon), s))
        .unzip();
    Ok(SdePath { dt, times, states })
}

/// States at each of the sorted `times`, without keeping the full path.
pub fn sde_snapshots<R: Rng + ?Sized>(
    initial: DiffusionState,
    params: &ModelParams,
    times: &[f64],
    dt: f64,
    rng: &mut R,
) -> Result<Vec<DiffusionState>, DiffusionError> {
    let noise = NoiseVector::new(params);
    let mut out = Vec::with_capacity(times.len());
    let mut s = initial;
    let mut done = 0;
    for &t in times {
        let target = step_count(t, dt)?;
        let normals: Vec<f64> = (done..target).map(|_| rng.sample(StandardNormal)).collect();
        s = *euler_maruyama(s, params, dt, &noise, normals).last().expect("nonempty");
        done = target.max(done);
        out.push(s);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentState {
    pub t: f64,
    pub m: Vec2,
    pub v: Mat2,
}

impl MomentState {
    pub fn new(t: f64, m: Vec2, v: Mat2) -> Self {
        Self { t, m, v }
    }

    /// Largest `|V₁₂ − V₂₁|`.
    pub fn asymmetry(&self) -> f64 {
        (self.v[(0, 1)] - self.v[(1, 0)]).abs()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.v)
    }

    fn check(&self) -> Result<(), DiffusionError> {
        let scale = self.v.abs().max().max(1.0);
        if self.asymmetry() > 1e-12 * scale {
            return Err(DiffusionError::NonSymmetricV0(self.asymmetry()));
        }
        let low = self.min_eigenvalue();
        if low < -1e-10 * scale {
            return Err(DiffusionError::NotPositiveSemidefinite(low));
        }
        Ok(())
    }
}

fn min_eigenvalue(v: &Mat2) -> f64 {
    let sym = (v + v.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentPath {
    pub samples: Vec<MomentState>,
}

impl MomentPath {
    pub fn last(&self) -> &MomentState {
        self.samples.last().expect("moment path is never empty")
    }

    /// Writes `t,m1,m2,V11,V12,V22`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,m1,m2,V11,V12,V22")?;
        for s in &self.samples {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                s.t,
                s.m[0],
                s.m[1],
                s.v[(0, 0)],
                s.v[(0, 1)],
                s.v[(1, 1)]
            )?;
        }
        Ok(())
    }
}

/// RK4 integration of the mean and covariance equations on `[0, horizon]`.
/// `V` is symmetrized after every step.
pub fn moment_ode(m0: Vec2, v0: Mat2, params: &ModelParams, horizon: f64, dt: f64) -> Result<MomentPath, DiffusionError> {
    params.validate()?;
    MomentState::new(0.0, m0, v0).check()?;
    let n = step_count(horizon, dt)?;
    let a = fluid_matrix(params);
    let q = NoiseVector::new(params).outer();
    let at = a.transpose();
    let dm = |m: &Vec2| m * a;
    let dv = |v: &Mat2| v * a + at * v + q;

    let mut m = m0;
    let mut v = v0;
    let mut t = 0.0;
    let mut samples = Vec::with_capacity(n + 1);
    samples.push(MomentState::new(0.0, m, v));
    for k in 1..=n {
        let h = (k as f64 * dt).min(horizon) - t;
        let (m1, v1) = (dm(&m), dv(&v));
        let (m2, v2) = (dm(&(m + m1 * (0.5 * h))), dv(&(v + v1 * (0.5 * h))));
        let (m3, v3) = (dm(&(m + m2 * (0.5 * h))), dv(&(v + v2 * (0.5 * h))));
        let (m4, v4) = (dm(&(m + m3 * h)), dv(&(v + v3 * h)));
        m += (m1 + m2 * 2.0 + m3 * 2.0 + m4) * (h / 6.0);
        v += (v1 + v2 * 2.0 + v3 * 2.0 + v4) * (h / 6.0);
        v = (v + v.transpose()) * 0.5;
        t += h;
        samples.push(MomentState::new(t, m, v));
    }
    Ok(MomentPath { samples })
}

/// `V(∞) = [[λ/(βγ), −λ/β], [−λ/β, λ(βγ² + ε)/(β²γ)]]`.
pub fn stationary_covariance(params: &ModelParams) -> Mat2 {
    let ModelParams {
        lambda: l,
        beta: b,
        gamma: g,
        epsilon: e,
        ..
    } = *params;
    Mat2::new(l / (b * g), -l / b, -l / b, l * (b * g * g + e) / (b * b * g))
}

/// Frobenius norm of `VA + AᵀV + σᵀσ`.
pub fn lyapunov_residual(v: &Mat2, params: &ModelParams) -> f64 {
    let a = fluid_matrix(params);
    (v * a + a.transpose() * v + NoiseVector::new(params).outer()).norm()
}

/// Mean `m(0)e^{At}` from the spectral decomposition.
pub fn mean_closed_form(m0: Vec2, t: f64, spec: &SpectralData) -> Vec2 {
    m0 * spec.propagator(t)
}

/// `(m(t), V(t))` in closed form: `m(t) = m₀e^{At}` and
/// `V(t) = e^{Aᵀt}(V₀ − V(∞))e^{At} + V(∞)`.
pub fn gaussian_transient(params: &ModelParams, t: f64, initial: &MomentState) -> Result<MomentState, DiffusionError> {
    params.validate()?;
    initial.check()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(DiffusionError::InvalidStep { name: "t", value: t });
    }
    if t == 0.0 {
        return Ok(*initial);
    }
    let spec = spectral_decompose(params)?;
    let p = spec.propagator(t);
    let v_inf = stationary_covariance(params);
    let v = p.transpose() * (initial.v - v_inf) * p + v_inf;
    Ok(MomentState::new(initial.t + t, initial.m * p, (v + v.transpose()) * 0.5))
}
