//! Fluid model of scheme B.
//!
//! For a constant arrival rate the centered fluid state `(y, x)` follows the
//! linear ODE `(y, x)' = (y, x) A` while `x > −λ/β`. On the boundary
//! `x = −λ/β` it slides with `y' = −λ` until `y` drops to `γλ/ε`, then
//! re-enters the interior. A trajectory touches the boundary at most once,
//! so a solution is at most three closed-form segments.

mod drift;
mod time_varying;

pub use drift::{drift_check, DriftReport};
pub use time_varying::{solve_fluid_tv, TvFluidPath, TvFluidState, TvSample};

use serde::{Deserialize, Serialize};
use std::io::{self, Write};
use thiserror::Error;

use crate::params::{ModelError, ModelParams};
use crate::spectral::{spectral_decompose, SpectralData, Vec2};

/// Slack allowed below `−λ/β` before a state counts as infeasible.
pub const FLOOR_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FluidError {
    #[error("initial x = {x} lies below the boundary {floor}")]
    InvalidInitial { x: f64, floor: f64 },
    #[error("initial x = {0} must be nonnegative")]
    NegativeInitialX(f64),
    #[error("invalid {name}: {value}")]
    InvalidStep { name: &'static str, value: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Centered fluid state; `x ≥ −λ/β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidState {
    pub y: f64,
    pub x: f64,
}

impl FluidState {
    pub fn new(y: f64, x: f64) -> Self {
        Self { y, x }
    }

    pub fn as_vec(&self) -> Vec2 {
        Vec2::new(self.y, self.x)
    }

    pub fn from_vec(v: Vec2) -> Self {
        Self { y: v[0], x: v[1] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    /// `state(start + s) = α₁e^{−ν₁s}v₁ + α₂e^{−ν₂s}v₂`.
    Interior {
        start: f64,
        duration: f64,
        alpha1: f64,
        alpha2: f64,
    },
    /// `state(start + s) = (y_start − λs, −λ/β)`.
    Boundary { start: f64, duration: f64, y_start: f64 },
}

impl Segment {
    pub fn start(&self) -> f64 {
        match *self {
            Segment::Interior { start, .. } | Segment::Boundary { start, .. } => start,
        }
    }

    pub fn duration(&self) -> f64 {
        match *self {
            Segment::Interior { duration, .. } | Segment::Boundary { duration, .. } => duration,
        }
    }

    pub fn end(&self) -> f64 {
        self.start() + self.duration()
    }

    pub fn is_boundary(&self) -> bool {
        matches!(self, Segment::Boundary { .. })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Segment::Interior { .. } => "interior",
            Segment::Boundary { .. } => "boundary",
        }
    }

    /// Evaluates this segment's closed form at absolute time `t`. The
    /// formula extends analytically past the segment's ends.
    pub fn eval(&self, t: f64, params: &ModelParams, spec: &SpectralData) -> FluidState {
        match *self {
            Segment::Interior {
                start,
                alpha1,
                alpha2,
                ..
            } => {
                let s = t - start;
                FluidState::from_vec(spec.from_coords(alpha1 * (-spec.nu1 * s).exp(), alpha2 * (-spec.nu2 * s).exp()))
            }
            Segment::Boundary { start, y_start, .. } => {
                FluidState::new(y_start - params.lambda * (t - start), params.fluid_floor())
            }
        }
    }
}

/// Piecewise closed-form fluid trajectory over `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidTrajectory {
    pub params: ModelParams,
    pub spectral: SpectralData,
    pub horizon: f64,
    pub segments: Vec<Segment>,
}

impl FluidTrajectory {
    pub fn segment_at(&self, t: f64) -> Option<&Segment> {
        if !(0.0..=self.horizon).contains(&t) {
            return None;
        }
        let idx = self.segments.partition_point(|s| s.end() <= t);
        self.segments.get(idx).or(self.segments.last())
    }

    pub fn state(&self, t: f64) -> Option<FluidState> {
        self.segment_at(t).map(|s| s.eval(t, &self.params, &self.spectral))
    }

    pub fn boundary_segments(&self) -> usize {
        self.segments.iter().filter(|s| s.is_boundary()).count()
    }

    pub fn star_norm_at(&self, t: f64) -> Option<f64> {
        self.state(t).map(|s| self.spectral.star_norm(s.as_vec()))
    }

    /// Samples `(t, state, segment kind)` on `0, dt, ..., horizon`.
    pub fn sample(&self, dt: f64) -> Vec<(f64, FluidState, &'static str)> {
        let n = (self.horizon / dt + 1e-9).floor() as usize;
        (0..=n)
            .map(|k| {
                let t = (k as f64 * dt).min(self.horizon);
                let seg = self.segment_at(t).expect("t within horizon");
                (t, seg.eval(t, &self.params, &self.spectral), seg.kind_name())
            })
            .collect()
    }

    /// Writes `t,y,x,segment_kind` on a uniform grid.
    pub fn write_csv<W: Write>(&self, mut out: W, dt: f64) -> io::Result<()> {
        writeln!(out, "t,y,x,segment_kind")?;
        for (t, s, kind) in self.sample(dt) {
            writeln!(out, "{},{},{},{}", t, s.y, s.x, kind)?;
        }
        Ok(())
    }
}

/// `Σ αᵢ(0) e^{−νᵢ dt} vᵢ`: the unconstrained interior flow from `initial`.
pub fn interior_solution(initial: FluidState, dt: f64, spec: &SpectralData) -> FluidState {
    let (a1, a2) = spec.star_coords(initial.as_vec());
    FluidState::from_vec(spec.from_coords(a1 * (-spec.nu1 * dt).exp(), a2 * (-spec.nu2 * dt).exp()))
}

/// First time the interior flow from `initial` reaches `x = −λ/β`.
///
/// Along the flow `x(t) = −(α₁e^{−ν₁t} + α₂e^{−ν₂t})`, so the hit times are
/// roots of `α₁e^{−ν₁t} + α₂e^{−ν₂t} = λ/β`. There are at most two. A
/// coarse scan (step `min(1/ν₂, T)/64`, plus the single critical point of the
/// exponential sum) brackets the first one and bisection refines it.
pub fn boundary_hit_time(initial: FluidState, params: &ModelParams, spec: &SpectralData) -> Option<f64> {
    let (a1, a2) = spec.star_coords(initial.as_vec());
    first_hit(a1, a2, params.lambda / params.beta, spec)
}

fn first_hit(alpha1: f64, alpha2: f64, level: f64, spec: &SpectralData) -> Option<f64> {
    let gap = |t: f64| level - (alpha1 * (-spec.nu1 * t).exp() + alpha2 * (-spec.nu2 * t).exp());
    // past t_max each term is below level/2, so no root remains
    let t_max = [(alpha1, spec.nu1), (alpha2, spec.nu2)]
        .iter()
        .map(|(a, nu)| {
            if a.abs() > 0.0 {
                ((2.0 * a.abs() / level).ln() / nu).max(0.0)
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    if t_max <= 0.0 {
        return None;
    }
    let step = (1.0 / spec.nu2).min(t_max) / 64.0;
    let mut candidates: Vec<f64> = (1..)
        .map(|k| k as f64 * step)
        .take_while(|t| *t < t_max + step)
        .collect();
    // h'(t) = 0 where e^{(ν₂−ν₁)t} = −α₂ν₂ / (α₁ν₁)
    let ratio = -alpha2 * spec.nu2 / (alpha1 * spec.nu1);
    if ratio.is_finite() && ratio > 1.0 {
        let tc = ratio.ln() / (spec.nu2 - spec.nu1);
        if tc < t_max {
            candidates.push(tc);
        }
    }
    candidates.sort_by(f64::total_cmp);

    let mut lo = 0.0;
    for &t in &candidates {
        if gap(t) <= 0.0 {
            let mut hi = t;
            while hi - lo > 1e-13 {
                let mid = 0.5 * (lo + hi);
                if gap(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(hi);
        }
        lo = t;
    }
    None
}

/// Assembles the fluid trajectory from `initial` over `[0, horizon]`.
pub fn solve_fluid(initial: FluidState, params: &ModelParams, horizon: f64) -> Result<FluidTrajectory, FluidError> {
    params.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(FluidError::InvalidStep {
            name: "horizon",
            value: horizon,
        });
    }
    let floor = params.fluid_floor();
    if !(initial.x >= floor - FLOOR_TOLERANCE) || !initial.y.is_finite() {
        return Err(FluidError::InvalidInitial { x: initial.x, floor });
    }
    let spec = spectral_decompose(params)?;
    let exit_y = params.boundary_exit_y();
    let level = params.lambda / params.beta;

    let mut segments = Vec::new();
    let mut t = 0.0;
    let mut state = FluidState::new(initial.y, initial.x.max(floor));
    while t < horizon {
        let on_boundary = state.x <= floor + FLOOR_TOLERANCE;
        if on_boundary && state.y > exit_y {
            let duration = ((state.y - exit_y) / params.lambda).min(horizon - t);
            segments.push(Segment::Boundary {
                start: t,
                duration,
                y_start: state.y,
            });
            t += duration;
            state = FluidState::new(state.y - params.lambda * duration, floor);
            continue;
        }
        let (alpha1, alpha2) = spec.star_coords(state.as_vec());
        let hit = first_hit(alpha1, alpha2, level, &spec).filter(|h| *h < horizon - t);
        let entry = hit.map(|h| interior_solution(state, h, &spec));
        match (hit, entry) {
            (Some(h), Some(at)) if at.y > exit_y => {
                segments.push(Segment::Interior {
                    start: t,
                    duration: h,
                    alpha1,
                    alpha2,
                });
                t += h;
                state = FluidState::new(at.y, floor);
            }
            // no hit, or a graze at y ≤ γλ/ε where the field points back inside
            _ => {
                segments.push(Segment::Interior {
                    start: t,
                    duration: horizon - t,
                    alpha1,
                    alpha2,
                });
                break;
            }
        }
    }
    Ok(FluidTrajectory {
        params: *params,
        spectral: spec,
        horizon,
        segments,
    })
}
