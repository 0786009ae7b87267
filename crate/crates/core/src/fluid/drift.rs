use serde::{Deserialize, Serialize};

use super::{FluidTrajectory, Segment};

/// Finite-difference step used on the closed-form segments.
const FD_STEP: f64 = 1e-6;
/// Norms below this are treated as the stable point and skipped.
const NORM_FLOOR: f64 = 1e-9;

/// Summary of `d/dt ‖state(t)‖*` along a fluid trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub nu1: f64,
    /// Smallest `−(d/dt‖·‖*) / ‖·‖*` over interior grid points with a
    /// non-negligible norm; `None` if there were none.
    pub min_interior_ratio: Option<f64>,
    /// Largest drift over boundary grid points; `None` without a boundary segment.
    pub max_boundary_drift: Option<f64>,
    pub boundary_segments: usize,
    pub interior_points: usize,
    pub boundary_points: usize,
    /// Interior ratio ≥ `ν₁(1 − 1e−6)` everywhere it was evaluated.
    pub interior_ok: bool,
    /// Boundary drift strictly negative everywhere it was evaluated.
    pub boundary_ok: bool,
}

impl DriftReport {
    pub fn passed(&self) -> bool {
        self.interior_ok && self.boundary_ok && self.boundary_segments <= 1
    }
}

/// Centered finite differences of the star norm on the grid `0, dt, ...`,
/// each evaluated on the closed form of the segment containing the point.
pub fn drift_check(traj: &FluidTrajectory, grid_dt: f64) -> DriftReport {
    let spec = &traj.spectral;
    let norm = |seg: &Segment, t: f64| spec.star_norm(seg.eval(t, &traj.params, spec).as_vec());
    let mut min_ratio: Option<f64> = None;
    let mut max_boundary: Option<f64> = None;
    let (mut interior_points, mut boundary_points) = (0, 0);

    let n = (traj.horizon / grid_dt + 1e-9).floor() as usize;
    for k in 0..=n {
        let t = k as f64 * grid_dt;
        let Some(seg) = traj.segment_at(t) else { continue };
        let here = norm(seg, t);
        let drift = (norm(seg, t + FD_STEP) - norm(seg, t - FD_STEP)) / (2.0 * FD_STEP);
        if seg.is_boundary() {
            boundary_points += 1;
            max_boundary = Some(max_boundary.map_or(drift, |m: f64| m.max(drift)));
        } else if here > NORM_FLOOR {
            interior_points += 1;
            let ratio = -drift / here;
            min_ratio = Some(min_ratio.map_or(ratio, |m: f64| m.min(ratio)));
        }
    }
    DriftReport {
        nu1: spec.nu1,
        min_interior_ratio: min_ratio,
        max_boundary_drift: max_boundary,
        boundary_segments: traj.boundary_segments(),
        interior_points,
        boundary_points,
        interior_ok: min_ratio.is_none_or(|r| r >= spec.nu1 * (1.0 - 1e-6)),
        boundary_ok: max_boundary.is_none_or(|d| d < 0.0),
    }
}
