use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::ctmc::ScaledTrajectory;
use crate::fluid::{FluidTrajectory, TvFluidPath};

/// Anything that can be evaluated as a `(y, x)` pair at a time.
pub trait PathEval {
    fn eval(&self, t: f64) -> Option<(f64, f64)>;
}

impl PathEval for ScaledTrajectory {
    fn eval(&self, t: f64) -> Option<(f64, f64)> {
        self.hold_at(t).map(|s| (s.y, s.x))
    }
}

impl PathEval for FluidTrajectory {
    fn eval(&self, t: f64) -> Option<(f64, f64)> {
        self.state(t).map(|s| (s.y, s.x))
    }
}

impl PathEval for TvFluidPath {
    fn eval(&self, t: f64) -> Option<(f64, f64)> {
        self.state(t).map(|s| (s.y, s.x))
    }
}

/// Adapter for closures.
pub struct FnPath<F>(pub F);

impl<F: Fn(f64) -> Option<(f64, f64)>> PathEval for FnPath<F> {
    fn eval(&self, t: f64) -> Option<(f64, f64)> {
        (self.0)(t)
    }
}

/// Uniform grid `start, start + dt, ...` up to `end` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationGrid {
    pub start: f64,
    pub end: f64,
    pub dt: f64,
}

impl DeviationGrid {
    pub fn new(start: f64, end: f64, dt: f64) -> Self {
        Self { start, end, dt }
    }

    /// `[0, end]` with the default spacing 0.05.
    pub fn standard(end: f64) -> Self {
        Self::new(0.0, end, 0.05)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let n = ((self.end - self.start) / self.dt + 1e-9).floor().max(0.0) as usize;
        (0..=n).map(move |k| (self.start + k as f64 * self.dt).min(self.end))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    /// `max_t max(|Δy|, |Δx|)`.
    pub sup: f64,
    pub t_at_max: f64,
    pub sup_y: f64,
    pub sup_x: f64,
    pub points: usize,
    pub grid: DeviationGrid,
}

/// Largest max-norm difference of two paths over the grid.
pub fn sup_deviation(a: &dyn PathEval, b: &dyn PathEval, grid: DeviationGrid) -> Result<DeviationReport, StatsError> {
    let mut report = DeviationReport {
        sup: 0.0,
        t_at_max: grid.start,
        sup_y: 0.0,
        sup_x: 0.0,
        points: 0,
        grid,
    };
    for t in grid.points() {
        let (ya, xa) = a.eval(t).ok_or(StatsError::GridOutsideHorizon { t })?;
        let (yb, xb) = b.eval(t).ok_or(StatsError::GridOutsideHorizon { t })?;
        let (dy, dx) = ((ya - yb).abs(), (xa - xb).abs());
        report.sup_y = report.sup_y.max(dy);
        report.sup_x = report.sup_x.max(dx);
        if dy.max(dx) > report.sup {
            report.sup = dy.max(dx);
            report.t_at_max = t;
        }
        report.points += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::{solve_fluid, FluidState};
    use crate::params::ModelParams;

    #[test]
    fn identical_paths_have_zero_deviation() {
        let traj = solve_fluid(FluidState::new(1.0, 0.5), &ModelParams::reference(), 10.0).unwrap();
        let r = sup_deviation(&traj, &traj, DeviationGrid::standard(10.0)).unwrap();
        assert_eq!(r.sup, 0.0);
        assert_eq!(r.points, 201);
    }

    #[test]
    fn deviation_is_symmetric_and_componentwise() {
        let a = FnPath(|t: f64| Some((t, 0.0)));
        let b = FnPath(|t: f64| Some((0.0, -2.0 * t)));
        let grid = DeviationGrid::new(0.0, 1.0, 0.25);
        let ab = sup_deviation(&a, &b, grid).unwrap();
        let ba = sup_deviation(&b, &a, grid).unwrap();
        assert_eq!(ab, ba);
        assert_eq!((ab.sup, ab.t_at_max, ab.sup_y, ab.sup_x), (2.0, 1.0, 1.0, 2.0));
    }

    #[test]
    fn grid_past_a_path_is_an_error() {
        let traj = solve_fluid(FluidState::new(0.0, 0.0), &ModelParams::reference(), 1.0).unwrap();
        let err = sup_deviation(&traj, &traj, DeviationGrid::standard(2.0)).unwrap_err();
        assert!(matches!(err, StatsError::GridOutsideHorizon { .. }));
    }
}
