//! Comparisons between simulated paths and their fluid and diffusion limits.

mod batch;
mod deviation;
mod sweep;

pub use batch::{
    batch_means, gaussian_check, stationary_moments, stationary_run, BatchAccumulator, EntryCheck, GaussianReport,
    GaussianTolerances, StationaryEstimate, StationaryRun, TimeSeries,
};
pub use deviation::{sup_deviation, DeviationGrid, DeviationReport, FnPath, PathEval};
pub use sweep::{deviation_run, scale_sweep, write_sweep_csv, ScaledInitial, SweepConfig, SweepRow, SweepTable};

use thiserror::Error;

use crate::ctmc::SimError;
use crate::fluid::FluidError;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("grid time {t} lies outside a compared path")]
    GridOutsideHorizon { t: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Fluid(#[from] FluidError),
}
