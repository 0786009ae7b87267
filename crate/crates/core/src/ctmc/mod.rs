//! Exact event-driven simulation of the invitation schemes.
//!
//! Scheme B is a CTMC on `(Y, X)` with three event classes: customer
//! arrivals (rate `Λ`), invitation acceptances (rate `βX`) and feedback
//! corrections (rate `ε|Y|`). Scheme A keeps a real-valued target that is
//! updated whenever `Y` changes and tops up `X` to the target's ceiling.

mod engine;
mod reflection;
mod trajectory;

pub use engine::{simulate, simulate_a, simulate_b, SimOptions, Simulator};
pub use reflection::{reflect_representation, reflect_step, ReflectionError};
pub use trajectory::{
    diffusion_scale, fluid_scale, fluid_scale_with, scale_point, Centering, EventRecord, Sample, ScaledSample,
    ScaledTrajectory, Sampling, Trajectory,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{ModelError, ModelParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("horizon must be positive, got {0}")]
    HorizonZero(f64),
    #[error("arrival rate {rate} at t = {t} exceeds the declared thinning bound {bound}")]
    ThinningBoundViolated { t: f64, rate: f64, bound: f64 },
    #[error("invalid initial state: {0}")]
    InvalidInitial(String),
    #[error("invalid sampling: {0}")]
    InvalidSampling(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Real-valued target carried by scheme A.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub x_target: f64,
    /// Time of the previous change of `Y`.
    pub last_y_change: f64,
}

/// Unscaled system state. `y = Q_a − Q_c`; the non-idling condition means
/// `Q_a = y⁺` and `Q_c = y⁻`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub t: f64,
    pub y: i64,
    pub x: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetState>,
}

impl SystemState {
    /// Scheme B state at time zero.
    pub fn b(y: i64, x: i64) -> Self {
        Self {
            t: 0.0,
            y,
            x,
            target: None,
        }
    }

    /// Scheme A state at time zero.
    pub fn a(y: i64, x: i64, x_target: f64) -> Self {
        Self {
            t: 0.0,
            y,
            x,
            target: Some(TargetState {
                x_target,
                last_y_change: 0.0,
            }),
        }
    }

    pub fn queue_agents(&self) -> i64 {
        self.y.max(0)
    }

    pub fn queue_customers(&self) -> i64 {
        (-self.y).max(0)
    }

    pub fn x_target(&self) -> Option<f64> {
        self.target.map(|t| t.x_target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrival,
    Acceptance,
    /// Feedback event while `Y < 0`; pushes `X` up.
    FeedbackUp,
    /// Feedback event while `Y > 0`; pushes `X` down unless it is already zero.
    FeedbackDown,
    /// Scheme A only: a pending invitation is declined.
    Rejection,
}

/// One candidate jump out of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub kind: EventKind,
    pub rate: f64,
    pub dy: i64,
    pub dx: i64,
}

/// Jump of `(Y, X)` for a scheme B event, with `gamma_step` the realized
/// increment size.
pub fn jump_b(kind: EventKind, y: i64, x: i64, gamma_step: i64) -> (i64, i64) {
    match kind {
        EventKind::Arrival => (-1, gamma_step),
        EventKind::Acceptance => (1, -gamma_step.min(x)),
        EventKind::FeedbackUp | EventKind::FeedbackDown => {
            if x >= 1 {
                (0, -y.signum())
            } else if y < 0 {
                (0, 1)
            } else {
                (0, 0)
            }
        }
        EventKind::Rejection => (0, 0),
    }
}

/// Candidate events out of `(y, x)` in scheme B, with `arrival_rate` the
/// unscaled rate `Λ` at the current time. Zero-rate events are omitted.
///
/// Jump sizes use `γ` directly, so `γ` should be an integer; with
/// randomized rounding the simulator draws `⌊γ⌋` or `⌈γ⌉` per event instead.
pub fn transition_rates_b(state: &SystemState, params: &ModelParams, arrival_rate: f64) -> Vec<Transition> {
    let step = params.gamma.floor() as i64;
    candidate_rates_b(state.y, state.x, params, arrival_rate)
        .into_iter()
        .filter(|(_, rate)| *rate > 0.0)
        .map(|(kind, rate)| {
            let (dy, dx) = jump_b(kind, state.y, state.x, step);
            Transition { kind, rate, dy, dx }
        })
        .collect()
}

pub(crate) fn candidate_rates_b(y: i64, x: i64, params: &ModelParams, arrival_rate: f64) -> [(EventKind, f64); 3] {
    let feedback = if y < 0 {
        EventKind::FeedbackUp
    } else {
        EventKind::FeedbackDown
    };
    [
        (EventKind::Arrival, arrival_rate),
        (EventKind::Acceptance, params.beta * x as f64),
        (feedback, params.epsilon * y.unsigned_abs() as f64),
    ]
}
