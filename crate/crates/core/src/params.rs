//! Model parameters and their validation.
//!
//! All rates are in fluid-scale units: the `r`-th system sees customer
//! arrivals at rate `lambda * r`, while `beta`, `beta_tilde`, `gamma` and
//! `epsilon` do not scale.

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

use crate::arrival::ArrivalRateFn;

/// Which invitation scheme a simulation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Practical scheme with a real-valued target and non-withdrawable invitations.
    A,
    /// Stylized scheme where the pending count equals the target exactly.
    B,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("stability condition violated: epsilon = {epsilon} must be < gamma^2 * beta / 4 = {bound}")]
    StabilityViolation { epsilon: f64, bound: f64 },
    #[error("rate `{name}` must be {requirement}, got {value}")]
    NonPositiveRate {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("scheme B needs an integer gamma (got {0}); enable randomized rounding to allow it")]
    NonIntegerGamma(f64),
    #[error("repeated eigenvalue: discriminant {0} is not positive")]
    RepeatedEigenvalue(f64),
    #[error("invalid arrival rate function: {0}")]
    InvalidArrival(String),
    #[error("failed to read parameters: {0}")]
    Io(String),
    #[error("failed to parse parameters: {0}")]
    Parse(String),
}

/// Parameters of the `r`-th system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Fluid-scale arrival rate; the unscaled rate is `lambda * scale_r`.
    pub lambda: f64,
    #[serde(rename = "r")]
    pub scale_r: f64,
    /// Invitation acceptance rate per pending invitation.
    pub beta: f64,
    /// Invitation rejection rate per pending invitation (scheme A only).
    #[serde(default)]
    pub beta_tilde: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl ModelParams {
    /// Parameters used throughout the numerical experiments: `Λ = 1000`,
    /// `β = 1`, `γ = 2`, `ε = 0.2`, written as `λ = 1` at scale `r = 1000`.
    pub fn reference() -> Self {
        Self {
            lambda: 1.0,
            scale_r: 1000.0,
            beta: 1.0,
            beta_tilde: 0.0,
            gamma: 2.0,
            epsilon: 0.2,
        }
    }

    pub fn with_scale(mut self, r: f64) -> Self {
        self.scale_r = r;
        self
    }

    /// Checks rates and the stability condition `0 < ε < γ²β/4`.
    pub fn validate(&self) -> Result<&Self, ModelError> {
        positive("lambda", self.lambda)?;
        positive("r", self.scale_r)?;
        positive("beta", self.beta)?;
        positive("gamma", self.gamma)?;
        positive("epsilon", self.epsilon)?;
        if !(self.beta_tilde >= 0.0 && self.beta_tilde.is_finite()) {
            return Err(ModelError::NonPositiveRate {
                name: "beta_tilde",
                value: self.beta_tilde,
                requirement: "finite and >= 0",
            });
        }
        let bound = self.stability_bound();
        if self.epsilon >= bound {
            return Err(ModelError::StabilityViolation {
                epsilon: self.epsilon,
                bound,
            });
        }
        Ok(self)
    }

    /// [`validate`](Self::validate) plus the scheme-specific requirements.
    pub fn validate_for(&self, scheme: Scheme, randomized_rounding: bool) -> Result<&Self, ModelError> {
        self.validate()?;
        if scheme == Scheme::B && !randomized_rounding && !self.gamma_is_integer() {
            return Err(ModelError::NonIntegerGamma(self.gamma));
        }
        Ok(self)
    }

    /// `γ²β/4`, the exclusive upper bound for `ε`.
    pub fn stability_bound(&self) -> f64 {
        self.gamma * self.gamma * self.beta / 4.0
    }

    pub fn gamma_is_integer(&self) -> bool {
        self.gamma.fract() == 0.0
    }

    /// Equilibrium number of pending invitations in the unscaled system, `λr/β`.
    pub fn pending_equilibrium(&self) -> f64 {
        self.lambda * self.scale_r / self.beta
    }

    /// `γλ/ε`: the fluid boundary is left once `y` drops to this value.
    pub fn boundary_exit_y(&self) -> f64 {
        self.gamma * self.lambda / self.epsilon
    }

    /// Lower boundary of the centered fluid `x`, i.e. `-λ/β`.
    pub fn fluid_floor(&self) -> f64 {
        -self.lambda / self.beta
    }

    /// Loads parameters from a JSON document. The optional `arrival` key
    /// describes a time-varying rate; when absent the rate is the constant
    /// `lambda`.
    pub fn from_json_str(text: &str) -> Result<(Self, ArrivalRateFn), ModelError> {
        let doc: ParamsDocument =
            serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
        doc.params.validate()?;
        let arrival = doc
            .arrival
            .unwrap_or(ArrivalRateFn::Constant { base: doc.params.lambda });
        arrival.validate()?;
        Ok((doc.params, arrival))
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<(Self, ArrivalRateFn), ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io(e.to_string()))?;
        Self::from_json_str(&text)
    }
}

/// On-disk parameter document: the parameter keys plus an optional arrival block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsDocument {
    #[serde(flatten)]
    pub params: ModelParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival: Option<ArrivalRateFn>,
}

impl ParamsDocument {
    pub fn new(params: ModelParams, arrival: Option<ArrivalRateFn>) -> Self {
        Self { params, arrival }
    }

    /// The arrival block, defaulting to the constant rate `lambda`.
    pub fn arrival(&self) -> ArrivalRateFn {
        self.arrival
            .clone()
            .unwrap_or(ArrivalRateFn::Constant { base: self.params.lambda })
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonPositiveRate {
            name,
            value,
            requirement: "finite and > 0",
        })
    }
}
