//! Simulation and asymptotic analysis of feedback-controlled agent
//! invitation systems.
//!
//! Customers arrive at rate `λr`; agents are invited on demand and accept
//! at rate `β` per pending invitation. A feedback rule with gains `γ` and
//! `ε` steers the number of pending invitations `X` so that the queue
//! difference `Y` (agents waiting minus customers waiting) stays near zero.
//!
//! - [`ctmc`]: exact simulation of schemes A and B.
//! - [`fluid`]: the fluid model with its reflecting boundary.
//! - [`diffusion`]: the limit SDE and its Gaussian moments.
//! - [`stats`]: comparisons of simulated paths against the limits.
//! - [`experiment`]: configuration, presets, run manifests and the acceptance suites.

pub mod arrival;
pub mod ctmc;
pub mod diffusion;
pub mod experiment;
pub mod fluid;
pub mod oracle;
pub mod params;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use arrival::ArrivalRateFn;
pub use params::{ModelError, ModelParams, Scheme};
pub use rng::RandomStream;
pub use spectral::{spectral_decompose, SpectralData, Mat2, Vec2};
