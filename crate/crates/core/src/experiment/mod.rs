//! Configured runs, compiled-in presets, run manifests and the acceptance suites.

pub mod acceptance;
mod run;

pub use acceptance::{run_acceptance, AcceptanceSettings, AcceptanceSummary, CriterionResult, SuiteReport, SUITES};
pub use run::{emit_plot_data, run, FileEntry, PlotData, PlotReference, RunManifest, SeedRecord};

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

use crate::arrival::ArrivalRateFn;
use crate::ctmc::{SimError, SystemState};
use crate::diffusion::DiffusionError;
use crate::fluid::FluidError;
use crate::params::{ModelError, ModelParams, ParamsDocument, Scheme};
use crate::stats::StatsError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("cannot write to {path}: {reason}")]
    OutputDirUnwritable { path: String, reason: String },
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("unknown acceptance suite '{0}'")]
    UnknownSuite(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error(transparent)]
    Diffusion(#[from] DiffusionError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// What a run produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    /// Simulated path, raw and fluid-scaled.
    Trajectory,
    /// Fluid solution from each initial state.
    Fluid,
    /// Simulation against fluid: deviation report and aligned plot table.
    Compare,
    /// Moment equations and one SDE sample path.
    DiffusionMoments,
    /// Long-run batch-means estimates and the Gaussian check.
    Stationary,
    /// Deviation against `r`.
    Sweep,
}

/// Unscaled initial state. `x_target` is required for scheme A.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub y: i64,
    pub x: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_target: Option<f64>,
}

impl InitialState {
    pub fn b(y: i64, x: i64) -> Self {
        Self { y, x, x_target: None }
    }

    pub fn system_state(&self, scheme: Scheme) -> SystemState {
        match (scheme, self.x_target) {
            (Scheme::A, Some(target)) => SystemState::a(self.y, self.x, target),
            _ => SystemState::b(self.y, self.x),
        }
    }

    /// Pending invitations the fluid model should start from. Scheme A
    /// tops `X` up to its target at the first event, so the target counts.
    pub fn effective_x(&self, scheme: Scheme) -> f64 {
        match (scheme, self.x_target) {
            (Scheme::A, Some(target)) => (self.x as f64).max(target),
            _ => self.x as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarySettings {
    pub burn_in: f64,
    pub n_batches: usize,
}

impl Default for StationarySettings {
    fn default() -> Self {
        Self {
            burn_in: 100.0,
            n_batches: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub r_list: Vec<f64>,
    pub replications: u64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            r_list: vec![100.0, 300.0, 1000.0],
            replications: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSettings {
    /// Step of the SDE sample path.
    pub sde_dt: f64,
    /// Step of the moment equations.
    pub moment_dt: f64,
}

impl Default for DiffusionSettings {
    fn default() -> Self {
        Self {
            sde_dt: crate::diffusion::DEFAULT_SDE_DT,
            moment_dt: 1e-2,
        }
    }
}

fn default_sample_dt() -> f64 {
    0.01
}

fn default_compare_dt() -> f64 {
    0.05
}

fn default_fluid_dt() -> f64 {
    1e-3
}

/// A single JSON document describing one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub scheme: Scheme,
    /// Parameter keys plus the optional `arrival` block.
    pub params: ParamsDocument,
    pub initial: Vec<InitialState>,
    pub horizon: f64,
    pub seed: u64,
    /// Spacing of recorded simulation samples.
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    /// Spacing of the deviation grid.
    #[serde(default = "default_compare_dt")]
    pub compare_dt: f64,
    /// Deviation grid start.
    #[serde(default)]
    pub compare_from: f64,
    /// Step of the time-varying fluid solver.
    #[serde(default = "default_fluid_dt")]
    pub fluid_dt: f64,
    #[serde(default)]
    pub randomized_rounding: bool,
    pub outputs: Vec<OutputKind>,
    #[serde(default)]
    pub stationary: StationarySettings,
    #[serde(default)]
    pub sweep: SweepSettings,
    #[serde(default)]
    pub diffusion: DiffusionSettings,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ExperimentError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn model(&self) -> &ModelParams {
        &self.params.params
    }

    pub fn arrival(&self) -> ArrivalRateFn {
        self.params.arrival()
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let invalid = |msg: String| Err(ExperimentError::ConfigInvalid(msg));
        self.model().validate_for(self.scheme, self.randomized_rounding)?;
        let arrival = self.arrival();
        arrival.validate()?;
        for (name, v) in [
            ("horizon", self.horizon),
            ("sample_dt", self.sample_dt),
            ("compare_dt", self.compare_dt),
            ("fluid_dt", self.fluid_dt),
            ("diffusion.sde_dt", self.diffusion.sde_dt),
            ("diffusion.moment_dt", self.diffusion.moment_dt),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("{name} must be positive, got {v}"));
            }
        }
        if !(0.0..self.horizon).contains(&self.compare_from) {
            return invalid(format!("compare_from {} outside [0, horizon)", self.compare_from));
        }
        if self.initial.is_empty() {
            return invalid("at least one initial state is required".into());
        }
        if self.outputs.is_empty() {
            return invalid("no outputs requested".into());
        }
        for s in &self.initial {
            if s.x < 0 {
                return invalid(format!("initial x = {} is negative", s.x));
            }
            if self.scheme == Scheme::A && s.x_target.is_none_or(|t| !(t >= 0.0 && t.is_finite())) {
                return invalid("scheme A initial states need a finite x_target >= 0".into());
            }
        }
        if self.outputs.contains(&OutputKind::Stationary) {
            if self.scheme != Scheme::B || !arrival.is_constant() {
                return invalid("stationary estimates need scheme B with a constant arrival rate".into());
            }
            if self.horizon <= self.stationary.burn_in || self.stationary.n_batches < 10 {
                return invalid("stationary run needs horizon > burn_in and at least 10 batches".into());
            }
        }
        if self.outputs.contains(&OutputKind::Sweep) {
            let r = &self.sweep.r_list;
            if r.is_empty() || r.windows(2).any(|w| w[1] <= w[0]) || self.sweep.replications == 0 {
                return invalid("sweep needs an increasing r_list and at least one replication".into());
            }
            if self.scheme != Scheme::B {
                return invalid("sweeps compare scheme B against its fluid limit".into());
            }
        }
        if self.outputs.contains(&OutputKind::DiffusionMoments) && !arrival.is_constant() {
            return invalid("diffusion moments need a constant arrival rate".into());
        }
        Ok(())
    }
}

fn base_config(name: &str, scheme: Scheme, params: ModelParams, initial: Vec<InitialState>) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        scheme,
        params: ParamsDocument::new(params, None),
        initial,
        horizon: 50.0,
        seed: 2024,
        sample_dt: default_sample_dt(),
        compare_dt: default_compare_dt(),
        compare_from: 0.0,
        fluid_dt: default_fluid_dt(),
        randomized_rounding: false,
        outputs: vec![OutputKind::Trajectory, OutputKind::Fluid, OutputKind::Compare],
        stationary: StationarySettings::default(),
        sweep: SweepSettings::default(),
        diffusion: DiffusionSettings::default(),
    }
}

/// Every compiled-in configuration, by name.
pub fn presets() -> Vec<ExperimentConfig> {
    let reference = ModelParams::reference();
    let mut out = Vec::new();
    for (name, (y, x)) in ["fig2a", "fig2b", "fig2c", "fig2d"]
        .into_iter()
        .zip([(0, 0), (1000, 0), (0, 2000), (-1000, 2000)])
    {
        out.push(base_config(name, Scheme::B, reference, vec![InitialState::b(y, x)]));
    }

    let mut fig3 = base_config(
        "fig3",
        Scheme::A,
        ModelParams {
            beta_tilde: 1.0,
            ..reference
        },
        vec![InitialState {
            y: 0,
            x: 0,
            x_target: Some(1000.0),
        }],
    );
    fig3.compare_from = 1.0;
    out.push(fig3);

    for (name, (y, x)) in ["fig4a", "fig4b"].into_iter().zip([(0, 0), (-1000, 2000)]) {
        let mut cfg = base_config(name, Scheme::B, reference, vec![InitialState::b(y, x)]);
        cfg.params.arrival = Some(ArrivalRateFn::sinusoid(1.0, 0.2, 120.0));
        cfg.horizon = 500.0;
        cfg.sample_dt = 0.05;
        out.push(cfg);
    }

    let mut stationary = base_config("stationary", Scheme::B, reference, vec![InitialState::b(0, 1000)]);
    stationary.horizon = 5000.0;
    stationary.outputs = vec![OutputKind::Stationary];
    out.push(stationary);

    let mut diffusion = base_config("diffusion", Scheme::B, reference, vec![InitialState::b(0, 1000)]);
    diffusion.horizon = 200.0;
    diffusion.outputs = vec![OutputKind::DiffusionMoments];
    out.push(diffusion);

    let mut sweep = base_config("sweep", Scheme::B, reference, vec![InitialState::b(0, 0)]);
    sweep.outputs = vec![OutputKind::Sweep];
    out.push(sweep);
    out
}

pub fn preset(name: &str) -> Result<ExperimentConfig, ExperimentError> {
    presets()
        .into_iter()
        .find(|c| c.name == name)
        .ok_or_else(|| ExperimentError::UnknownPreset(name.into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_initial_states() {
        assert_eq!(preset("fig2d").unwrap().initial, vec![InitialState::b(-1000, 2000)]);
        let fig4b = preset("fig4b").unwrap();
        assert_eq!(fig4b.initial, vec![InitialState::b(-1000, 2000)]);
        assert!(!fig4b.arrival().is_constant());
        assert_eq!(fig4b.horizon, 500.0);
        let fig3 = preset("fig3").unwrap();
        assert_eq!(fig3.scheme, Scheme::A);
        assert_eq!(fig3.initial[0].x_target, Some(1000.0));
        assert_eq!(fig3.model().beta_tilde, 1.0);
        assert!(matches!(preset("fig9"), Err(ExperimentError::UnknownPreset(_))));
    }

    #[test]
    fn presets_validate_and_round_trip() {
        for cfg in presets() {
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", cfg.name));
            let back = ExperimentConfig::from_json_str(&cfg.to_json()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn config_defaults_fill_in() {
        let text = r#"{
            "name": "mini", "scheme": "B",
            "params": {"lambda": 1, "r": 50, "beta": 1, "gamma": 2, "epsilon": 0.2,
                       "arrival": {"kind": "sinusoid", "base": 1, "amplitude": 0.2, "period": 120}},
            "initial": [{"y": 0, "x": 50}], "horizon": 5, "seed": 3, "outputs": ["trajectory"]
        }"#;
        let cfg = ExperimentConfig::from_json_str(text).unwrap();
        assert_eq!(cfg.sample_dt, 0.01);
        assert_eq!(cfg.model().scale_r, 50.0);
        assert!(!cfg.arrival().is_constant());
    }

    #[test]
    fn inconsistent_configs_are_rejected() {
        let mut cfg = preset("fig4a").unwrap();
        cfg.outputs = vec![OutputKind::Stationary];
        assert!(matches!(cfg.validate(), Err(ExperimentError::ConfigInvalid(_))));
        let mut cfg = preset("fig3").unwrap();
        cfg.initial[0].x_target = None;
        assert!(matches!(cfg.validate(), Err(ExperimentError::ConfigInvalid(_))));
        let mut cfg = preset("fig2a").unwrap();
        cfg.params.params.epsilon = 5.0;
        assert!(cfg.validate().is_err());
    }
}
