//! Python bindings. Fluid states use the centered coordinates `(y, x − λ/β)`;
//! simulation states are raw counts.

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use std::path::PathBuf;

use ::invitesim::ctmc::{fluid_scale, simulate, Sampling, SimOptions, SystemState, Trajectory};
use ::invitesim::diffusion::{moment_ode, stationary_covariance};
use ::invitesim::experiment::{self, AcceptanceSettings, ExperimentConfig, ExperimentError};
use ::invitesim::fluid::{solve_fluid, FluidState, FluidTrajectory};
use ::invitesim::{spectral_decompose, ArrivalRateFn, Mat2, RandomStream, Scheme, Vec2};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "ModelParams", module = "invitesim", from_py_object)]
#[derive(Clone)]
pub struct PyModelParams {
    inner: ::invitesim::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (lam, r, beta, gamma, epsilon, beta_tilde = 0.0))]
    fn new(lam: f64, r: f64, beta: f64, gamma: f64, epsilon: f64, beta_tilde: f64) -> PyResult<Self> {
        let inner = ::invitesim::ModelParams {
            lambda: lam,
            scale_r: r,
            beta,
            beta_tilde,
            gamma,
            epsilon,
        };
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    /// λ = 1, r = 1000, β = 1, γ = 2, ε = 0.2.
    #[staticmethod]
    fn reference() -> Self {
        Self {
            inner: ::invitesim::ModelParams::reference(),
        }
    }

    fn with_scale(&self, r: f64) -> PyResult<Self> {
        let inner = self.inner.with_scale(r);
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda
    }
    #[getter]
    fn r(&self) -> f64 {
        self.inner.scale_r
    }
    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }
    #[getter]
    fn beta_tilde(&self) -> f64 {
        self.inner.beta_tilde
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }
    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    /// `βγ²/4`; stability needs `ε` strictly below it.
    fn stability_bound(&self) -> f64 {
        self.inner.stability_bound()
    }

    /// Eigen-magnitudes `(ν₁, ν₂)` of the fluid matrix.
    fn eigenvalues(&self) -> PyResult<(f64, f64)> {
        let s = spectral_decompose(&self.inner).map_err(value_err)?;
        Ok((s.nu1, s.nu2))
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("params serialize")
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ModelParams(lam={}, r={}, beta={}, gamma={}, epsilon={}, beta_tilde={})",
            p.lambda, p.scale_r, p.beta, p.gamma, p.epsilon, p.beta_tilde
        )
    }
}

#[pyclass(name = "Trajectory", module = "invitesim")]
pub struct PyTrajectory {
    inner: Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.samples.iter().map(|s| s.t).collect()
    }
    #[getter]
    fn y(&self) -> Vec<i64> {
        self.inner.samples.iter().map(|s| s.y).collect()
    }
    #[getter]
    fn x(&self) -> Vec<i64> {
        self.inner.samples.iter().map(|s| s.x).collect()
    }
    #[getter]
    fn x_target(&self) -> Option<Vec<f64>> {
        self.inner.samples.iter().map(|s| s.x_target).collect()
    }
    #[getter]
    fn event_count(&self) -> u64 {
        self.inner.event_count
    }

    /// Fluid-scaled and centered samples as `(t, y, x)` rows.
    fn scaled(&self) -> Vec<(f64, f64, f64)> {
        fluid_scale(&self.inner).samples.iter().map(|s| (s.t, s.y, s.x)).collect()
    }

    /// The `t,y,x[,x_target]` CSV text.
    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.inner.write_csv(&mut buf).map_err(value_err)?;
        String::from_utf8(buf).map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.inner.samples.len()
    }
}

#[pyclass(name = "FluidTrajectory", module = "invitesim")]
pub struct PyFluidTrajectory {
    inner: FluidTrajectory,
}

#[pymethods]
impl PyFluidTrajectory {
    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon
    }

    /// Centered `(y, x)` at `t`, or `None` past the horizon.
    fn state(&self, t: f64) -> Option<(f64, f64)> {
        self.inner.state(t).map(|s| (s.y, s.x))
    }

    fn star_norm(&self, t: f64) -> Option<f64> {
        self.inner.star_norm_at(t)
    }

    fn boundary_segments(&self) -> usize {
        self.inner.boundary_segments()
    }

    /// `(t, y, x, segment_kind)` rows on a grid of spacing `dt`.
    fn sample(&self, dt: f64) -> PyResult<Vec<(f64, f64, f64, &'static str)>> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(PyValueError::new_err("dt must be positive"));
        }
        Ok(self.inner.sample(dt).into_iter().map(|(t, s, k)| (t, s.y, s.x, k)).collect())
    }
}

fn parse_scheme(scheme: &str) -> PyResult<Scheme> {
    match scheme {
        "A" | "a" => Ok(Scheme::A),
        "B" | "b" => Ok(Scheme::B),
        other => Err(PyValueError::new_err(format!("scheme must be 'A' or 'B', got '{other}'"))),
    }
}

/// Simulates the unscaled chain from `(y, x)`, sampling every `sample_dt`.
///
/// `arrival` is an optional JSON arrival-rate block; the default is the
/// constant rate `lam`. Scheme A needs `x_target`.
#[pyfunction]
#[pyo3(signature = (params, y, x, horizon, seed, stream = 0, scheme = "B", x_target = None, sample_dt = 0.01, arrival = None))]
#[allow(clippy::too_many_arguments)]
fn simulate_chain(
    py: Python<'_>,
    params: &PyModelParams,
    y: i64,
    x: i64,
    horizon: f64,
    seed: u64,
    stream: u64,
    scheme: &str,
    x_target: Option<f64>,
    sample_dt: f64,
    arrival: Option<&str>,
) -> PyResult<PyTrajectory> {
    let scheme = parse_scheme(scheme)?;
    let initial = match (scheme, x_target) {
        (Scheme::A, Some(t)) => SystemState::a(y, x, t),
        (Scheme::A, None) => return Err(PyValueError::new_err("scheme A needs x_target")),
        (Scheme::B, _) => SystemState::b(y, x),
    };
    let arrival: ArrivalRateFn = match arrival {
        Some(text) => serde_json::from_str(text).map_err(value_err)?,
        None => ArrivalRateFn::Constant {
            base: params.inner.lambda,
        },
    };
    let opts = SimOptions {
        sampling: Sampling::Grid { dt: sample_dt },
        ..SimOptions::default()
    };
    let p = params.inner;
    let traj = py
        .detach(|| simulate(scheme, &initial, &p, &arrival, horizon, RandomStream::new(seed, stream), &opts))
        .map_err(value_err)?;
    Ok(PyTrajectory { inner: traj })
}

/// Fluid solution from the centered state `(y, x)`.
#[pyfunction]
fn fluid(params: &PyModelParams, y: f64, x: f64, horizon: f64) -> PyResult<PyFluidTrajectory> {
    let inner = solve_fluid(FluidState::new(y, x), &params.inner, horizon).map_err(value_err)?;
    Ok(PyFluidTrajectory { inner })
}

/// Stationary covariance of the diffusion limit as nested lists.
#[pyfunction]
fn stationary_cov(params: &PyModelParams) -> Vec<Vec<f64>> {
    let v = stationary_covariance(&params.inner);
    vec![vec![v[(0, 0)], v[(0, 1)]], vec![v[(1, 0)], v[(1, 1)]]]
}

/// `(t, m1, m2, V11, V12, V22)`.
type MomentRow = (f64, f64, f64, f64, f64, f64);

/// Moment equations from `m0` and `v0 = [v11, v12, v22]`; rows are
/// `(t, m1, m2, V11, V12, V22)`.
#[pyfunction]
#[pyo3(signature = (params, horizon, dt = 0.01, m0 = (0.0, 0.0), v0 = (0.0, 0.0, 0.0)))]
fn moments(
    params: &PyModelParams,
    horizon: f64,
    dt: f64,
    m0: (f64, f64),
    v0: (f64, f64, f64),
) -> PyResult<Vec<MomentRow>> {
    let m = Vec2::new(m0.0, m0.1);
    let v = Mat2::new(v0.0, v0.1, v0.1, v0.2);
    let path = moment_ode(m, v, &params.inner, horizon, dt).map_err(value_err)?;
    Ok(path
        .samples
        .iter()
        .map(|s| (s.t, s.m[0], s.m[1], s.v[(0, 0)], s.v[(0, 1)], s.v[(1, 1)]))
        .collect())
}

/// Names of the compiled-in presets.
#[pyfunction]
fn preset_names() -> Vec<String> {
    experiment::presets().into_iter().map(|c| c.name).collect()
}

/// A preset config as JSON text.
#[pyfunction]
fn preset_json(name: &str) -> PyResult<String> {
    match experiment::preset(name) {
        Ok(cfg) => Ok(cfg.to_json()),
        Err(e @ ExperimentError::UnknownPreset(_)) => Err(PyKeyError::new_err(e.to_string())),
        Err(e) => Err(value_err(e)),
    }
}

/// Runs a JSON config into `out_dir` and returns the manifest JSON.
#[pyfunction]
#[pyo3(signature = (config_json, out_dir, workers = None))]
fn run_config(py: Python<'_>, config_json: &str, out_dir: PathBuf, workers: Option<usize>) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json_str(config_json).map_err(value_err)?;
    let manifest = py.detach(|| experiment::run(&cfg, &out_dir, workers)).map_err(value_err)?;
    serde_json::to_string_pretty(&manifest).map_err(value_err)
}

/// Runs an acceptance suite (or `"all"`) and returns the summary JSON.
#[pyfunction]
#[pyo3(signature = (suite, seed = None, workers = None))]
fn acceptance(py: Python<'_>, suite: &str, seed: Option<u64>, workers: Option<usize>) -> PyResult<String> {
    let mut settings = AcceptanceSettings {
        workers,
        ..AcceptanceSettings::default()
    };
    if let Some(s) = seed {
        settings.seed = s;
    }
    let summary = py.detach(|| experiment::run_acceptance(suite, &settings)).map_err(value_err)?;
    serde_json::to_string_pretty(&summary).map_err(value_err)
}

#[pymodule]
#[pyo3(name = "invitesim")]
fn invitesim_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyFluidTrajectory>()?;
    m.add_function(wrap_pyfunction!(simulate_chain, m)?)?;
    m.add_function(wrap_pyfunction!(fluid, m)?)?;
    m.add_function(wrap_pyfunction!(stationary_cov, m)?)?;
    m.add_function(wrap_pyfunction!(moments, m)?)?;
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add_function(wrap_pyfunction!(preset_json, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(acceptance, m)?)?;
    Ok(())
}
