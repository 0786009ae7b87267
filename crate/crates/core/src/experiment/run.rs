use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::{ExperimentConfig, ExperimentError, OutputKind};
use crate::ctmc::{fluid_scale, simulate, Sampling, ScaledTrajectory, SimOptions, Trajectory};
use crate::diffusion::{
    gaussian_transient, lyapunov_residual, moment_ode, simulate_sde, stationary_covariance, DiffusionState,
    MomentState,
};
use crate::fluid::{solve_fluid, solve_fluid_tv, FluidState, FluidTrajectory, TvFluidPath, TvFluidState};
use crate::params::Scheme;
use crate::rng::RandomStream;
use crate::spectral::{Mat2, Vec2};
use crate::stats::{
    gaussian_check, scale_sweep, stationary_run, sup_deviation, write_sweep_csv, DeviationGrid, GaussianTolerances,
    PathEval, ScaledInitial, SweepConfig,
};

/// Stream indices reserved for the single-run outputs; trajectories use
/// the index of their initial state.
const STATIONARY_STREAM: u64 = 1 << 32;
const SDE_STREAM: u64 = (1 << 32) + 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub role: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub label: String,
    pub seed: u64,
    pub stream: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub workers: Option<usize>,
    pub seeds: Vec<SeedRecord>,
    pub files: Vec<FileEntry>,
    /// Set when a plot table had to be interpolated onto the simulation grid.
    pub resampled: bool,
    pub warnings: Vec<String>,
    pub wall_clock_secs: f64,
}

struct Writer {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self, ExperimentError> {
        std::fs::create_dir_all(dir).map_err(|e| unwritable(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn put(&mut self, name: &str, role: &str, bytes: &[u8]) -> Result<(), ExperimentError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| unwritable(&path, e))?;
        self.files.push(FileEntry {
            path: name.into(),
            role: role.into(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    fn put_json<T: Serialize>(&mut self, name: &str, role: &str, value: &T) -> Result<(), ExperimentError> {
        let mut text = serde_json::to_vec_pretty(value).expect("report serializes");
        text.push(b'\n');
        self.put(name, role, &text)
    }
}

fn unwritable(path: &Path, e: std::io::Error) -> ExperimentError {
    ExperimentError::OutputDirUnwritable {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

fn csv<F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>>(f: F) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory cannot fail");
    buf
}

/// Fluid reference for a plot table.
pub enum PlotReference<'a> {
    Fluid(&'a FluidTrajectory),
    TimeVarying(&'a TvFluidPath),
}

pub struct PlotData {
    pub csv: Vec<u8>,
    pub rows: usize,
    /// The reference had no node at some simulation time and was interpolated.
    pub resampled: bool,
}

/// Aligned `t,sim_y,sim_x,fluid_y,fluid_x` rows on the simulation's sample
/// times. Without a reference the fluid columns are left out.
pub fn emit_plot_data(sim: &ScaledTrajectory, reference: Option<PlotReference<'_>>) -> PlotData {
    let mut resampled = false;
    let mut out = Vec::new();
    let header = if reference.is_some() {
        "t,sim_y,sim_x,fluid_y,fluid_x"
    } else {
        "t,sim_y,sim_x"
    };
    writeln!(out, "{header}").expect("memory write");
    let mut rows = 0;
    for s in &sim.samples {
        let fluid = match &reference {
            None => None,
            Some(PlotReference::Fluid(f)) => f.eval(s.t),
            Some(PlotReference::TimeVarying(p)) => {
                let idx = p.samples.partition_point(|n| n.t < s.t - 1e-9);
                if p.samples.get(idx).is_none_or(|n| (n.t - s.t).abs() > 1e-9) {
                    resampled = true;
                }
                p.eval(s.t)
            }
        };
        match (&reference, fluid) {
            (None, _) => writeln!(out, "{},{},{}", s.t, s.y, s.x),
            (Some(_), Some((fy, fx))) => writeln!(out, "{},{},{},{},{}", s.t, s.y, s.x, fy, fx),
            (Some(_), None) => writeln!(out, "{},{},{},,", s.t, s.y, s.x),
        }
        .expect("memory write");
        rows += 1;
    }
    if resampled {
        log::warn!("fluid path does not share the simulation grid; interpolated linearly");
    }
    PlotData {
        csv: out,
        rows,
        resampled,
    }
}

enum Reference {
    Fluid(FluidTrajectory),
    TimeVarying(TvFluidPath),
}

impl Reference {
    fn as_plot(&self) -> PlotReference<'_> {
        match self {
            Reference::Fluid(f) => PlotReference::Fluid(f),
            Reference::TimeVarying(p) => PlotReference::TimeVarying(p),
        }
    }

    fn as_path(&self) -> &dyn PathEval {
        match self {
            Reference::Fluid(f) => f,
            Reference::TimeVarying(p) => p,
        }
    }
}

fn fluid_reference(cfg: &ExperimentConfig, index: usize) -> Result<Reference, ExperimentError> {
    let p = cfg.model();
    let init = cfg.initial[index];
    let r = p.scale_r;
    let (y0, x0) = (init.y as f64 / r, init.effective_x(cfg.scheme) / r);
    let arrival = cfg.arrival();
    if arrival.is_constant() {
        let start = FluidState::new(y0, x0 - p.lambda / p.beta);
        Ok(Reference::Fluid(solve_fluid(start, p, cfg.horizon)?))
    } else {
        let start = TvFluidState { y: y0, x: x0 };
        Ok(Reference::TimeVarying(solve_fluid_tv(start, &arrival, p, cfg.horizon, cfg.fluid_dt)?))
    }
}

fn simulate_initial(cfg: &ExperimentConfig, index: usize) -> Result<Trajectory, ExperimentError> {
    let opts = SimOptions {
        sampling: Sampling::Grid { dt: cfg.sample_dt },
        randomized_rounding: cfg.randomized_rounding,
        ..SimOptions::default()
    };
    let state = cfg.initial[index].system_state(cfg.scheme);
    let stream = RandomStream::new(cfg.seed, index as u64);
    Ok(simulate(cfg.scheme, &state, cfg.model(), &cfg.arrival(), cfg.horizon, stream, &opts)?)
}

/// Executes the requested outputs and writes them, plus `manifest.json`,
/// into `out_dir`.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path, workers: Option<usize>) -> Result<RunManifest, ExperimentError> {
    cfg.validate()?;
    let clock = Instant::now();
    let mut w = Writer::new(out_dir)?;
    let mut seeds = Vec::new();
    let mut warnings = Vec::new();
    let mut resampled = false;
    let wants = |k: OutputKind| cfg.outputs.contains(&k);
    let p = cfg.model();

    for i in 0..cfg.initial.len() {
        let needs_sim = wants(OutputKind::Trajectory) || wants(OutputKind::Compare);
        let needs_fluid = wants(OutputKind::Fluid) || wants(OutputKind::Compare);
        let traj = if needs_sim {
            seeds.push(SeedRecord {
                label: format!("trajectory_{i}"),
                seed: cfg.seed,
                stream: i as u64,
            });
            Some(simulate_initial(cfg, i)?)
        } else {
            None
        };
        let reference = if needs_fluid { Some(fluid_reference(cfg, i)?) } else { None };

        if let (true, Some(traj)) = (wants(OutputKind::Trajectory), &traj) {
            w.put(&format!("trajectory_{i}.csv"), "trajectory", &csv(|b| traj.write_csv(b)))?;
            w.put(
                &format!("trajectory_{i}_scaled.csv"),
                "scaled trajectory",
                &csv(|b| fluid_scale(traj).write_csv(b)),
            )?;
            if cfg.scheme == Scheme::A {
                let gap = csv(|b| {
                    writeln!(b, "t,x_minus_target,abs_gap_scaled")?;
                    for s in &traj.samples {
                        let d = s.x as f64 - s.x_target.unwrap_or(s.x as f64);
                        writeln!(b, "{},{},{}", s.t, d, d.abs() / p.scale_r)?;
                    }
                    Ok(())
                });
                w.put(&format!("target_gap_{i}.csv"), "scheme A target gap", &gap)?;
            }
        }
        if let (true, Some(reference)) = (wants(OutputKind::Fluid), &reference) {
            match reference {
                Reference::Fluid(f) => {
                    w.put(&format!("fluid_{i}.csv"), "fluid", &csv(|b| f.write_csv(b, cfg.sample_dt)))?;
                    w.put_json(&format!("fluid_{i}_segments.json"), "fluid segments", &f.segments)?;
                }
                Reference::TimeVarying(path) => {
                    w.put(&format!("fluid_{i}.csv"), "fluid", &csv(|b| path.write_csv(b)))?;
                }
            }
        }
        if let (true, Some(traj), Some(reference)) = (wants(OutputKind::Compare), &traj, &reference) {
            let scaled = fluid_scale(traj);
            let grid = DeviationGrid::new(cfg.compare_from, cfg.horizon, cfg.compare_dt);
            let report = sup_deviation(&scaled, reference.as_path(), grid)?;
            w.put_json(&format!("deviation_{i}.json"), "deviation report", &report)?;
            let plot = emit_plot_data(&scaled, Some(reference.as_plot()));
            if plot.resampled {
                resampled = true;
                warnings.push(format!("plot_{i}.csv: fluid path interpolated onto the simulation grid"));
            }
            w.put(&format!("plot_{i}.csv"), "plot table", &plot.csv)?;
        } else if let (true, Some(traj)) = (wants(OutputKind::Trajectory), &traj) {
            let plot = emit_plot_data(&fluid_scale(traj), None);
            w.put(&format!("plot_{i}.csv"), "plot table", &plot.csv)?;
        }
    }

    if wants(OutputKind::DiffusionMoments) {
        let init = cfg.initial[0];
        let root = p.scale_r.sqrt();
        let m0 = Vec2::new(
            init.y as f64 / root,
            (init.effective_x(cfg.scheme) - p.pending_equilibrium()) / root,
        );
        let path = moment_ode(m0, Mat2::zeros(), p, cfg.horizon, cfg.diffusion.moment_dt)?;
        w.put("moments.csv", "moment path", &csv(|b| path.write_csv(b)))?;
        let v_inf = stationary_covariance(p);
        let closed = gaussian_transient(p, cfg.horizon, &MomentState::new(0.0, m0, Mat2::zeros()))?;
        w.put_json(
            "diffusion.json",
            "diffusion summary",
            &serde_json::json!({
                "stationary_covariance": [[v_inf[(0, 0)], v_inf[(0, 1)]], [v_inf[(1, 0)], v_inf[(1, 1)]]],
                "lyapunov_residual": lyapunov_residual(&v_inf, p),
                "final_ode": path.last(),
                "final_closed_form": closed,
            }),
        )?;
        seeds.push(SeedRecord {
            label: "sde_path".into(),
            seed: cfg.seed,
            stream: SDE_STREAM,
        });
        let mut rng = RandomStream::new(cfg.seed, SDE_STREAM).rng();
        let every = ((cfg.sample_dt / cfg.diffusion.sde_dt).round() as usize).max(1);
        let sde = simulate_sde(
            DiffusionState::new(m0[0], m0[1]),
            p,
            cfg.horizon,
            cfg.diffusion.sde_dt,
            every,
            &mut rng,
        )?;
        let body = csv(|b| {
            writeln!(b, "t,y_hat,x_hat")?;
            for (t, s) in sde.times.iter().zip(&sde.states) {
                writeln!(b, "{},{},{}", t, s.y_hat, s.x_hat)?;
            }
            Ok(())
        });
        w.put("sde_path.csv", "SDE sample path", &body)?;
    }

    if wants(OutputKind::Stationary) {
        seeds.push(SeedRecord {
            label: "stationary".into(),
            seed: cfg.seed,
            stream: STATIONARY_STREAM,
        });
        let st = cfg.stationary;
        let state = cfg.initial[0].system_state(Scheme::B);
        let stream = RandomStream::new(cfg.seed, STATIONARY_STREAM);
        let result = stationary_run(p, state, cfg.horizon, st.burn_in, st.n_batches, stream)?;
        let check = gaussian_check(&result.diffusion, p, &GaussianTolerances::default());
        if check.pre_asymptotic {
            warnings.push(format!("r = {} is small; moment checks are pre-asymptotic", p.scale_r));
        }
        w.put_json(
            "stationary.json",
            "stationary estimate",
            &serde_json::json!({ "run": result, "gaussian_check": check }),
        )?;
    }

    if wants(OutputKind::Sweep) {
        let init = cfg.initial[0];
        let sweep = SweepConfig {
            params: *p,
            arrival: cfg.arrival(),
            r_list: cfg.sweep.r_list.clone(),
            // express the first initial state per unit of the configured r
            initial: ScaledInitial {
                y: init.y as f64 / p.scale_r,
                x: init.x as f64 / p.scale_r,
            },
            horizon: cfg.horizon,
            replications: cfg.sweep.replications,
            grid_dt: cfg.compare_dt,
            seed: cfg.seed,
            workers,
        };
        seeds.push(SeedRecord {
            label: format!("sweep streams 0..{}", cfg.sweep.replications),
            seed: cfg.seed,
            stream: 0,
        });
        let table = scale_sweep(&sweep)?;
        w.put("sweep.csv", "sweep table", &csv(|b| write_sweep_csv(&table, b)))?;
        w.put_json("sweep.json", "sweep report", &table)?;
    }

    let manifest = RunManifest {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        workers,
        seeds,
        files: w.files.clone(),
        resampled,
        warnings,
        wall_clock_secs: clock.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    let path = out_dir.join("manifest.json");
    std::fs::write(&path, text).map_err(|e| unwritable(&path, e))?;
    Ok(manifest)
}
