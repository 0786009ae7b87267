use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

use super::{sup_deviation, DeviationGrid, DeviationReport, StatsError};
use crate::arrival::ArrivalRateFn;
use crate::ctmc::{fluid_scale, simulate_b, Sampling, SimOptions, SystemState};
use crate::fluid::{solve_fluid, solve_fluid_tv, FluidState, TvFluidState};
use crate::params::ModelParams;
use crate::rng::RandomStream;

/// Initial state in uncentered per-`r` units: the system starts at
/// `(Y, X) = (round(y·r), round(x·r))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledInitial {
    pub y: f64,
    pub x: f64,
}

impl ScaledInitial {
    pub fn system_state(&self, r: f64) -> SystemState {
        SystemState::b((self.y * r).round() as i64, (self.x * r).round() as i64)
    }
}

/// One scheme B replication compared against its fluid limit.
///
/// Constant arrival rates use the centered closed-form solution; otherwise
/// the uncentered time-varying solver with its default step.
pub fn deviation_run(
    params: &ModelParams,
    arrival: &ArrivalRateFn,
    initial: ScaledInitial,
    grid: DeviationGrid,
    stream: RandomStream,
) -> Result<DeviationReport, StatsError> {
    let r = params.scale_r;
    let start = initial.system_state(r);
    // use the rounded start so the two paths begin at the same point
    let (y0, x0) = (start.y as f64 / r, start.x as f64 / r);
    let opts = SimOptions {
        sampling: Sampling::Grid { dt: grid.dt },
        ..SimOptions::default()
    };
    let traj = simulate_b(&start, params, arrival, grid.end, stream, &opts)?;
    let scaled = fluid_scale(&traj);
    if arrival.is_constant() {
        let fluid = solve_fluid(FluidState::new(y0, x0 - params.lambda / params.beta), params, grid.end)?;
        sup_deviation(&scaled, &fluid, grid)
    } else {
        let fluid = solve_fluid_tv(TvFluidState { y: y0, x: x0 }, arrival, params, grid.end, 1e-3)?;
        sup_deviation(&scaled, &fluid, grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Base parameters; `r` is replaced by each entry of `r_list`.
    pub params: ModelParams,
    pub arrival: ArrivalRateFn,
    pub r_list: Vec<f64>,
    pub initial: ScaledInitial,
    pub horizon: f64,
    pub replications: u64,
    #[serde(default = "default_grid_dt")]
    pub grid_dt: f64,
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_grid_dt() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub r: f64,
    pub mean_dev: f64,
    /// Sample standard deviation; needs at least two replications.
    pub std_dev: Option<f64>,
    pub n: usize,
    pub deviations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub config: SweepConfig,
    pub rows: Vec<SweepRow>,
    /// Mean deviation strictly decreasing in `r`.
    pub decreasing: bool,
    /// Least-squares slope of `ln mean_dev` against `ln r`.
    pub loglog_slope: Option<f64>,
}

/// Mean sup deviation from the fluid limit for each scale in `r_list`.
///
/// Replication `k` uses stream `k` of `seed` at every scale. Work runs on a
/// dedicated pool of `workers` threads; results are collected in input
/// order, so the table does not depend on scheduling.
pub fn scale_sweep(cfg: &SweepConfig) -> Result<SweepTable, StatsError> {
    if cfg.r_list.is_empty() || cfg.r_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(StatsError::InvalidSweep("r_list must be nonempty and increasing".into()));
    }
    if cfg.replications == 0 {
        return Err(StatsError::InvalidSweep("need at least one replication".into()));
    }
    let jobs: Vec<(usize, u64)> = (0..cfg.r_list.len())
        .flat_map(|i| (0..cfg.replications).map(move |k| (i, k)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| StatsError::Pool(e.to_string()))?;
    let grid = DeviationGrid::new(0.0, cfg.horizon, cfg.grid_dt);
    let results: Vec<Result<f64, StatsError>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, k)| {
                let params = cfg.params.with_scale(cfg.r_list[i]);
                let stream = RandomStream::new(cfg.seed, k);
                deviation_run(&params, &cfg.arrival, cfg.initial, grid, stream).map(|d| d.sup)
            })
            .collect()
    });
    let mut devs = vec![Vec::new(); cfg.r_list.len()];
    for (&(i, _), res) in jobs.iter().zip(results) {
        devs[i].push(res?);
    }
    let rows: Vec<SweepRow> = cfg
        .r_list
        .iter()
        .zip(devs)
        .map(|(&r, deviations)| {
            let n = deviations.len();
            let mean = deviations.iter().sum::<f64>() / n as f64;
            let std_dev = (n >= 2).then(|| {
                (deviations.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
            });
            SweepRow {
                r,
                mean_dev: mean,
                std_dev,
                n,
                deviations,
            }
        })
        .collect();
    let decreasing = rows.windows(2).all(|w| w[1].mean_dev < w[0].mean_dev);
    let loglog_slope = (rows.len() >= 2).then(|| {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.r.ln(), r.mean_dev.ln())).collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(SweepTable {
        config: cfg.clone(),
        rows,
        decreasing,
        loglog_slope,
    })
}

/// Writes `r,mean_dev,std_dev,n`; `std_dev` is empty for single replications.
pub fn write_sweep_csv<W: Write>(table: &SweepTable, mut out: W) -> io::Result<()> {
    writeln!(out, "r,mean_dev,std_dev,n")?;
    for row in &table.rows {
        let sd = row.std_dev.map(|s| s.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{}", row.r, row.mean_dev, sd, row.n)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(r_list: Vec<f64>, replications: u64, workers: usize) -> SweepConfig {
        SweepConfig {
            params: ModelParams::reference(),
            arrival: ArrivalRateFn::Constant { base: 1.0 },
            r_list,
            initial: ScaledInitial { y: 0.0, x: 0.0 },
            horizon: 10.0,
            replications,
            grid_dt: 0.05,
            seed: 42,
            workers: Some(workers),
        }
    }

    #[test]
    fn deviation_shrinks_with_scale() {
        let table = scale_sweep(&config(vec![100.0, 300.0, 1000.0], 8, 4)).unwrap();
        assert!(table.decreasing, "{:?}", table.rows.iter().map(|r| r.mean_dev).collect::<Vec<_>>());
        let slope = table.loglog_slope.unwrap();
        assert!((-0.7..=-0.3).contains(&slope), "slope {slope}");
    }

    #[test]
    fn std_needs_two_replications() {
        let one = scale_sweep(&config(vec![50.0], 1, 1)).unwrap();
        assert_eq!(one.rows[0].std_dev, None);
        let many = scale_sweep(&config(vec![50.0], 3, 2)).unwrap();
        assert!(many.rows[0].std_dev.unwrap() > 0.0);
        let mut buf = Vec::new();
        write_sweep_csv(&one, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().ends_with(",,1\n"));
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let a = scale_sweep(&config(vec![50.0, 100.0], 4, 1)).unwrap();
        let b = scale_sweep(&config(vec![50.0, 100.0], 4, 3)).unwrap();
        assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn rejects_unsorted_scales() {
        assert!(matches!(
            scale_sweep(&config(vec![100.0, 50.0], 1, 1)),
            Err(StatsError::InvalidSweep(_))
        ));
    }
}
