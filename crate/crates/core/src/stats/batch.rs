use serde::{Deserialize, Serialize};

use super::{StatsError, Z95};
use crate::arrival::ArrivalRateFn;
use crate::ctmc::{diffusion_scale, SimOptions, Simulator, SystemState, Trajectory};
use crate::diffusion::stationary_covariance;
use crate::params::{ModelParams, Scheme};
use crate::rng::RandomStream;
use crate::spectral::Mat2;

/// Piecewise-constant series: `values[i]` holds on `[times[i], times[i+1])`,
/// the last one until `end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<[f64; 2]>,
    pub end: f64,
}

/// Time integrals of `y, x, y², yx, x², y³, y⁴`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Integrals {
    duration: f64,
    s: [f64; 7],
}

impl Integrals {
    fn add(&mut self, dt: f64, y: f64, x: f64) {
        let y2 = y * y;
        self.duration += dt;
        for (acc, v) in self.s.iter_mut().zip([y, x, y2, y * x, x * x, y2 * y, y2 * y2]) {
            *acc += dt * v;
        }
    }

    fn averages(&self) -> [f64; 7] {
        self.s.map(|v| v / self.duration)
    }
}

/// Statistics derived from time-averaged raw moments.
#[derive(Debug, Clone, Copy)]
struct Derived {
    mean: [f64; 2],
    cov: [f64; 3],
    skew: f64,
    kurt: f64,
}

fn derive(m: [f64; 7]) -> Derived {
    let (my, mx) = (m[0], m[1]);
    let var_y = m[2] - my * my;
    let mu3 = m[5] - 3.0 * my * m[2] + 2.0 * my.powi(3);
    let mu4 = m[6] - 4.0 * my * m[5] + 6.0 * my * my * m[2] - 3.0 * my.powi(4);
    // a degenerate marginal has no shape; report Gaussian values
    let (skew, kurt) = if var_y > 1e-300 {
        (mu3 / var_y.powf(1.5), mu4 / (var_y * var_y) - 3.0)
    } else {
        (0.0, 0.0)
    };
    Derived {
        mean: [my, mx],
        cov: [var_y.max(0.0), m[3] - my * mx, (m[4] - mx * mx).max(0.0)],
        skew,
        kurt,
    }
}

/// Splits time-weighted observations into equal batches after a burn-in.
#[derive(Debug, Clone)]
pub struct BatchAccumulator {
    burn_in: f64,
    end: f64,
    batch_len: f64,
    batches: Vec<Integrals>,
}

impl BatchAccumulator {
    pub fn new(burn_in: f64, end: f64, n_batches: usize) -> Result<Self, StatsError> {
        if n_batches < 10 {
            return Err(StatsError::InsufficientData(format!(
                "need at least 10 batches, got {n_batches}"
            )));
        }
        if !(end > burn_in && burn_in >= 0.0) {
            return Err(StatsError::InsufficientData(format!(
                "horizon {end} does not extend past burn-in {burn_in}"
            )));
        }
        Ok(Self {
            burn_in,
            end,
            batch_len: (end - burn_in) / n_batches as f64,
            batches: vec![Integrals::default(); n_batches],
        })
    }

    /// Right edge of batch `i`; the last batch ends exactly at the horizon.
    fn edge(&self, i: usize) -> f64 {
        if i + 1 == self.batches.len() {
            self.end
        } else {
            self.burn_in + self.batch_len * (i + 1) as f64
        }
    }

    /// Records that `(y, x)` held on `[t0, t1)`.
    pub fn push(&mut self, t0: f64, t1: f64, y: f64, x: f64) {
        let n = self.batches.len();
        let mut a = t0.max(self.burn_in);
        let b = t1.min(self.end);
        if a >= b {
            return;
        }
        let mut idx = (((a - self.burn_in) / self.batch_len) as usize).min(n - 1);
        // the division can land one batch off near an edge
        while idx > 0 && self.edge(idx - 1) > a {
            idx -= 1;
        }
        while a < b {
            while idx + 1 < n && self.edge(idx) <= a {
                idx += 1;
            }
            let stop = b.min(self.edge(idx));
            if stop <= a {
                break;
            }
            self.batches[idx].add(stop - a, y, x);
            a = stop;
        }
    }

    pub fn finish(&self) -> Result<StationaryEstimate, StatsError> {
        let n = self.batches.len();
        if let Some(i) = self.batches.iter().position(|b| b.duration <= 0.0) {
            return Err(StatsError::InsufficientData(format!("batch {i} received no observations")));
        }
        let per_batch: Vec<Derived> = self.batches.iter().map(|b| derive(b.averages())).collect();
        let total_time: f64 = self.batches.iter().map(|b| b.duration).sum();
        let mut pooled = [0.0; 7];
        for b in &self.batches {
            for (p, s) in pooled.iter_mut().zip(b.s) {
                *p += s / total_time;
            }
        }
        let overall = derive(pooled);
        let half_width = |f: &dyn Fn(&Derived) -> f64| {
            let vals: Vec<f64> = per_batch.iter().map(f).collect();
            let m = vals.iter().sum::<f64>() / n as f64;
            let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            Z95 * (var / n as f64).sqrt()
        };
        Ok(StationaryEstimate {
            mean: overall.mean,
            cov: overall.cov,
            mean_half_width: [half_width(&|d| d.mean[0]), half_width(&|d| d.mean[1])],
            cov_half_width: [
                half_width(&|d| d.cov[0]),
                half_width(&|d| d.cov[1]),
                half_width(&|d| d.cov[2]),
            ],
            skew_y: overall.skew,
            skew_half_width: half_width(&|d| d.skew),
            excess_kurtosis_y: overall.kurt,
            kurtosis_half_width: half_width(&|d| d.kurt),
            n_batches: n,
            batch_length: self.batch_len,
            burn_in: self.burn_in,
            observed_time: total_time,
            scale_r: None,
        })
    }
}

/// Batch-means estimate of the stationary mean and covariance of `(y, x)`.
/// Covariance entries are `[Var y, Cov(y, x), Var x]`. Half-widths are 95%
/// normal-approximation intervals from the spread across batches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryEstimate {
    pub mean: [f64; 2],
    pub cov: [f64; 3],
    pub mean_half_width: [f64; 2],
    pub cov_half_width: [f64; 3],
    pub skew_y: f64,
    pub skew_half_width: f64,
    pub excess_kurtosis_y: f64,
    pub kurtosis_half_width: f64,
    pub n_batches: usize,
    pub batch_length: f64,
    pub burn_in: f64,
    pub observed_time: f64,
    /// System scale the series came from, when known.
    pub scale_r: Option<f64>,
}

impl StationaryEstimate {
    pub fn covariance(&self) -> Mat2 {
        Mat2::new(self.cov[0], self.cov[1], self.cov[1], self.cov[2])
    }

    /// The estimate for `(c·y, c·x)`.
    pub fn rescaled(&self, c: f64) -> Self {
        let c2 = c * c;
        Self {
            mean: self.mean.map(|v| v * c),
            cov: self.cov.map(|v| v * c2),
            mean_half_width: self.mean_half_width.map(|v| v * c.abs()),
            cov_half_width: self.cov_half_width.map(|v| v * c2),
            ..self.clone()
        }
    }

    /// Does the 95% interval of `mean[k]` lie inside `(lo, hi)`?
    pub fn mean_ci_within(&self, k: usize, lo: f64, hi: f64) -> bool {
        self.mean[k] - self.mean_half_width[k] > lo && self.mean[k] + self.mean_half_width[k] < hi
    }
}

/// Batch means of a piecewise-constant series after `burn_in`.
pub fn batch_means(series: &TimeSeries, burn_in: f64, n_batches: usize) -> Result<StationaryEstimate, StatsError> {
    if series.times.len() != series.values.len() || series.times.is_empty() {
        return Err(StatsError::InsufficientData("empty or ragged series".into()));
    }
    let mut acc = BatchAccumulator::new(burn_in, series.end, n_batches)?;
    for (i, (t0, v)) in series.times.iter().zip(&series.values).enumerate() {
        let t1 = series.times.get(i + 1).copied().unwrap_or(series.end);
        acc.push(*t0, t1, v[0], v[1]);
    }
    acc.finish()
}

/// Diffusion-scaled batch means of a recorded run.
pub fn stationary_moments(
    traj: &Trajectory,
    burn_in: f64,
    n_batches: usize,
) -> Result<StationaryEstimate, StatsError> {
    let scaled = diffusion_scale(traj);
    let series = TimeSeries {
        times: scaled.samples.iter().map(|s| s.t).collect(),
        values: scaled.samples.iter().map(|s| [s.y, s.x]).collect(),
        end: traj.initial.t + traj.horizon,
    };
    let mut est = batch_means(&series, burn_in, n_batches)?;
    est.scale_r = Some(traj.params.scale_r);
    Ok(est)
}

/// A long scheme B run summarized on both scales, with exact time weighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryRun {
    pub params: ModelParams,
    pub stream: RandomStream,
    pub initial: SystemState,
    pub horizon: f64,
    pub events: u64,
    /// `(Y, X − λr/β)/r`.
    pub fluid: StationaryEstimate,
    /// `(Y, X − λr/β)/√r`.
    pub diffusion: StationaryEstimate,
}

/// Simulates scheme B at constant rate and feeds every holding interval
/// into the batch accumulator, so no path is stored.
pub fn stationary_run(
    params: &ModelParams,
    initial: SystemState,
    horizon: f64,
    burn_in: f64,
    n_batches: usize,
    stream: RandomStream,
) -> Result<StationaryRun, StatsError> {
    let arrival = ArrivalRateFn::Constant { base: params.lambda };
    let mut sim = Simulator::new(Scheme::B, initial, params, &arrival, stream, &SimOptions::default())?;
    let end = initial.t + horizon;
    let mut acc = BatchAccumulator::new(burn_in, end, n_batches)?;
    let centre = params.pending_equilibrium();
    let mut events = 0;
    loop {
        let before = *sim.state();
        let event = sim.next_event(end)?;
        let after = sim.state();
        acc.push(before.t, after.t, before.y as f64, before.x as f64 - centre);
        if event.is_none() {
            break;
        }
        events += 1;
    }
    let raw = acc.finish()?;
    let r = params.scale_r;
    let mut fluid = raw.rescaled(1.0 / r);
    let mut diffusion = raw.rescaled(1.0 / r.sqrt());
    fluid.scale_r = Some(r);
    diffusion.scale_r = Some(r);
    Ok(StationaryRun {
        params: *params,
        stream,
        initial,
        horizon,
        events,
        fluid,
        diffusion,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTolerances {
    /// Relative tolerance on each covariance entry.
    pub cov_rel: f64,
    /// Allowed `|skew|`, widened by the skew half-width.
    pub skew: f64,
    /// Allowed `|excess kurtosis|`, widened by its half-width.
    pub excess_kurtosis: f64,
    /// Allowed `|mean|`, widened by the mean half-width.
    pub mean_abs: f64,
}

impl Default for GaussianTolerances {
    fn default() -> Self {
        Self {
            cov_rel: 0.10,
            skew: 0.1,
            excess_kurtosis: 0.2,
            mean_abs: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryCheck {
    pub name: String,
    pub estimate: f64,
    pub reference: f64,
    pub half_width: f64,
    /// `(estimate − reference) / standard error`; `None` when the error is zero.
    pub z: Option<f64>,
    pub rel_err: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianReport {
    pub entries: Vec<EntryCheck>,
    /// Covariance, skewness and kurtosis checks.
    pub moments_pass: bool,
    pub mean_pass: bool,
    pub pass: bool,
    pub scale_r: Option<f64>,
    /// Set for small systems where finite-scale bias is expected.
    pub pre_asymptotic: bool,
}

/// Compares a diffusion-scale estimate with the stationary Gaussian law.
pub fn gaussian_check(est: &StationaryEstimate, params: &ModelParams, tol: &GaussianTolerances) -> GaussianReport {
    let v = stationary_covariance(params);
    let z = |diff: f64, hw: f64| (hw > 0.0).then(|| diff / (hw / Z95));
    let mut entries = Vec::new();
    for (k, name) in ["mean_y", "mean_x"].into_iter().enumerate() {
        let (e, hw) = (est.mean[k], est.mean_half_width[k]);
        entries.push(EntryCheck {
            name: name.into(),
            estimate: e,
            reference: 0.0,
            half_width: hw,
            z: z(e, hw),
            rel_err: None,
            threshold: tol.mean_abs + hw,
            pass: e.abs() <= tol.mean_abs + hw,
        });
    }
    for (k, (name, reference)) in [("var_y", v[(0, 0)]), ("cov_yx", v[(0, 1)]), ("var_x", v[(1, 1)])]
        .into_iter()
        .enumerate()
    {
        let (e, hw) = (est.cov[k], est.cov_half_width[k]);
        let rel = (e - reference).abs() / reference.abs();
        entries.push(EntryCheck {
            name: name.into(),
            estimate: e,
            reference,
            half_width: hw,
            z: z(e - reference, hw),
            rel_err: Some(rel),
            threshold: tol.cov_rel,
            pass: rel <= tol.cov_rel,
        });
    }
    for (name, e, hw, limit) in [
        ("skew_y", est.skew_y, est.skew_half_width, tol.skew),
        ("excess_kurtosis_y", est.excess_kurtosis_y, est.kurtosis_half_width, tol.excess_kurtosis),
    ] {
        entries.push(EntryCheck {
            name: name.into(),
            estimate: e,
            reference: 0.0,
            half_width: hw,
            z: z(e, hw),
            rel_err: None,
            threshold: limit + hw,
            pass: e.abs() <= limit + hw,
        });
    }
    let mean_pass = entries[..2].iter().all(|e| e.pass);
    let moments_pass = entries[2..].iter().all(|e| e.pass);
    GaussianReport {
        entries,
        moments_pass,
        mean_pass,
        pass: mean_pass && moments_pass,
        scale_r: est.scale_r,
        pre_asymptotic: est.scale_r.is_some_and(|r| r < 100.0),
    }
}
