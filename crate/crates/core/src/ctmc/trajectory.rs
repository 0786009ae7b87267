use serde::{Deserialize, Serialize};
use std::io::{self, Write};

use super::{EventKind, SystemState};
use crate::arrival::ArrivalRateFn;
use crate::params::{ModelParams, Scheme};
use crate::rng::RandomStream;

const TIME_SLACK: f64 = 1e-9;

/// How a simulation records its path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Sampling {
    /// State at `0, dt, 2dt, ...` up to the horizon.
    Grid { dt: f64 },
    /// State after every event (plus the initial state).
    Events,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling::Grid { dt: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub y: i64,
    pub x: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_target: Option<f64>,
}

impl Sample {
    pub fn of(state: &SystemState, t: f64) -> Self {
        Self {
            t,
            y: state.y,
            x: state.x,
            x_target: state.x_target(),
        }
    }
}

/// One applied event. `dx` is the net change of `X`, including any
/// scheme A top-up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub kind: EventKind,
    pub dy: i64,
    pub dx: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub scheme: Scheme,
    pub params: ModelParams,
    pub arrival: ArrivalRateFn,
    pub stream: RandomStream,
    pub initial: SystemState,
    pub horizon: f64,
    pub sampling: Sampling,
    pub samples: Vec<Sample>,
    /// Event log, when requested.
    pub events: Option<Vec<EventRecord>>,
    /// Set when the event log hit its budget and later events were dropped.
    pub events_truncated: bool,
    /// Number of events applied (thinning rejections excluded).
    pub event_count: u64,
    pub final_state: SystemState,
}

impl Trajectory {
    /// Writes `t,y,x[,x_target]`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let with_target = self.scheme == Scheme::A;
        if with_target {
            writeln!(out, "t,y,x,x_target")?;
        } else {
            writeln!(out, "t,y,x")?;
        }
        for s in &self.samples {
            match (with_target, s.x_target) {
                (true, Some(target)) => writeln!(out, "{},{},{},{}", s.t, s.y, s.x, target)?,
                _ => writeln!(out, "{},{},{}", s.t, s.y, s.x)?,
            }
        }
        Ok(())
    }

    /// Writes the event log as JSON lines `{"t", "kind", "dy", "dx"}`.
    pub fn write_events_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for event in self.events.iter().flatten() {
            serde_json::to_writer(&mut out, event)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Integer path of `X` after each logged event, starting from the initial state.
    pub fn x_path(&self) -> Vec<i64> {
        let mut x = self.initial.x;
        std::iter::once(x)
            .chain(self.events.iter().flatten().map(|e| {
                x += e.dx;
                x
            }))
            .collect()
    }
}

/// Centering applied by [`fluid_scale_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// `(y, x − λr/β) / r`, for constant arrival rates.
    Centered,
    /// `(y, x) / r`, for time-varying arrival rates.
    Uncentered,
    /// `(y, x − λr/β) / √r`.
    Diffusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledSample {
    pub t: f64,
    pub y: f64,
    pub x: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledTrajectory {
    pub centering: Centering,
    pub scale_r: f64,
    pub samples: Vec<ScaledSample>,
}

impl ScaledTrajectory {
    /// Piecewise-constant (sample-and-hold) value at `t`, or `None` outside
    /// the sampled range. Sample times within `1e−9` of `t` count as reached.
    pub fn hold_at(&self, t: f64) -> Option<&ScaledSample> {
        let first = self.samples.first()?;
        let last = self.samples.last()?;
        if t < first.t - TIME_SLACK || t > last.t + TIME_SLACK {
            return None;
        }
        let idx = self.samples.partition_point(|s| s.t <= t + TIME_SLACK);
        self.samples.get(idx.saturating_sub(1))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,y,x")?;
        for s in &self.samples {
            writeln!(out, "{},{},{}", s.t, s.y, s.x)?;
        }
        Ok(())
    }
}

/// Fluid scaling: centered for constant arrivals, uncentered otherwise.
pub fn fluid_scale(traj: &Trajectory) -> ScaledTrajectory {
    let centering = if traj.arrival.is_constant() {
        Centering::Centered
    } else {
        Centering::Uncentered
    };
    fluid_scale_with(traj, &traj.params, centering)
}

/// Diffusion scaling `(y, x − λr/β)/√r`. Meaningful for constant arrival rates.
pub fn diffusion_scale(traj: &Trajectory) -> ScaledTrajectory {
    fluid_scale_with(traj, &traj.params, Centering::Diffusion)
}

pub fn fluid_scale_with(traj: &Trajectory, params: &ModelParams, centering: Centering) -> ScaledTrajectory {
    let samples = traj
        .samples
        .iter()
        .map(|s| {
            let (y, x) = scale_point(s.y as f64, s.x as f64, params, centering);
            ScaledSample {
                t: s.t,
                y,
                x,
                x_target: s.x_target.map(|v| scale_point(0.0, v, params, centering).1),
            }
        })
        .collect();
    ScaledTrajectory {
        centering,
        scale_r: params.scale_r,
        samples,
    }
}

/// Applies a scaling to a single unscaled point `(y, x)`.
pub fn scale_point(y: f64, x: f64, params: &ModelParams, centering: Centering) -> (f64, f64) {
    let r = params.scale_r;
    let (shift, divisor) = match centering {
        Centering::Centered => (params.pending_equilibrium(), r),
        Centering::Uncentered => (0.0, r),
        Centering::Diffusion => (params.pending_equilibrium(), r.sqrt()),
    };
    (y / divisor, (x - shift) / divisor)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_sample(y: i64, x: i64, arrival: ArrivalRateFn) -> Trajectory {
        let state = SystemState::b(y, x);
        Trajectory {
            scheme: Scheme::B,
            params: ModelParams::reference(),
            arrival,
            stream: RandomStream::new(0, 0),
            initial: state,
            horizon: 1.0,
            sampling: Sampling::default(),
            samples: vec![Sample::of(&state, 0.0)],
            events: None,
            events_truncated: false,
            event_count: 0,
            final_state: state,
        }
    }

    fn only(s: &ScaledTrajectory) -> (f64, f64) {
        (s.samples[0].y, s.samples[0].x)
    }

    #[test]
    fn fluid_scaling_examples() {
        let constant = ArrivalRateFn::Constant { base: 1.0 };
        assert_eq!(only(&fluid_scale(&single_sample(500, 1300, constant.clone()))), (0.5, 0.3));
        assert_eq!(only(&fluid_scale(&single_sample(0, 1000, constant))), (0.0, 0.0));
        let varying = ArrivalRateFn::sinusoid(1.0, 0.2, 120.0);
        assert_eq!(only(&fluid_scale(&single_sample(0, 1000, varying))), (0.0, 1.0));
    }

    #[test]
    fn diffusion_scaling_examples() {
        let p = ModelParams::reference();
        let root = 1000f64.sqrt();
        let (y, x) = scale_point(root * 0.5, 1000.0 - root, &p, Centering::Diffusion);
        assert!((y - 0.5).abs() < 1e-12 && (x + 1.0).abs() < 1e-12);
        assert_eq!(scale_point(0.0, 1000.0, &p, Centering::Diffusion), (0.0, 0.0));
        let traj = single_sample(0, 1000, ArrivalRateFn::Constant { base: 1.0 });
        assert_eq!(only(&diffusion_scale(&traj)), (0.0, 0.0));
    }

    #[test]
    fn hold_lookup() {
        let s = ScaledTrajectory {
            centering: Centering::Centered,
            scale_r: 1.0,
            samples: vec![
                ScaledSample { t: 0.0, y: 1.0, x: 0.0, x_target: None },
                ScaledSample { t: 1.0, y: 2.0, x: 0.0, x_target: None },
            ],
        };
        assert_eq!(s.hold_at(0.5).unwrap().y, 1.0);
        assert_eq!(s.hold_at(1.0).unwrap().y, 2.0);
        assert!(s.hold_at(1.5).is_none());
        assert!(s.hold_at(-0.1).is_none());
    }

    #[test]
    fn csv_header_depends_on_scheme() {
        let traj = single_sample(1, 2, ArrivalRateFn::Constant { base: 1.0 });
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,y,x\n0,1,2\n");
    }
}
