//! Uncentered fluid model under a time-varying arrival rate `λ(t)`.
//!
//! Interior (`x̃ > 0`): `ỹ' = βx̃ − λ(t)`, `x̃' = γλ(t) − γβx̃ − εỹ`.
//! Boundary (`x̃ = 0`): `ỹ' = −λ(t)`, `x̃' = [γλ(t) − εỹ] ∨ 0`.
//!
//! Integration is classical RK4 on a fixed step. A step that would push `x̃`
//! below zero is shortened to the crossing, after which the state slides on
//! the boundary until the interior field points inward again. Steps never
//! straddle a jump of a piecewise-constant `λ(·)`.

use serde::{Deserialize, Serialize};
use std::io::{self, Write};

use super::FluidError;
use crate::arrival::ArrivalRateFn;
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvFluidState {
    pub y: f64,
    pub x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvSample {
    pub t: f64,
    pub y: f64,
    pub x: f64,
    pub on_boundary: bool,
}

/// Sampled solution. Samples are at every integrator node, which includes
/// the grid `k·dt`, the jump times of `λ(·)` and located boundary events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvFluidPath {
    pub dt: f64,
    pub horizon: f64,
    pub samples: Vec<TvSample>,
}

impl TvFluidPath {
    /// Linear interpolation between integrator nodes.
    pub fn state(&self, t: f64) -> Option<TvFluidState> {
        let first = self.samples.first()?;
        let last = self.samples.last()?;
        if t < first.t || t > last.t {
            return None;
        }
        let idx = self.samples.partition_point(|s| s.t < t);
        let hi = &self.samples[idx];
        if idx == 0 || hi.t == t {
            return Some(TvFluidState { y: hi.y, x: hi.x });
        }
        let lo = &self.samples[idx - 1];
        let w = (t - lo.t) / (hi.t - lo.t);
        Some(TvFluidState {
            y: lo.y + w * (hi.y - lo.y),
            x: lo.x + w * (hi.x - lo.x),
        })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,y,x,segment_kind")?;
        for s in &self.samples {
            let kind = if s.on_boundary { "boundary" } else { "interior" };
            writeln!(out, "{},{},{},{}", s.t, s.y, s.x, kind)?;
        }
        Ok(())
    }
}

type State = [f64; 2];

fn rk4<F: Fn(f64, State) -> State>(f: &F, t: f64, u: State, h: f64) -> State {
    let add = |u: State, k: State, s: f64| [u[0] + s * k[0], u[1] + s * k[1]];
    let k1 = f(t, u);
    let k2 = f(t + 0.5 * h, add(u, k1, 0.5 * h));
    let k3 = f(t + 0.5 * h, add(u, k2, 0.5 * h));
    let k4 = f(t + h, add(u, k3, h));
    [
        u[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        u[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Largest `s ∈ [0, h]` such that `ok(s)` holds, assuming `ok(0)` does and
/// `ok(h)` does not.
fn locate<P: Fn(f64) -> bool>(h: f64, ok: P) -> f64 {
    let (mut lo, mut hi) = (0.0, h);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * h.max(1.0) {
            break;
        }
    }
    lo
}

/// Integrates the time-varying fluid model on `[0, horizon]` with step `dt`.
pub fn solve_fluid_tv(
    initial: TvFluidState,
    arrival: &ArrivalRateFn,
    params: &ModelParams,
    horizon: f64,
    dt: f64,
) -> Result<TvFluidPath, FluidError> {
    if !(initial.x >= 0.0) {
        return Err(FluidError::NegativeInitialX(initial.x));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(FluidError::InvalidStep { name: "dt", value: dt });
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(FluidError::InvalidStep {
            name: "horizon",
            value: horizon,
        });
    }
    arrival.validate()?;
    let (beta, gamma, eps) = (params.beta, params.gamma, params.epsilon);

    let lam = |t: f64| arrival.rate(t);
    let interior = |t: f64, u: State| [beta * u[1] - lam(t), gamma * lam(t) - gamma * beta * u[1] - eps * u[0]];
    let boundary = |t: f64, _u: State| [-lam(t), 0.0];
    // the boundary is left once the interior field pushes x̃ upward
    let pushes_up = |t: f64, y: f64| gamma * lam(t) - eps * y > 0.0;

    let jumps = arrival.jumps_between(0.0, horizon);
    let mut next_jump = jumps.iter().copied().peekable();

    let mut t = 0.0;
    let mut u = [initial.y, initial.x];
    let mut on_boundary = u[1] == 0.0 && !pushes_up(0.0, u[0]);
    let mut samples = vec![TvSample {
        t,
        y: u[0],
        x: u[1],
        on_boundary,
    }];
    let mut grid_k: u64 = 0;
    while t < horizon {
        while next_jump.peek().is_some_and(|j| *j <= t) {
            next_jump.next();
        }
        let grid_next = ((grid_k + 1) as f64 * dt).min(horizon);
        let end = next_jump.peek().map_or(grid_next, |j| j.min(grid_next));
        let h = end - t;

        if on_boundary {
            let trial = rk4(&boundary, t, u, h);
            if pushes_up(end, trial[0]) {
                // slide to the point where the field turns inward, then switch
                let s = locate(h, |s| !pushes_up(t + s, rk4(&boundary, t, u, s)[0]));
                let at = rk4(&boundary, t, u, s);
                t += s;
                u = [at[0], 0.0];
                on_boundary = false;
                if s == 0.0 {
                    // the field already points inward at t; take the interior step directly
                    continue;
                }
            } else {
                t = end;
                u = [trial[0], 0.0];
            }
        } else {
            let trial = rk4(&interior, t, u, h);
            if trial[1] < 0.0 {
                let s = locate(h, |s| rk4(&interior, t, u, s)[1] >= 0.0);
                if s == 0.0 {
                    // leaving at x̃ = 0 but bending straight back: slide this step
                    t = end;
                    u = [rk4(&boundary, t - h, u, h)[0], 0.0];
                } else {
                    let at = rk4(&interior, t, u, s);
                    t += s;
                    u = [at[0], 0.0];
                }
                on_boundary = true;
            } else {
                t = end;
                u = trial;
            }
        }
        if t >= grid_next {
            grid_k += 1;
        }
        samples.push(TvSample {
            t,
            y: u[0],
            x: u[1],
            on_boundary,
        });
    }
    Ok(TvFluidPath { dt, horizon, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::{solve_fluid, FluidState};

    #[test]
    fn constant_rate_matches_closed_form() {
        let p = ModelParams::reference();
        let arrival = ArrivalRateFn::Constant { base: 1.0 };
        for (y0, x0) in [(15.0, -1.0), (-1.0, 1.0), (30.0, -0.99), (0.0, 2.0), (5.0, -1.0)] {
            let closed = solve_fluid(FluidState::new(y0, x0), &p, 50.0).unwrap();
            let tv = solve_fluid_tv(TvFluidState { y: y0, x: x0 + 1.0 }, &arrival, &p, 50.0, 1e-3).unwrap();
            let worst = tv
                .samples
                .iter()
                .map(|s| {
                    let c = closed.state(s.t).unwrap();
                    (s.y - c.y).abs().max((s.x - 1.0 - c.x).abs())
                })
                .fold(0.0, f64::max);
            assert!(worst < 1e-6, "({y0}, {x0}): sup error {worst}");
        }
    }

    #[test]
    fn zero_arrivals_drain_pending_invitations() {
        let p = ModelParams::reference();
        let arrival = ArrivalRateFn::Constant { base: 0.0 };
        let path = solve_fluid_tv(TvFluidState { y: 0.0, x: 1.0 }, &arrival, &p, 20.0, 1e-3).unwrap();
        let ys: Vec<f64> = path.samples.iter().map(|s| s.y).collect();
        assert!(ys.windows(2).all(|w| w[1] >= w[0] - 1e-15));
        let last = path.samples.last().unwrap();
        assert!(last.x.abs() < 1e-12 && last.y > 0.0);
        assert!(path.samples.iter().all(|s| s.x >= -1e-12));
    }

    #[test]
    fn sinusoid_tracks_the_rate() {
        let p = ModelParams::reference();
        let arrival = ArrivalRateFn::sinusoid(1.0, 0.2, 120.0);
        let path = solve_fluid_tv(TvFluidState { y: 0.0, x: 0.0 }, &arrival, &p, 240.0, 1e-2).unwrap();
        for t in [150.0, 180.0, 210.0] {
            let s = path.state(t).unwrap();
            assert!((s.x - arrival.rate(t)).abs() < 0.2, "t={t}: x={}", s.x);
            assert!(s.y.abs() < 1.0);
        }
    }

    #[test]
    fn piecewise_steps_land_on_jumps() {
        let p = ModelParams::reference();
        let arrival = ArrivalRateFn::PiecewiseConstant {
            breakpoints: vec![1.23456],
            values: vec![1.0, 2.0],
        };
        let path = solve_fluid_tv(TvFluidState { y: 0.0, x: 1.0 }, &arrival, &p, 3.0, 0.1).unwrap();
        assert!(path.samples.iter().any(|s| s.t == 1.23456));
        // before the jump the system sits at its equilibrium
        let s = path.state(1.2).unwrap();
        assert!(s.y.abs() < 1e-12 && (s.x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_initial_rejected() {
        let p = ModelParams::reference();
        let arrival = ArrivalRateFn::Constant { base: 1.0 };
        let err = solve_fluid_tv(TvFluidState { y: 0.0, x: -0.1 }, &arrival, &p, 1.0, 1e-3).unwrap_err();
        assert!(matches!(err, FluidError::NegativeInitialX(_)));
    }
}
