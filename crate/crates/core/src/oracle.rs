//! Independent numerical references used by the validation suites.
//!
//! Nothing here shares code with the closed-form solvers: the fluid reference
//! integrates the raw vector field with an adaptive Dormand–Prince 5(4)
//! scheme and locates the boundary events by bisection on the step length.

use crate::fluid::FluidState;
use crate::params::ModelParams;

type State = [f64; 2];

const RTOL: f64 = 1e-12;
const ATOL: f64 = 1e-13;
const H_MAX: f64 = 0.05;

// Dormand–Prince tableau
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince step; returns the 5th-order solution and the scaled
/// error estimate.
pub fn dopri_step<F: Fn(f64, State) -> State>(f: &F, t: f64, u: State, h: f64) -> (State, f64) {
    let mut k = [[0.0; 2]; 7];
    for i in 0..7 {
        let mut ui = u;
        for (j, kj) in k.iter().enumerate().take(i) {
            for d in 0..2 {
                ui[d] += h * A[i][j] * kj[d];
            }
        }
        k[i] = f(t + C[i] * h, ui);
    }
    let mut hi = u;
    let mut err: f64 = 0.0;
    for d in 0..2 {
        let mut lo = u[d];
        for i in 0..7 {
            hi[d] += h * B5[i] * k[i][d];
            lo += h * B4[i] * k[i][d];
        }
        err = err.max((hi[d] - lo).abs() / (ATOL + RTOL * hi[d].abs().max(u[d].abs())));
    }
    (hi, err)
}

/// Adaptive integration from `t0` to `t1` that stops early at the first
/// point where `event(u)` turns negative. Returns the end time and state.
fn integrate_until<F, G>(f: &F, event: &G, t0: f64, u0: State, t1: f64, h: &mut f64) -> (f64, State, bool)
where
    F: Fn(f64, State) -> State,
    G: Fn(State) -> f64,
{
    let mut t = t0;
    let mut u = u0;
    while t < t1 {
        let step = h.min(t1 - t).min(H_MAX);
        let (next, err) = dopri_step(f, t, u, step);
        if err > 1.0 {
            *h = step * (0.9 * err.powf(-0.2)).max(0.2);
            continue;
        }
        if event(next) < 0.0 {
            let (mut lo, mut hi) = (0.0, step);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if event(dopri_step(f, t, u, mid).0) < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return (t + hi, dopri_step(f, t, u, hi).0, true);
        }
        t = if step == t1 - t { t1 } else { t + step };
        u = next;
        *h = step * (0.9 * err.max(1e-10).powf(-0.2)).min(5.0);
    }
    (t, u, false)
}

/// Integrates the constant-rate centered fluid equations from `initial` and
/// reports the state at each of the (sorted) `times` in `[0, horizon]`.
pub fn integrate_fluid_reference(
    initial: FluidState,
    params: &ModelParams,
    horizon: f64,
    times: &[f64],
) -> Vec<(f64, FluidState)> {
    let (lambda, beta, gamma, eps) = (params.lambda, params.beta, params.gamma, params.epsilon);
    let floor = -lambda / beta;
    let exit_y = gamma * lambda / eps;
    let interior = |_t: f64, u: State| [beta * u[1], -eps * u[0] - gamma * beta * u[1]];
    let boundary = |_t: f64, _u: State| [-lambda, 0.0];
    let above_floor = |u: State| u[1] - floor + 1e-12;
    let above_exit = |u: State| u[0] - exit_y;

    let mut on_boundary = initial.x <= floor && initial.y > exit_y;
    let mut t = 0.0;
    let mut u = [initial.y, initial.x.max(floor)];
    let mut h = 1e-3;
    let mut out = Vec::with_capacity(times.len());
    for &target in times.iter().filter(|s| **s <= horizon) {
        while t < target {
            let (t_end, u_end, hit) = if on_boundary {
                integrate_until(&boundary, &above_exit, t, u, target, &mut h)
            } else {
                integrate_until(&interior, &above_floor, t, u, target, &mut h)
            };
            t = t_end;
            u = u_end;
            if hit {
                if on_boundary {
                    u = [exit_y, floor];
                    on_boundary = false;
                } else {
                    u[1] = floor;
                    on_boundary = u[0] > exit_y;
                }
            }
        }
        out.push((target, FluidState::new(u[0], u[1])));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_accurate() {
        let f = |_t: f64, u: State| [-u[0], -2.0 * u[1]];
        let mut h = 1e-3;
        let (t, u, hit) = integrate_until(&f, &|_| 1.0, 0.0, [1.0, 1.0], 3.0, &mut h);
        assert!(!hit && t == 3.0);
        assert!((u[0] - (-3.0f64).exp()).abs() < 1e-11);
        assert!((u[1] - (-6.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn boundary_slide_has_exact_length() {
        let p = ModelParams::reference();
        let path = integrate_fluid_reference(FluidState::new(15.0, -1.0), &p, 6.0, &[4.0, 5.0]);
        assert!((path[0].1.y - 11.0).abs() < 1e-10 && path[0].1.x == -1.0);
        assert!((path[1].1.y - 10.0).abs() < 1e-10);
    }
}
