use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::trajectory::{EventRecord, Sample, Sampling, Trajectory};
use super::{candidate_rates_b, jump_b, EventKind, SimError, SystemState, TargetState};
use crate::arrival::ArrivalRateFn;
use crate::params::{ModelParams, Scheme};
use crate::rng::RandomStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub sampling: Sampling,
    /// Keep a per-event log (needed for the reflection replay).
    pub record_events: bool,
    /// Maximum number of logged events; later events are counted but not stored.
    pub event_budget: usize,
    /// Fluid-scale bound on `λ(t)` used for thinning. Defaults to the
    /// arrival function's own bound.
    pub arrival_bound: Option<f64>,
    /// Allow non-integer `γ` in scheme B by drawing `⌊γ⌋`/`⌈γ⌉` per event.
    pub randomized_rounding: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            sampling: Sampling::default(),
            record_events: false,
            event_budget: 1_000_000,
            arrival_bound: None,
            randomized_rounding: false,
        }
    }
}

/// Event-by-event driver shared by both schemes.
///
/// Holding times are exponential in the total rate and the event is picked
/// categorically by rate. Time-varying arrivals are thinned against a
/// constant bound.
pub struct Simulator<'a> {
    scheme: Scheme,
    params: ModelParams,
    arrival: &'a ArrivalRateFn,
    /// Unscaled arrival rate when it does not depend on time.
    constant_rate: Option<f64>,
    /// Unscaled dominating rate for thinning.
    bound: f64,
    randomized_rounding: bool,
    state: SystemState,
    rng: ChaCha8Rng,
}

impl<'a> Simulator<'a> {
    pub fn new(
        scheme: Scheme,
        initial: SystemState,
        params: &ModelParams,
        arrival: &'a ArrivalRateFn,
        stream: RandomStream,
        opts: &SimOptions,
    ) -> Result<Self, SimError> {
        params.validate_for(scheme, opts.randomized_rounding)?;
        arrival.validate()?;
        if initial.x < 0 {
            return Err(SimError::InvalidInitial(format!("x = {} is negative", initial.x)));
        }
        match (scheme, initial.target) {
            (Scheme::A, None) => {
                return Err(SimError::InvalidInitial("scheme A needs an x_target".into()));
            }
            (Scheme::A, Some(t)) if !(t.x_target >= 0.0 && t.x_target.is_finite()) => {
                return Err(SimError::InvalidInitial(format!(
                    "x_target = {} must be finite and >= 0",
                    t.x_target
                )));
            }
            _ => {}
        }
        let r = params.scale_r;
        let constant_rate = arrival.is_constant().then(|| r * arrival.rate(initial.t));
        let bound = r * opts.arrival_bound.unwrap_or_else(|| arrival.upper_bound());
        let mut state = initial;
        if scheme == Scheme::B {
            state.target = None;
        }
        Ok(Self {
            scheme,
            params: *params,
            arrival,
            constant_rate,
            bound,
            randomized_rounding: opts.randomized_rounding,
            state,
            rng: stream.rng(),
        })
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    /// Applies the next event if it occurs no later than `t_end`. Otherwise
    /// advances the clock to `t_end` and returns `None`.
    pub fn next_event(&mut self, t_end: f64) -> Result<Option<EventRecord>, SimError> {
        loop {
            let arrival_cap = self.constant_rate.unwrap_or(self.bound);
            let x = self.state.x as f64;
            let rates = match self.scheme {
                Scheme::B => candidate_rates_b(self.state.y, self.state.x, &self.params, arrival_cap),
                Scheme::A => [
                    (EventKind::Arrival, arrival_cap),
                    (EventKind::Acceptance, self.params.beta * x),
                    (EventKind::Rejection, self.params.beta_tilde * x),
                ],
            };
            let total: f64 = rates.iter().map(|(_, r)| r).sum();
            if total <= 0.0 {
                self.state.t = t_end;
                return Ok(None);
            }
            let hold: f64 = self.rng.sample::<f64, _>(Exp1) / total;
            let t_next = self.state.t + hold;
            if t_next > t_end {
                self.state.t = t_end;
                return Ok(None);
            }
            self.state.t = t_next;

            let mut pick = self.rng.random::<f64>() * total;
            let mut kind = rates[rates.len() - 1].0;
            for (k, rate) in rates {
                if pick < rate {
                    kind = k;
                    break;
                }
                pick -= rate;
            }

            if kind == EventKind::Arrival && self.constant_rate.is_none() {
                let rate = self.params.scale_r * self.arrival.rate(t_next);
                if rate > self.bound * (1.0 + 1e-12) {
                    return Err(SimError::ThinningBoundViolated {
                        t: t_next,
                        rate: rate / self.params.scale_r,
                        bound: self.bound / self.params.scale_r,
                    });
                }
                if self.rng.random::<f64>() * self.bound >= rate {
                    continue;
                }
            }
            return Ok(Some(self.apply(kind)));
        }
    }

    fn gamma_step(&mut self) -> i64 {
        let gamma = self.params.gamma;
        let floor = gamma.floor();
        let frac = gamma - floor;
        if frac > 0.0 && self.randomized_rounding && self.rng.random::<f64>() < frac {
            floor as i64 + 1
        } else {
            floor as i64
        }
    }

    fn apply(&mut self, kind: EventKind) -> EventRecord {
        let t = self.state.t;
        let (y0, x0) = (self.state.y, self.state.x);
        match self.scheme {
            Scheme::B => {
                let step = match kind {
                    EventKind::Arrival | EventKind::Acceptance => self.gamma_step(),
                    _ => 0,
                };
                let (dy, dx) = jump_b(kind, y0, x0, step);
                self.state.y += dy;
                self.state.x += dx;
            }
            Scheme::A => {
                let p = self.params;
                let target = self.state.target.get_or_insert(TargetState {
                    x_target: 0.0,
                    last_y_change: t,
                });
                let elapsed = t - target.last_y_change;
                let feedback = p.epsilon * y0 as f64 * elapsed;
                match kind {
                    EventKind::Arrival => {
                        self.state.y -= 1;
                        target.x_target = (target.x_target + p.gamma - feedback).max(0.0);
                        target.last_y_change = t;
                    }
                    EventKind::Acceptance => {
                        self.state.y += 1;
                        self.state.x -= 1;
                        target.x_target = (target.x_target - p.gamma - feedback).max(0.0);
                        target.last_y_change = t;
                    }
                    EventKind::Rejection => self.state.x -= 1,
                    EventKind::FeedbackUp | EventKind::FeedbackDown => {
                        unreachable!("scheme A has no feedback events")
                    }
                }
                if (self.state.x as f64) < target.x_target {
                    self.state.x = target.x_target.ceil() as i64;
                }
            }
        }
        EventRecord {
            t,
            kind,
            dy: self.state.y - y0,
            dx: self.state.x - x0,
        }
    }
}

/// Runs either scheme from `initial` over `[initial.t, initial.t + horizon]`.
pub fn simulate(
    scheme: Scheme,
    initial: &SystemState,
    params: &ModelParams,
    arrival: &ArrivalRateFn,
    horizon: f64,
    stream: RandomStream,
    opts: &SimOptions,
) -> Result<Trajectory, SimError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(SimError::HorizonZero(horizon));
    }
    if let Sampling::Grid { dt } = opts.sampling {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SimError::InvalidSampling(format!("grid dt = {dt}")));
        }
    }
    let mut sim = Simulator::new(scheme, *initial, params, arrival, stream, opts)?;
    let t0 = initial.t;
    let end = t0 + horizon;

    let mut samples = Vec::new();
    let mut events = opts.record_events.then(Vec::new);
    let mut truncated = false;
    let mut event_count = 0u64;
    // grid bookkeeping
    let (grid_dt, grid_last) = match opts.sampling {
        Sampling::Grid { dt } => (dt, (horizon / dt + 1e-9).floor() as u64),
        Sampling::Events => (0.0, 0),
    };
    let mut next_k = 0u64;
    if matches!(opts.sampling, Sampling::Events) {
        samples.push(Sample::of(sim.state(), t0));
    }

    loop {
        let before = *sim.state();
        let event = sim.next_event(end)?;
        let cutoff = event.map_or(f64::INFINITY, |e| e.t);
        if grid_dt > 0.0 {
            while next_k <= grid_last {
                let tk = t0 + next_k as f64 * grid_dt;
                if tk >= cutoff {
                    break;
                }
                samples.push(Sample::of(&before, tk));
                next_k += 1;
            }
        }
        let Some(e) = event else { break };
        event_count += 1;
        if let Some(log) = events.as_mut() {
            if log.len() < opts.event_budget {
                log.push(e);
            } else {
                truncated = true;
            }
        }
        if matches!(opts.sampling, Sampling::Events) {
            samples.push(Sample::of(sim.state(), e.t));
        }
    }

    Ok(Trajectory {
        scheme,
        params: *params,
        arrival: arrival.clone(),
        stream,
        initial: *initial,
        horizon,
        sampling: opts.sampling,
        samples,
        events,
        events_truncated: truncated,
        event_count,
        final_state: *sim.state(),
    })
}

pub fn simulate_b(
    initial: &SystemState,
    params: &ModelParams,
    arrival: &ArrivalRateFn,
    horizon: f64,
    stream: RandomStream,
    opts: &SimOptions,
) -> Result<Trajectory, SimError> {
    simulate(Scheme::B, initial, params, arrival, horizon, stream, opts)
}

pub fn simulate_a(
    initial: &SystemState,
    params: &ModelParams,
    arrival: &ArrivalRateFn,
    horizon: f64,
    stream: RandomStream,
    opts: &SimOptions,
) -> Result<Trajectory, SimError> {
    simulate(Scheme::A, initial, params, arrival, horizon, stream, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant() -> ArrivalRateFn {
        ArrivalRateFn::Constant { base: 1.0 }
    }

    fn event_opts() -> SimOptions {
        SimOptions {
            sampling: Sampling::Events,
            record_events: true,
            ..SimOptions::default()
        }
    }

    #[test]
    fn empty_start_first_event_is_an_arrival() {
        let p = ModelParams::reference();
        let traj = simulate_b(&SystemState::b(0, 0), &p, &constant(), 1.0, RandomStream::new(1, 0), &event_opts()).unwrap();
        let first = traj.events.as_ref().unwrap()[0];
        assert_eq!(first.kind, EventKind::Arrival);
        assert_eq!((traj.samples[1].y, traj.samples[1].x), (-1, 2));
        assert!(first.t > 0.0);
    }

    #[test]
    fn first_arrival_time_is_exponential_with_rate_lambda_r() {
        let p = ModelParams::reference();
        let n = 4000;
        let mean: f64 = (0..n)
            .map(|i| {
                let traj = simulate_b(&SystemState::b(0, 0), &p, &constant(), 0.1, RandomStream::new(11, i), &event_opts())
                    .unwrap();
                traj.events.unwrap()[0].t
            })
            .sum::<f64>()
            / n as f64;
        // Exp(1000): mean 1e-3, standard error 1e-3/√n
        assert!((mean - 1e-3).abs() < 4.0 * 1e-3 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn grid_sampling_covers_the_horizon() {
        let p = ModelParams::reference().with_scale(10.0);
        let opts = SimOptions {
            sampling: Sampling::Grid { dt: 0.5 },
            ..SimOptions::default()
        };
        let traj = simulate_b(&SystemState::b(0, 10), &p, &constant(), 5.0, RandomStream::new(3, 0), &opts).unwrap();
        let times: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
        assert_eq!(times.len(), 11);
        assert_eq!(times[0], 0.0);
        assert!((times[10] - 5.0).abs() < 1e-12);
        assert_eq!((traj.samples[0].y, traj.samples[0].x), (0, 10));
    }

    #[test]
    fn runs_are_deterministic() {
        let p = ModelParams::reference().with_scale(50.0);
        let run = || {
            simulate_b(&SystemState::b(5, 20), &p, &constant(), 10.0, RandomStream::new(42, 7), &event_opts()).unwrap()
        };
        assert_eq!(run(), run());
        let other = simulate_b(&SystemState::b(5, 20), &p, &constant(), 10.0, RandomStream::new(42, 8), &event_opts()).unwrap();
        assert_ne!(run().samples, other.samples);
    }

    #[test]
    fn pending_count_never_negative() {
        let p = ModelParams::reference().with_scale(20.0);
        for seed in 0..5 {
            let traj = simulate_b(&SystemState::b(60, 0), &p, &constant(), 20.0, RandomStream::new(seed, 0), &event_opts()).unwrap();
            assert!(traj.samples.iter().all(|s| s.x >= 0));
            assert!(traj.samples.windows(2).all(|w| w[0].t < w[1].t));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = ModelParams::reference();
        let zero = simulate_b(&SystemState::b(0, 0), &p, &constant(), 0.0, RandomStream::new(0, 0), &SimOptions::default());
        assert_eq!(zero.unwrap_err(), SimError::HorizonZero(0.0));
        let neg = simulate_b(&SystemState::b(0, -1), &p, &constant(), 1.0, RandomStream::new(0, 0), &SimOptions::default());
        assert!(matches!(neg, Err(SimError::InvalidInitial(_))));
        let no_target = simulate_a(&SystemState::b(0, 0), &p, &constant(), 1.0, RandomStream::new(0, 0), &SimOptions::default());
        assert!(matches!(no_target, Err(SimError::InvalidInitial(_))));
    }

    #[test]
    fn thinning_bound_violation_is_reported() {
        let p = ModelParams::reference().with_scale(100.0);
        let arrival = ArrivalRateFn::sinusoid(1.0, 0.5, 10.0);
        let opts = SimOptions {
            arrival_bound: Some(1.1),
            ..SimOptions::default()
        };
        let err = simulate_b(&SystemState::b(0, 100), &p, &arrival, 10.0, RandomStream::new(0, 0), &opts).unwrap_err();
        assert!(matches!(err, SimError::ThinningBoundViolated { .. }));
    }

    #[test]
    fn thinned_arrivals_have_the_right_intensity() {
        // piecewise rate 0.5 then 1.5 on [0, 10) and [10, 20): expected arrivals r * 20
        let p = ModelParams::reference().with_scale(200.0);
        let arrival = ArrivalRateFn::PiecewiseConstant {
            breakpoints: vec![10.0],
            values: vec![0.5, 1.5],
        };
        let mut early = 0usize;
        let mut late = 0usize;
        let reps = 20;
        for i in 0..reps {
            let traj = simulate_b(&SystemState::b(0, 200), &p, &arrival, 20.0, RandomStream::new(9, i), &event_opts()).unwrap();
            for e in traj.events.unwrap().iter().filter(|e| e.kind == EventKind::Arrival) {
                if e.t < 10.0 {
                    early += 1;
                } else {
                    late += 1;
                }
            }
        }
        let expect_early = 0.5 * 200.0 * 10.0 * reps as f64;
        let expect_late = 1.5 * 200.0 * 10.0 * reps as f64;
        assert!((early as f64 - expect_early).abs() < 4.0 * expect_early.sqrt());
        assert!((late as f64 - expect_late).abs() < 4.0 * expect_late.sqrt());
    }

    #[test]
    fn randomized_rounding_averages_to_gamma() {
        let p = ModelParams {
            gamma: 2.6,
            ..ModelParams::reference().with_scale(100.0)
        };
        let opts = SimOptions {
            randomized_rounding: true,
            ..event_opts()
        };
        let traj = simulate_b(&SystemState::b(0, 0), &p, &constant(), 20.0, RandomStream::new(5, 0), &opts).unwrap();
        let jumps: Vec<i64> = traj
            .events
            .unwrap()
            .iter()
            .filter(|e| e.kind == EventKind::Arrival)
            .map(|e| e.dx)
            .collect();
        assert!(jumps.iter().all(|j| *j == 2 || *j == 3));
        let threes = jumps.iter().filter(|j| **j == 3).count() as f64 / jumps.len() as f64;
        assert!((threes - 0.6).abs() < 0.03, "fraction {threes}");
        assert!(simulate_b(&SystemState::b(0, 0), &p, &constant(), 1.0, RandomStream::new(5, 0), &event_opts()).is_err());
    }

    #[test]
    fn scheme_a_first_event_replenishes_to_ceiling() {
        let p = ModelParams {
            beta_tilde: 1.0,
            ..ModelParams::reference()
        };
        let traj = simulate_a(&SystemState::a(0, 0, 1000.0), &p, &constant(), 0.05, RandomStream::new(2, 0), &event_opts()).unwrap();
        let first = traj.events.as_ref().unwrap()[0];
        assert_eq!(first.kind, EventKind::Arrival);
        // pre-event Y = 0, so the target moves by exactly +γ
        let s = traj.samples[1];
        assert_eq!(s.x_target, Some(1002.0));
        assert_eq!(s.x, 1002);
    }

    #[test]
    fn scheme_a_without_rejections_never_falls_below_target() {
        let p = ModelParams::reference().with_scale(100.0);
        let traj = simulate_a(&SystemState::a(0, 100, 100.0), &p, &constant(), 30.0, RandomStream::new(4, 0), &event_opts()).unwrap();
        let events = traj.events.as_ref().unwrap();
        for (s, e) in traj.samples.iter().skip(1).zip(events) {
            let target = s.x_target.unwrap();
            let gap = s.x as f64 - target;
            assert!(target >= 0.0 && s.x >= 0);
            assert!(gap >= 0.0, "gap {gap} at {}", s.t);
            // a top-up lands within one of the target
            if e.dx > 0 {
                assert!(gap < 1.0);
            }
        }
    }
}
