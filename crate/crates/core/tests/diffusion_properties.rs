use invitesim::diffusion::{
    euler_maruyama, lyapunov_residual, mean_closed_form, moment_ode, sde_snapshots, stationary_covariance,
    DiffusionState, NoiseVector,
};
use invitesim::{spectral_decompose, Mat2, ModelParams, RandomStream, Vec2};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn valid_params() -> impl Strategy<Value = ModelParams> {
    (0.1..5.0f64, 0.1..5.0f64, 0.5..4.0f64, 0.0..1.0f64).prop_map(|(lambda, beta, gamma, frac)| {
        // keep ε clear of the repeated-eigenvalue point βγ²/4
        let epsilon = (0.01 + 0.98 * frac) * beta * gamma * gamma / 4.0;
        ModelParams {
            lambda,
            scale_r: 1000.0,
            beta,
            beta_tilde: 0.0,
            gamma,
            epsilon,
        }
    })
}

fn psd_matrix() -> impl Strategy<Value = Mat2> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b, c, d)| {
        let l = Mat2::new(a, b, c, d);
        l * l.transpose()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn stationary_covariance_solves_lyapunov(p in valid_params()) {
        prop_assume!(p.validate().is_ok());
        let v = stationary_covariance(&p);
        let scale = v.norm().max(1.0);
        prop_assert!(lyapunov_residual(&v, &p) <= 1e-10 * scale);
        prop_assert!(v[(0, 0)] > 0.0 && v[(1, 1)] > 0.0 && v[(0, 1)] == v[(1, 0)]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn covariance_stays_symmetric_psd(v0 in psd_matrix()) {
        let p = ModelParams::reference();
        let path = moment_ode(Vec2::zeros(), v0, &p, 30.0, 1e-2).unwrap();
        for s in &path.samples {
            prop_assert!(s.asymmetry() <= 1e-12);
            prop_assert!(s.min_eigenvalue() >= -1e-10);
        }
    }
}

#[test]
fn mean_equals_fluid_interior_flow() {
    let p = ModelParams::reference();
    let spec = spectral_decompose(&p).unwrap();
    let m0 = Vec2::new(-1.0, 1.0);
    let path = moment_ode(m0, Mat2::zeros(), &p, 50.0, 1e-2).unwrap();
    let fluid = invitesim::fluid::interior_solution;
    let worst = path
        .samples
        .iter()
        .map(|s| {
            let f = fluid(invitesim::fluid::FluidState::new(m0[0], m0[1]), s.t, &spec);
            (s.m[0] - f.y).abs().max((s.m[1] - f.x).abs())
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-8, "sup error {worst}");
}

/// Sample mean/covariance of `n` endpoints and their standard errors.
struct Moments {
    mean: [f64; 2],
    cov: [f64; 3],
    se_mean: [f64; 2],
    se_cov: [f64; 3],
}

fn moments(points: &[DiffusionState]) -> Moments {
    let n = points.len() as f64;
    let my = points.iter().map(|s| s.y_hat).sum::<f64>() / n;
    let mx = points.iter().map(|s| s.x_hat).sum::<f64>() / n;
    let prods = |f: &dyn Fn(f64, f64) -> f64| -> (f64, f64) {
        let vals: Vec<f64> = points.iter().map(|s| f(s.y_hat - my, s.x_hat - mx)).collect();
        let m = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    };
    let (c11, s11) = prods(&|a, _| a * a);
    let (c12, s12) = prods(&|a, b| a * b);
    let (c22, s22) = prods(&|_, b| b * b);
    Moments {
        mean: [my, mx],
        cov: [c11, c12, c22],
        se_mean: [(c11 / n).sqrt(), (c22 / n).sqrt()],
        se_cov: [s11, s12, s22],
    }
}

#[test]
fn monte_carlo_matches_moment_equations() {
    let p = ModelParams::reference();
    let dt = 1e-3;
    let stream = RandomStream::new(20240601, 0);
    let ends: Vec<Vec<DiffusionState>> = (0..10_000u64)
        .map(|i| {
            let mut rng = stream.substream(i).rng();
            sde_snapshots(DiffusionState::default(), &p, &[1.0, 5.0], dt, &mut rng).unwrap()
        })
        .collect();
    let ode = moment_ode(Vec2::zeros(), Mat2::zeros(), &p, 5.0, dt).unwrap();
    for (col, t) in [(0usize, 1.0), (1, 5.0)] {
        let pts: Vec<DiffusionState> = ends.iter().map(|e| e[col]).collect();
        let got = moments(&pts);
        let want = ode.samples.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs())).unwrap();
        for k in 0..2 {
            let z = (got.mean[k] - want.m[k]) / got.se_mean[k];
            assert!(z.abs() < 3.0, "t={t} mean[{k}] z={z}");
        }
        let v = [want.v[(0, 0)], want.v[(0, 1)], want.v[(1, 1)]];
        for k in 0..3 {
            let z = (got.cov[k] - v[k]) / got.se_cov[k];
            assert!(z.abs() < 3.0, "t={t} cov[{k}] got {} want {} z={z}", got.cov[k], v[k]);
        }
    }
}

#[test]
fn halving_the_step_halves_the_strong_error() {
    let p = ModelParams::reference();
    let noise = NoiseVector::new(&p);
    let fine_dt = 1.0 / 6400.0;
    let coarse = [1.0 / 100.0, 1.0 / 200.0, 1.0 / 400.0];
    let mut errors = [0.0; 3];
    let paths = 200;
    for i in 0..paths {
        let mut rng = RandomStream::new(77, i).rng();
        let fine: Vec<f64> = (0..6400).map(|_| rng.sample(StandardNormal)).collect();
        let start = DiffusionState::new(0.5, -0.5);
        let reference = *euler_maruyama(start, &p, fine_dt, &noise, fine.iter().copied()).last().unwrap();
        for (slot, dt) in coarse.iter().enumerate() {
            let k = (dt / fine_dt).round() as usize;
            let agg = fine.chunks(k).map(|c| c.iter().sum::<f64>() / (k as f64).sqrt());
            let end = *euler_maruyama(start, &p, *dt, &noise, agg).last().unwrap();
            errors[slot] += ((end.y_hat - reference.y_hat).powi(2) + (end.x_hat - reference.x_hat).powi(2)).sqrt();
        }
    }
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.6..2.6).contains(&ratio), "error ratio {ratio} ({errors:?})");
    }
    let spec = spectral_decompose(&p).unwrap();
    assert!(mean_closed_form(Vec2::new(0.5, -0.5), 1.0, &spec).norm() < 1.0);
}
