//! Spectral decomposition of the interior fluid dynamics and the star norm.
//!
//! Away from the boundary the centered fluid state evolves as the row-vector
//! ODE `(y, x)' = (y, x) A` with
//!
//! ```text
//! A = [ 0    -ε  ]
//!     [ β   -γβ  ]
//! ```
//!
//! Under `0 < ε < γ²β/4`, `A` has eigenvalues `-ν₂ < -ν₁ < 0` with left
//! eigenvectors `vᵢ = (β/νᵢ, -1)`. The star norm of `u` is the Euclidean
//! norm of its coordinates in the basis `{v₁, v₂}`.

use nalgebra::{Matrix2, RowVector2};
use serde::{Deserialize, Serialize};

use crate::params::{ModelError, ModelParams};

pub type Vec2 = RowVector2<f64>;
pub type Mat2 = Matrix2<f64>;

/// The interior drift matrix `A`.
pub fn fluid_matrix(params: &ModelParams) -> Mat2 {
    Mat2::new(
        0.0,
        -params.epsilon,
        params.beta,
        -params.gamma * params.beta,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    /// Slow eigen-magnitude.
    pub nu1: f64,
    /// Fast eigen-magnitude.
    pub nu2: f64,
    /// `β/ν₁`.
    pub a1: f64,
    /// `β/ν₂`.
    pub a2: f64,
    pub v1: Vec2,
    pub v2: Vec2,
    /// Rows `v₁`, `v₂`.
    pub basis: Mat2,
    pub basis_inv: Mat2,
    /// The matrix `A` the data was computed from.
    pub matrix: Mat2,
}

/// Roots of `ν² − γβν + εβ = 0`.
///
/// The larger root comes from the quadratic formula and the smaller one from
/// the product `ν₁ν₂ = εβ`, which avoids cancellation when `ε ≪ γ²β/4`.
pub fn spectral_decompose(params: &ModelParams) -> Result<SpectralData, ModelError> {
    let trace = params.gamma * params.beta;
    let product = params.epsilon * params.beta;
    let disc = trace * trace - 4.0 * product;
    if !(disc > 0.0) {
        return Err(ModelError::RepeatedEigenvalue(disc));
    }
    let nu2 = 0.5 * (trace + disc.sqrt());
    let nu1 = product / nu2;
    let a1 = params.beta / nu1;
    let a2 = params.beta / nu2;
    let v1 = Vec2::new(a1, -1.0);
    let v2 = Vec2::new(a2, -1.0);
    let basis = Mat2::new(a1, -1.0, a2, -1.0);
    // det = a2 - a1 < 0, never zero when ν₁ ≠ ν₂
    let det = a2 - a1;
    let basis_inv = Mat2::new(-1.0, 1.0, -a2, a1) / det;
    Ok(SpectralData {
        nu1,
        nu2,
        a1,
        a2,
        v1,
        v2,
        basis,
        basis_inv,
        matrix: fluid_matrix(params),
    })
}

impl SpectralData {
    /// Coordinates `(α₁, α₂)` with `u = α₁v₁ + α₂v₂`.
    pub fn star_coords(&self, u: Vec2) -> (f64, f64) {
        let alpha = u * self.basis_inv;
        (alpha[0], alpha[1])
    }

    /// `α₁v₁ + α₂v₂`.
    pub fn from_coords(&self, alpha1: f64, alpha2: f64) -> Vec2 {
        self.v1 * alpha1 + self.v2 * alpha2
    }

    pub fn star_norm(&self, u: Vec2) -> f64 {
        let (a1, a2) = self.star_coords(u);
        a1.hypot(a2)
    }

    /// Constants `(c₁, c₂)` with `c₁‖u‖ ≤ ‖u‖* ≤ c₂‖u‖`: `1/‖B‖₂` and `‖B⁻¹‖₂`.
    pub fn norm_equivalence(&self) -> (f64, f64) {
        let sv = self.basis.singular_values();
        let sv_inv = self.basis_inv.singular_values();
        (1.0 / sv.max(), sv_inv.max())
    }

    /// `e^{At} = B⁻¹ diag(e^{-ν₁t}, e^{-ν₂t}) B`, so that `u(t) = u(0) e^{At}`.
    pub fn propagator(&self, t: f64) -> Mat2 {
        let decay = Mat2::new((-self.nu1 * t).exp(), 0.0, 0.0, (-self.nu2 * t).exp());
        self.basis_inv * decay * self.basis
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Bisection on `ν² − γβν + εβ` over a bracket, independent of the
    /// closed-form roots.
    fn bisect_root(p: &ModelParams, mut lo: f64, mut hi: f64) -> f64 {
        let f = |nu: f64| nu * nu - p.gamma * p.beta * nu + p.epsilon * p.beta;
        let flo = f(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn reference() -> ModelParams {
        ModelParams::reference()
    }

    #[test]
    fn reference_eigenvalues_match_bisection() {
        let p = reference();
        let s = spectral_decompose(&p).unwrap();
        // the vertex of the parabola is at γβ/2 = 1
        let nu1 = bisect_root(&p, 0.0, 1.0);
        let nu2 = bisect_root(&p, 1.0, 2.0);
        assert!((nu1 - 0.105_572_809).abs() < 1e-8);
        assert!((nu2 - 1.894_427_191).abs() < 1e-8);
        assert!((s.nu1 - nu1).abs() < 1e-13);
        assert!((s.nu2 - nu2).abs() < 1e-13);
        assert!((s.a1 - 9.472_135_955).abs() < 1e-8);
        assert!((s.a2 - 0.527_864_045).abs() < 1e-8);
    }

    #[test]
    fn star_coords_examples() {
        let s = spectral_decompose(&reference()).unwrap();
        let (a, b) = s.star_coords(s.v1);
        assert!((a - 1.0).abs() < 1e-14 && b.abs() < 1e-14);
        assert_eq!(s.star_coords(Vec2::zeros()), (0.0, 0.0));
        // solve u = αB by hand: α₁ + α₂ = -2, α₁a₁ + α₂a₂ = 0
        let (a1, a2) = s.star_coords(Vec2::new(0.0, 2.0));
        let expect2 = 2.0 * s.a1 / (s.a2 - s.a1);
        assert!((a2 - expect2).abs() < 1e-12);
        assert!((a1 - 0.118_034).abs() < 1e-6);
        assert!((a2 + 2.118_034).abs() < 1e-6);
    }

    #[test]
    fn star_norm_examples() {
        let s = spectral_decompose(&reference()).unwrap();
        assert_eq!(s.star_norm(Vec2::zeros()), 0.0);
        assert!((s.star_norm(s.v2) - 1.0).abs() < 1e-14);
        let u = Vec2::new(0.3, -1.7);
        assert!((s.star_norm(u * 3.0) - 3.0 * s.star_norm(u)).abs() < 1e-12);
    }

    #[test]
    fn propagator_matches_eigen_decay() {
        let s = spectral_decompose(&reference()).unwrap();
        let t = 2.5;
        let got = s.v1 * s.propagator(t);
        let want = s.v1 * (-s.nu1 * t).exp();
        assert!((got - want).norm() < 1e-13);
        assert!((s.propagator(0.0) - Mat2::identity()).norm() < 1e-13);
    }

    #[test]
    fn tiny_epsilon_keeps_relative_accuracy() {
        let p = ModelParams {
            epsilon: 1e-12,
            ..reference()
        };
        let s = spectral_decompose(&p).unwrap();
        assert!(((s.nu1 * s.nu2) / (p.epsilon * p.beta) - 1.0).abs() < 1e-12);
        assert!(((s.nu1 + s.nu2) / (p.gamma * p.beta) - 1.0).abs() < 1e-12);
    }

    fn valid_params() -> impl Strategy<Value = ModelParams> {
        (0.1f64..10.0, 0.05f64..5.0, 0.2f64..5.0, 0.001f64..0.999).prop_map(
            |(lambda, beta, gamma, frac)| ModelParams {
                lambda,
                scale_r: 100.0,
                beta,
                beta_tilde: 0.0,
                gamma,
                epsilon: frac * gamma * gamma * beta / 4.0,
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn spectral_identities_hold(p in valid_params()) {
            let s = spectral_decompose(&p).unwrap();
            prop_assert!(s.nu1 > 0.0 && s.nu1 < s.nu2);
            prop_assert!(s.a1 > s.a2 && s.a2 > 0.0);
            prop_assert!(((s.nu1 * s.nu2) / (p.epsilon * p.beta) - 1.0).abs() < 1e-12);
            prop_assert!(((s.nu1 + s.nu2) / (p.gamma * p.beta) - 1.0).abs() < 1e-12);
            let a = fluid_matrix(&p);
            for (v, nu) in [(s.v1, s.nu1), (s.v2, s.nu2)] {
                let residual = (v * a + v * nu).norm() / v.norm().max(1.0);
                prop_assert!(residual <= 1e-12, "residual {residual}");
            }
            let id = s.basis * s.basis_inv;
            prop_assert!((id - Mat2::identity()).abs().max() <= 1e-12);
        }

        #[test]
        fn star_coords_reconstruct(p in valid_params(), y in -50.0f64..50.0, x in -50.0f64..50.0) {
            let s = spectral_decompose(&p).unwrap();
            let u = Vec2::new(y, x);
            let (a1, a2) = s.star_coords(u);
            let back = s.from_coords(a1, a2);
            prop_assert!((back - u).norm() <= 1e-10 * u.norm().max(1.0));
        }

        #[test]
        fn star_norm_is_a_norm(
            p in valid_params(),
            u in (-20.0f64..20.0, -20.0f64..20.0),
            w in (-20.0f64..20.0, -20.0f64..20.0),
            c in -5.0f64..5.0,
        ) {
            let s = spectral_decompose(&p).unwrap();
            let u = Vec2::new(u.0, u.1);
            let w = Vec2::new(w.0, w.1);
            let nu = s.star_norm(u);
            prop_assert!((s.star_norm(u * c) - c.abs() * nu).abs() <= 1e-10 * nu.max(1.0) * c.abs().max(1.0));
            prop_assert!(s.star_norm(u + w) <= nu + s.star_norm(w) + 1e-10 * (nu + s.star_norm(w)).max(1.0));
            let (c1, c2) = s.norm_equivalence();
            prop_assert!(c1 * u.norm() <= nu * (1.0 + 1e-10) + 1e-12);
            prop_assert!(nu <= c2 * u.norm() * (1.0 + 1e-10) + 1e-12);
        }
    }
}
