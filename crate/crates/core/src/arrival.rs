//! Fluid-scale customer arrival rate functions `λ(t)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::params::ModelError;

/// A nonnegative, locally bounded arrival rate with finitely many jumps.
///
/// Piecewise-constant rates are right-continuous: `values[0]` holds on
/// `[0, breakpoints[0])`, `values[i]` on `[breakpoints[i-1], breakpoints[i])`,
/// and the last value from the final breakpoint onwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrivalRateFn {
    Constant {
        base: f64,
    },
    Sinusoid {
        base: f64,
        amplitude: f64,
        period: f64,
    },
    #[serde(rename = "piecewise")]
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
}

impl ArrivalRateFn {
    /// `λ(t) = base + amplitude * sin(2πt / period)`.
    pub fn sinusoid(base: f64, amplitude: f64, period: f64) -> Self {
        Self::Sinusoid {
            base,
            amplitude,
            period,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidArrival(msg));
        match self {
            Self::Constant { base } => {
                if !(base.is_finite() && *base >= 0.0) {
                    return bad(format!("constant rate {base} must be finite and >= 0"));
                }
            }
            Self::Sinusoid {
                base,
                amplitude,
                period,
            } => {
                if !(base.is_finite() && amplitude.is_finite() && period.is_finite()) {
                    return bad("sinusoid fields must be finite".into());
                }
                if *period <= 0.0 {
                    return bad(format!("period {period} must be > 0"));
                }
                if base - amplitude.abs() < 0.0 {
                    return bad(format!("sinusoid goes negative: base {base}, amplitude {amplitude}"));
                }
            }
            Self::PiecewiseConstant {
                breakpoints,
                values,
            } => {
                if values.len() != breakpoints.len() + 1 {
                    return bad(format!(
                        "{} breakpoints need {} values, got {}",
                        breakpoints.len(),
                        breakpoints.len() + 1,
                        values.len()
                    ));
                }
                if breakpoints.iter().any(|b| !b.is_finite() || *b <= 0.0)
                    || breakpoints.windows(2).any(|w| w[1] <= w[0])
                {
                    return bad("breakpoints must be positive and strictly increasing".into());
                }
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return bad("piecewise values must be finite and >= 0".into());
                }
            }
        }
        Ok(())
    }

    pub fn rate(&self, t: f64) -> f64 {
        match self {
            Self::Constant { base } => *base,
            Self::Sinusoid {
                base,
                amplitude,
                period,
            } => base + amplitude * (TAU * t / period).sin(),
            Self::PiecewiseConstant {
                breakpoints,
                values,
            } => values[breakpoints.partition_point(|b| *b <= t)],
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Self::Constant { .. } => true,
            Self::Sinusoid { amplitude, .. } => *amplitude == 0.0,
            Self::PiecewiseConstant { values, .. } => values.windows(2).all(|w| w[0] == w[1]),
        }
    }

    /// A bound on `λ(t)` valid for all `t ≥ 0`; used for thinning.
    pub fn upper_bound(&self) -> f64 {
        match self {
            Self::Constant { base } => *base,
            Self::Sinusoid {
                base, amplitude, ..
            } => base + amplitude.abs(),
            Self::PiecewiseConstant { values, .. } => values.iter().copied().fold(0.0, f64::max),
        }
    }

    /// Jump times of `λ(·)` strictly inside `(from, to)`, ascending.
    pub fn jumps_between(&self, from: f64, to: f64) -> Vec<f64> {
        match self {
            Self::PiecewiseConstant { breakpoints, .. } => breakpoints
                .iter()
                .copied()
                .filter(|b| *b > from && *b < to)
                .collect(),
            _ => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoid_matches_the_closed_form() {
        let f = ArrivalRateFn::sinusoid(1.0, 0.2, 120.0);
        assert!((f.rate(0.0) - 1.0).abs() < 1e-15);
        assert!((f.rate(30.0) - 1.2).abs() < 1e-12);
        assert!((f.rate(90.0) - 0.8).abs() < 1e-12);
        assert!((f.upper_bound() - 1.2).abs() < 1e-15);
        assert!(f.validate().is_ok());
    }

    #[test]
    fn piecewise_is_right_continuous() {
        let f = ArrivalRateFn::PiecewiseConstant {
            breakpoints: vec![10.0, 20.0],
            values: vec![1.0, 2.0, 0.5],
        };
        f.validate().unwrap();
        assert_eq!(f.rate(0.0), 1.0);
        assert_eq!(f.rate(9.999), 1.0);
        assert_eq!(f.rate(10.0), 2.0);
        assert_eq!(f.rate(25.0), 0.5);
        assert_eq!(f.upper_bound(), 2.0);
        assert_eq!(f.jumps_between(0.0, 15.0), vec![10.0]);
        assert_eq!(f.jumps_between(10.0, 30.0), vec![20.0]);
    }

    #[test]
    fn invalid_shapes_are_rejected() {
        assert!(ArrivalRateFn::sinusoid(0.1, 0.2, 120.0).validate().is_err());
        assert!(ArrivalRateFn::sinusoid(1.0, 0.2, 0.0).validate().is_err());
        assert!(ArrivalRateFn::Constant { base: -1.0 }.validate().is_err());
        let wrong_len = ArrivalRateFn::PiecewiseConstant {
            breakpoints: vec![1.0],
            values: vec![1.0],
        };
        assert!(wrong_len.validate().is_err());
        let unsorted = ArrivalRateFn::PiecewiseConstant {
            breakpoints: vec![2.0, 1.0],
            values: vec![1.0, 1.0, 1.0],
        };
        assert!(unsorted.validate().is_err());
    }

    #[test]
    fn json_tags() {
        let f: ArrivalRateFn = serde_json::from_str(
            r#"{"kind": "piecewise", "breakpoints": [5.0], "values": [1.0, 3.0]}"#,
        )
        .unwrap();
        assert_eq!(f.rate(6.0), 3.0);
        let c: ArrivalRateFn = serde_json::from_str(r#"{"kind": "constant", "base": 1.5}"#).unwrap();
        assert!(c.is_constant());
    }
}
