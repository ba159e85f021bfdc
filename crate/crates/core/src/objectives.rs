//! Campaign objectives evaluated on final opinions.
//!
//! | objective          | r(θ)                      | ∂r/∂θ_i               |
//! |--------------------|---------------------------|-----------------------|
//! | `MaximizeMean`     | mean(θ)                   | 1/|V|                 |
//! | `MaximizeVariance` | Σ(θ_i − μ)²/(|V|−1)       | 2(θ_i − μ)/(|V|−1)    |
//! | `MinimizeVariance` | −Σ(θ_i − μ)²/(|V|−1)      | −2(θ_i − μ)/(|V|−1)   |
//!
//! The variance gradient holds μ fixed, but it is also the exact derivative:
//! the ∂μ/∂θ_i cross term is proportional to Σ_j(θ_j − μ), which is zero.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectiveKind {
    #[serde(rename = "max_mean")]
    MaximizeMean,
    #[serde(rename = "max_var")]
    MaximizeVariance,
    #[serde(rename = "min_var")]
    MinimizeVariance,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 3] = [
        ObjectiveKind::MaximizeMean,
        ObjectiveKind::MaximizeVariance,
        ObjectiveKind::MinimizeVariance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObjectiveKind::MaximizeMean => "max_mean",
            ObjectiveKind::MaximizeVariance => "max_var",
            ObjectiveKind::MinimizeVariance => "min_var",
        }
    }

    pub fn evaluate(self, theta: &[f64]) -> Result<f64> {
        evaluate(self, theta)
    }

    pub fn gradient(self, theta: &[f64]) -> Result<Vec<f64>> {
        gradient(self, theta)
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max_mean" => Ok(ObjectiveKind::MaximizeMean),
            "max_var" => Ok(ObjectiveKind::MaximizeVariance),
            "min_var" => Ok(ObjectiveKind::MinimizeVariance),
            other => Err(Error::InvalidParameter(format!(
                "unknown objective {other:?} (expected max_mean, max_var or min_var)"
            ))),
        }
    }
}

pub fn mean(theta: &[f64]) -> f64 {
    theta.iter().sum::<f64>() / theta.len() as f64
}

/// Unbiased sample variance; needs at least two values.
pub fn sample_variance(theta: &[f64]) -> Result<f64> {
    if theta.len() < 2 {
        return Err(Error::InvalidParameter(
            "variance needs at least two opinions".into(),
        ));
    }
    let mu = mean(theta);
    Ok(theta.iter().map(|t| (t - mu) * (t - mu)).sum::<f64>() / (theta.len() - 1) as f64)
}

pub fn evaluate(kind: ObjectiveKind, theta: &[f64]) -> Result<f64> {
    if theta.is_empty() {
        return Err(Error::InvalidParameter("objective of an empty network".into()));
    }
    match kind {
        ObjectiveKind::MaximizeMean => Ok(mean(theta)),
        ObjectiveKind::MaximizeVariance => sample_variance(theta),
        ObjectiveKind::MinimizeVariance => sample_variance(theta).map(|v| -v),
    }
}

pub fn gradient(kind: ObjectiveKind, theta: &[f64]) -> Result<Vec<f64>> {
    let n = theta.len();
    if n == 0 {
        return Err(Error::InvalidParameter("objective of an empty network".into()));
    }
    match kind {
        ObjectiveKind::MaximizeMean => Ok(vec![1.0 / n as f64; n]),
        ObjectiveKind::MaximizeVariance | ObjectiveKind::MinimizeVariance => {
            if n < 2 {
                return Err(Error::InvalidParameter(
                    "variance needs at least two opinions".into(),
                ));
            }
            let mu = mean(theta);
            let scale = 2.0 / (n - 1) as f64;
            let sign = if kind == ObjectiveKind::MaximizeVariance { 1.0 } else { -1.0 };
            Ok(theta.iter().map(|t| sign * scale * (t - mu)).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn evaluate_examples() {
        let th = [0.90, 0.92, 0.94, 0.96];
        assert!((evaluate(ObjectiveKind::MaximizeMean, &th).unwrap() - 0.93).abs() < 1e-15);
        assert!((evaluate(ObjectiveKind::MaximizeVariance, &th).unwrap() - 0.002 / 3.0).abs() < 1e-15);
        assert_eq!(evaluate(ObjectiveKind::MinimizeVariance, &[0.3; 5]).unwrap(), 0.0);
        assert!(evaluate(ObjectiveKind::MaximizeVariance, &[0.3]).is_err());
        assert!(gradient(ObjectiveKind::MinimizeVariance, &[0.3]).is_err());
        assert_eq!(evaluate(ObjectiveKind::MaximizeMean, &[0.3]).unwrap(), 0.3);
    }

    #[test]
    fn gradient_examples() {
        let g = gradient(ObjectiveKind::MaximizeMean, &[0.5; 10]).unwrap();
        assert!(g.iter().all(|&v| v == 0.1));
        assert_eq!(gradient(ObjectiveKind::MaximizeVariance, &[0.0, 1.0]).unwrap(), vec![-1.0, 1.0]);
        assert_eq!(gradient(ObjectiveKind::MinimizeVariance, &[0.0, 1.0]).unwrap(), vec![1.0, -1.0]);
    }

    #[test]
    fn names_round_trip() {
        for k in ObjectiveKind::ALL {
            assert_eq!(k.name().parse::<ObjectiveKind>().unwrap(), k);
        }
        assert!("median".parse::<ObjectiveKind>().is_err());
    }

    fn central_difference(kind: ObjectiveKind, theta: &[f64], i: usize, h: f64) -> f64 {
        let mut up = theta.to_vec();
        let mut dn = theta.to_vec();
        up[i] += h;
        dn[i] -= h;
        (evaluate(kind, &up).unwrap() - evaluate(kind, &dn).unwrap()) / (2.0 * h)
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(theta in prop::collection::vec(0.0f64..1.0, 2..12)) {
            for kind in ObjectiveKind::ALL {
                let g = gradient(kind, &theta).unwrap();
                let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
                for (i, &gi) in g.iter().enumerate() {
                    let fd = central_difference(kind, &theta, i, 1e-6);
                    prop_assert!((fd - gi).abs() <= 1e-6 * scale.max(gi.abs()),
                        "{kind} i={i} fd={fd} g={gi}");
                }
            }
        }

        #[test]
        fn min_var_gradient_is_negated_max_var(theta in prop::collection::vec(0.0f64..1.0, 2..12)) {
            let a = gradient(ObjectiveKind::MaximizeVariance, &theta).unwrap();
            let b = gradient(ObjectiveKind::MinimizeVariance, &theta).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!(*x, -*y);
            }
        }

        #[test]
        fn mean_gradient_ignores_theta(theta in prop::collection::vec(0.0f64..1.0, 1..12)) {
            let g = gradient(ObjectiveKind::MaximizeMean, &theta).unwrap();
            prop_assert!(g.iter().all(|&v| v == 1.0 / theta.len() as f64));
        }
    }
}
