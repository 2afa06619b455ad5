//! Prox-friendly convex regularizers `h`.

use crate::error::{validate, Error, Result};
use crate::RealVector;
use std::fmt;
use std::sync::Arc;

/// Relative slack used when deciding whether a point lies in `dom h`.
pub const DOMAIN_TOL: f64 = 1e-9;

/// User-supplied regularizer.
pub trait CustomRegularizer: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    /// `h(x)`, `+inf` outside the domain.
    fn value(&self, x: &RealVector) -> f64;
    /// `argmin_u h(u) + |u - y|^2 / (2t)`. The default reports the capability as missing.
    fn prox(&self, _y: &RealVector, _t: f64) -> Result<RealVector> {
        Err(Error::Capability(format!(
            "custom regularizer `{}` has no proximal mapping",
            self.name()
        )))
    }
    /// Diameter of `dom h`, if bounded.
    fn diameter(&self, _dim: usize) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegularizerKind {
    Zero,
    BallIndicator,
    L1,
    L1PlusBox,
    Custom,
}

#[derive(Debug, Clone)]
pub enum Regularizer {
    /// `h = 0`.
    Zero,
    /// Indicator of the Euclidean ball `{x : |x - center| <= radius}`.
    Ball { center: RealVector, radius: f64 },
    /// `weight * |x|_1`.
    L1 { weight: f64 },
    /// `weight * |x|_1` plus the indicator of the box `[lower, upper]^d`.
    L1Box { weight: f64, lower: f64, upper: f64 },
    Custom(Arc<dyn CustomRegularizer>),
}

impl Regularizer {
    pub fn ball(center: RealVector, radius: f64) -> Result<Self> {
        validate(radius > 0.0 && radius.is_finite(), || {
            format!("ball radius must be positive and finite, got {radius}")
        })?;
        validate(center.iter().all(|c| c.is_finite()), || "ball center must be finite".into())?;
        Ok(Regularizer::Ball { center, radius })
    }

    pub fn l1(weight: f64) -> Result<Self> {
        validate(weight >= 0.0 && weight.is_finite(), || {
            format!("l1 weight must be nonnegative, got {weight}")
        })?;
        Ok(Regularizer::L1 { weight })
    }

    pub fn l1_box(weight: f64, lower: f64, upper: f64) -> Result<Self> {
        validate(weight >= 0.0 && weight.is_finite(), || {
            format!("l1 weight must be nonnegative, got {weight}")
        })?;
        validate(lower < upper && lower.is_finite() && upper.is_finite(), || {
            format!("box bounds must satisfy lower < upper, got [{lower}, {upper}]")
        })?;
        Ok(Regularizer::L1Box { weight, lower, upper })
    }

    pub fn kind(&self) -> RegularizerKind {
        match self {
            Regularizer::Zero => RegularizerKind::Zero,
            Regularizer::Ball { .. } => RegularizerKind::BallIndicator,
            Regularizer::L1 { .. } => RegularizerKind::L1,
            Regularizer::L1Box { .. } => RegularizerKind::L1PlusBox,
            Regularizer::Custom(_) => RegularizerKind::Custom,
        }
    }

    /// `h(x)`; `+inf` when `x` is outside `dom h`.
    pub fn value(&self, x: &RealVector) -> f64 {
        match self {
            Regularizer::Zero => 0.0,
            Regularizer::Ball { center, radius } => {
                if (x - center).norm() <= radius * (1.0 + DOMAIN_TOL) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Regularizer::L1 { weight } => weight * x.lp_norm(1),
            Regularizer::L1Box { weight, lower, upper } => {
                let slack = DOMAIN_TOL * (1.0 + lower.abs().max(upper.abs()));
                if x.iter().all(|&v| v >= lower - slack && v <= upper + slack) {
                    weight * x.lp_norm(1)
                } else {
                    f64::INFINITY
                }
            }
            Regularizer::Custom(c) => c.value(x),
        }
    }

    pub fn contains(&self, x: &RealVector) -> bool {
        x.iter().all(|v| v.is_finite()) && self.value(x).is_finite()
    }

    /// Diameter of `dom h` in dimension `dim`; `None` when the domain is unbounded.
    pub fn diameter(&self, dim: usize) -> Option<f64> {
        match self {
            Regularizer::Zero | Regularizer::L1 { .. } => None,
            Regularizer::Ball { radius, .. } => Some(2.0 * radius),
            Regularizer::L1Box { lower, upper, .. } => Some((upper - lower) * (dim as f64).sqrt()),
            Regularizer::Custom(c) => c.diameter(dim),
        }
    }

    /// Proximal mapping `argmin_x h(x) + |x - y|^2 / (2t)`.
    pub fn prox(&self, y: &RealVector, t: f64) -> Result<RealVector> {
        validate(t > 0.0 && t.is_finite(), || format!("prox step must be positive, got {t}"))?;
        validate(y.iter().all(|v| v.is_finite()), || "prox input has non-finite entries".into())?;
        let out = match self {
            Regularizer::Zero => y.clone(),
            Regularizer::Ball { center, radius } => {
                let diff = y - center;
                let norm = diff.norm();
                if norm <= *radius {
                    y.clone()
                } else {
                    center + diff * (radius / norm)
                }
            }
            Regularizer::L1 { weight } => y.map(|v| soft_threshold(v, weight * t)),
            Regularizer::L1Box { weight, lower, upper } => {
                y.map(|v| soft_threshold(v, weight * t).clamp(*lower, *upper))
            }
            Regularizer::Custom(c) => c.prox(y, t)?,
        };
        Ok(out)
    }
}

/// `sign(v) * max(|v| - k, 0)`.
#[inline]
pub fn soft_threshold(v: f64, k: f64) -> f64 {
    if v > k {
        v - k
    } else if v < -k {
        v + k
    } else {
        0.0
    }
}
