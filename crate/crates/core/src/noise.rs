//! Additive gradient noise models with calibrated second moment.
//!
//! Every additive family is zero mean and scaled so that `E|xi|^2 = sigma^2`
//! regardless of the dimension. The finite-sum family does not add noise:
//! the oracle samples one component gradient instead.

use crate::error::{validate, Result};
use crate::problem::CompositeProblem;
use crate::RealVector;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseFamily {
    Gaussian,
    /// Multivariate Student-t with `nu > 2` degrees of freedom.
    StudentT { nu: f64 },
    /// Independent signs `+-sigma/sqrt(d)` per coordinate.
    Rademacher,
    /// Uniform on the sphere of radius `sigma`.
    Sphere,
    /// Uniform sampling of one component of a finite-sum `f`.
    FiniteSum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    family: NoiseFamily,
    sigma: f64,
    student: Option<ChiSquared<f64>>,
}

impl NoiseModel {
    pub fn new(family: NoiseFamily, sigma: f64) -> Result<Self> {
        validate(sigma >= 0.0 && sigma.is_finite(), || {
            format!("sigma must be finite and nonnegative, got {sigma}")
        })?;
        let student = match family {
            NoiseFamily::StudentT { nu } => {
                validate(nu > 2.0 && nu.is_finite(), || {
                    format!("student-t needs nu > 2 for finite variance, got {nu}")
                })?;
                Some(ChiSquared::new(nu).map_err(|e| crate::Error::Validation(e.to_string()))?)
            }
            _ => None,
        };
        Ok(Self {
            family,
            sigma,
            student,
        })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(NoiseFamily::Gaussian, sigma)
    }

    pub fn student_t(nu: f64, sigma: f64) -> Result<Self> {
        Self::new(NoiseFamily::StudentT { nu }, sigma)
    }

    pub fn noiseless() -> Self {
        Self::new(NoiseFamily::Gaussian, 0.0).expect("zero sigma is valid")
    }

    /// Finite-sum sampling with `sigma` estimated at `x0` by
    /// [`estimate_finite_sum_sigma`].
    pub fn finite_sum(problem: &CompositeProblem, x0: &RealVector) -> Result<Self> {
        let sigma = estimate_finite_sum_sigma(problem, x0)?;
        Self::new(NoiseFamily::FiniteSum, sigma)
    }

    pub fn family(&self) -> NoiseFamily {
        self.family
    }

    /// Bound on `sqrt(E|s(x, xi) - grad f(x)|^2)`.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn is_additive(&self) -> bool {
        self.family != NoiseFamily::FiniteSum
    }

    /// One additive perturbation in dimension `dim`. Zero for finite-sum noise.
    pub fn draw<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> RealVector {
        if self.sigma == 0.0 || dim == 0 {
            return RealVector::zeros(dim);
        }
        let d = dim as f64;
        match self.family {
            NoiseFamily::Gaussian => {
                let s = self.sigma / d.sqrt();
                RealVector::from_fn(dim, |_, _| s * rng.sample::<f64, _>(StandardNormal))
            }
            NoiseFamily::StudentT { nu } => {
                // Z * sqrt(nu / W) has covariance nu/(nu-2) I.
                let s = self.sigma * ((nu - 2.0) / (nu * d)).sqrt();
                let w = self.student.as_ref().expect("built in new").sample(rng);
                let scale = s * (nu / w).sqrt();
                RealVector::from_fn(dim, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
            }
            NoiseFamily::Rademacher => {
                let s = self.sigma / d.sqrt();
                RealVector::from_fn(dim, |_, _| if rng.random_bool(0.5) { s } else { -s })
            }
            NoiseFamily::Sphere => {
                let z = RealVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                let n = z.norm();
                if n == 0.0 {
                    let mut e = RealVector::zeros(dim);
                    e[0] = self.sigma;
                    e
                } else {
                    z * (self.sigma / n)
                }
            }
            NoiseFamily::FiniteSum => RealVector::zeros(dim),
        }
    }
}

/// Root mean squared deviation of component gradients from the full gradient
/// at `x0`, computed over the whole component pool.
pub fn estimate_finite_sum_sigma(problem: &CompositeProblem, x0: &RealVector) -> Result<f64> {
    let fs = problem.smooth().finite_sum().ok_or_else(|| {
        crate::Error::Capability("finite-sum noise requires a finite-sum smooth part".into())
    })?;
    let full = problem.grad_f(x0);
    let total: f64 = (0..fs.len())
        .map(|i| (fs.component_gradient(i, x0) - &full).norm_squared())
        .sum();
    Ok((total / fs.len() as f64).sqrt())
}
