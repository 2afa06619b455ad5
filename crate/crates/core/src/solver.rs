//! Deterministic accelerated proximal gradient, used as ground truth.

use crate::error::{Error, Result};
use crate::problem::{CompositeProblem, Optimum};
use crate::RealVector;

pub const DEFAULT_MAX_ITERS: usize = 1_000_000;

/// Default stopping tolerance `1e-10 (1 + |x0|)`.
pub fn default_tol(x0: &RealVector) -> f64 {
    1e-10 * (1.0 + x0.norm())
}

/// The smooth part being minimized together with `h`: `f` plus an optional
/// proximal shift `|x - center|^2 / (2 lambda)`.
struct Shifted<'a> {
    problem: &'a CompositeProblem,
    shift: Option<(&'a RealVector, f64)>,
}

impl Shifted<'_> {
    fn gradient(&self, x: &RealVector) -> RealVector {
        let g = self.problem.grad_f(x);
        match self.shift {
            Some((c, lambda)) => g + (x - c) / lambda,
            None => g,
        }
    }

    /// `(strong convexity, smoothness)` of the smooth part.
    fn moduli(&self) -> (f64, f64) {
        let extra = self.shift.map_or(0.0, |(_, lambda)| 1.0 / lambda);
        (self.problem.mu() + extra, self.problem.lipschitz() + extra)
    }

    fn prox_step(&self, x: &RealVector, step: f64) -> Result<RealVector> {
        self.problem
            .regularizer()
            .prox(&(x - self.gradient(x) * step), step)
    }
}

/// Gradient-mapping residual `|x - prox(x - t grad, t)|` with `t = 1/M`.
fn residual(obj: &Shifted<'_>, x: &RealVector) -> Result<f64> {
    let (_, smooth) = obj.moduli();
    Ok((x - obj.prox_step(x, 1.0 / smooth)?).norm())
}

fn accelerated(obj: &Shifted<'_>, start: &RealVector, tol: f64, max_iters: usize) -> Result<RealVector> {
    let (m, big_m) = obj.moduli();
    let step = 1.0 / big_m;
    let beta = (big_m.sqrt() - m.sqrt()) / (big_m.sqrt() + m.sqrt());
    let mut x = obj.problem.regularizer().prox(start, step)?;
    let mut y = x.clone();
    let mut last_res = f64::INFINITY;
    for _ in 0..max_iters {
        let x_next = obj.prox_step(&y, step)?;
        last_res = residual(obj, &x_next)?;
        // gradient restart: drop momentum when it opposes the step
        y = if (&y - &x_next).dot(&(&x_next - &x)) > 0.0 {
            x_next.clone()
        } else {
            &x_next + (&x_next - &x) * beta
        };
        x = x_next;
        if last_res <= tol {
            return Ok(x);
        }
    }
    Err(Error::Numeric {
        message: format!("accelerated proximal gradient did not reach tolerance {tol:.3e} in {max_iters} iterations"),
        residual: last_res,
    })
}

/// Exact proximal point `argmin phi(x) + |x - x0|^2 / (2 lambda)`.
///
/// Stops when the gradient-mapping residual with step `1/(L + 1/lambda)` is at most `tol`.
pub fn exact_prox_point(
    problem: &CompositeProblem,
    x0: &RealVector,
    lambda: f64,
    tol: f64,
) -> Result<RealVector> {
    exact_prox_point_capped(problem, x0, lambda, tol, DEFAULT_MAX_ITERS)
}

pub fn exact_prox_point_capped(
    problem: &CompositeProblem,
    x0: &RealVector,
    lambda: f64,
    tol: f64,
    max_iters: usize,
) -> Result<RealVector> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Validation(format!("lambda must be positive, got {lambda}")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Validation(format!("tolerance must be positive, got {tol}")));
    }
    if x0.len() != problem.dim() || x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("prox center must be finite with the problem dimension".into()));
    }
    let obj = Shifted {
        problem,
        shift: Some((x0, lambda)),
    };
    accelerated(&obj, x0, tol, max_iters)
}

/// Minimizer and minimum of `phi` itself.
pub fn minimize_phi(problem: &CompositeProblem, start: &RealVector, tol: f64) -> Result<Optimum> {
    let obj = Shifted { problem, shift: None };
    let x = accelerated(&obj, start, tol, DEFAULT_MAX_ITERS)?;
    let value = problem.evaluate_phi(&x);
    Ok(Optimum { x, value })
}
