//! Proximal subproblem solver.
//!
//! Approximately solves `min phi(x) + |x - x0|^2 / (2 lambda)` from `I + 1`
//! stochastic gradients. Each inner step keeps an exponentially averaged
//! gradient `S_i`, takes the anchored prox step
//! `x_i = prox_{lambda h}(x0 - lambda S_i)` and averages the iterates into `y_i`
//! with the same weight `alpha`:
//!
//! ```text
//! S_1 = s_0,   S_i = alpha S_{i-1} + (1 - alpha) s_{i-1}
//! y_1 = x_1,   y_i = alpha y_{i-1} + (1 - alpha) x_i
//! ```
//!
//! where `s_{i-1}` is a fresh stochastic gradient at `x_{i-1}`. The output is
//! the pair `(x_{I+1}, y_{I+1})`.

use crate::error::{validate, Result};
use crate::oracle::Oracle;
use crate::rng::RngStream;
use crate::RealVector;
use log::warn;

/// Smallest averaging weight covered by the expected-gap bound:
/// `(I/2 + lambda L) / (1 + I/2 + lambda L)`.
pub fn alpha_floor(inner_iters: usize, lambda: f64, lipschitz: f64) -> f64 {
    let a = inner_iters as f64 / 2.0 + lambda * lipschitz;
    a / (1.0 + a)
}

/// Bias-plus-variance bound on the expected subproblem gap:
/// `alpha^I (sigma D + L D^2 / 2) + lambda sigma^2 / I`.
pub fn epsilon_k_bound(
    alpha: f64,
    inner_iters: usize,
    lambda: f64,
    sigma: f64,
    diameter: f64,
    lipschitz: f64,
) -> f64 {
    bias_term(alpha, inner_iters, sigma, diameter, lipschitz) + variance_term(inner_iters, lambda, sigma)
}

pub fn bias_term(alpha: f64, inner_iters: usize, sigma: f64, diameter: f64, lipschitz: f64) -> f64 {
    alpha.powi(inner_iters as i32) * (sigma * diameter + 0.5 * lipschitz * diameter * diameter)
}

pub fn variance_term(inner_iters: usize, lambda: f64, sigma: f64) -> f64 {
    lambda * sigma * sigma / inner_iters as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct PssConfig {
    pub x0: RealVector,
    pub alpha: f64,
    pub lambda: f64,
    pub inner_iters: usize,
}

impl PssConfig {
    /// Configuration with `alpha` at its floor.
    pub fn new(x0: RealVector, lambda: f64, inner_iters: usize, lipschitz: f64) -> Result<Self> {
        Self::check_basic(lambda, inner_iters)?;
        let alpha = alpha_floor(inner_iters, lambda, lipschitz);
        Ok(Self {
            x0,
            alpha,
            lambda,
            inner_iters,
        })
    }

    /// Validated configuration: rejects `alpha` below [`alpha_floor`].
    pub fn with_alpha(
        x0: RealVector,
        alpha: f64,
        lambda: f64,
        inner_iters: usize,
        lipschitz: f64,
    ) -> Result<Self> {
        Self::check_basic(lambda, inner_iters)?;
        validate(alpha > 0.0 && alpha < 1.0, || format!("alpha must lie in (0, 1), got {alpha}"))?;
        let floor = alpha_floor(inner_iters, lambda, lipschitz);
        validate(alpha >= floor, || {
            format!("alpha = {alpha} is below the floor {floor} for I = {inner_iters}, lambda L = {}", lambda * lipschitz)
        })?;
        Ok(Self {
            x0,
            alpha,
            lambda,
            inner_iters,
        })
    }

    /// Any `alpha` in `(0, 1)`. Below the floor the expected-gap bound no longer applies.
    pub fn expert(
        x0: RealVector,
        alpha: f64,
        lambda: f64,
        inner_iters: usize,
        lipschitz: f64,
    ) -> Result<Self> {
        Self::check_basic(lambda, inner_iters)?;
        validate(alpha > 0.0 && alpha < 1.0, || format!("alpha must lie in (0, 1), got {alpha}"))?;
        let floor = alpha_floor(inner_iters, lambda, lipschitz);
        if alpha < floor {
            warn!("alpha = {alpha} below floor {floor}: expected-gap guarantee does not apply");
        }
        Ok(Self {
            x0,
            alpha,
            lambda,
            inner_iters,
        })
    }

    fn check_basic(lambda: f64, inner_iters: usize) -> Result<()> {
        validate(lambda > 0.0 && lambda.is_finite(), || format!("lambda must be positive, got {lambda}"))?;
        validate(inner_iters >= 1, || "inner iteration count must be at least 1".into())
    }
}

/// One solver output `(z, w) = (x_{I+1}, y_{I+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePair {
    pub z: RealVector,
    pub w: RealVector,
    pub samples_used: u64,
}

/// State after inner step `i` (1-based).
#[derive(Debug, Clone)]
pub struct PssStep<'a> {
    pub i: usize,
    pub x: &'a RealVector,
    pub y: &'a RealVector,
    pub aggregated_gradient: &'a RealVector,
}

/// Runs the solver. Inner sample `i` is drawn from `stream.child("pss-inner", i)`.
pub fn pss_run(oracle: &Oracle<'_>, cfg: &PssConfig, stream: &RngStream) -> Result<CandidatePair> {
    pss_run_traced(oracle, cfg, stream, |_| {})
}

/// As [`pss_run`], calling `visit` after each of the `I + 1` inner steps.
pub fn pss_run_traced<F>(
    oracle: &Oracle<'_>,
    cfg: &PssConfig,
    stream: &RngStream,
    mut visit: F,
) -> Result<CandidatePair>
where
    F: FnMut(&PssStep<'_>),
{
    let h = oracle.problem().regularizer();
    let (alpha, lambda) = (cfg.alpha, cfg.lambda);
    let mut x = cfg.x0.clone();
    let mut agg = RealVector::zeros(x.len());
    let mut y = RealVector::zeros(x.len());
    for i in 1..=cfg.inner_iters + 1 {
        let s = oracle.sample_gradient(&x, &stream.child("pss-inner", i as u64))?;
        if i == 1 {
            agg = s;
        } else {
            agg = &agg * alpha + s * (1.0 - alpha);
        }
        // argmin h(u) + <S_i, u> + |u - x0|^2/(2 lambda)
        x = h.prox(&(&cfg.x0 - &agg * lambda), lambda)?;
        if i == 1 {
            y = x.clone();
        } else {
            y = &y * alpha + &x * (1.0 - alpha);
        }
        visit(&PssStep {
            i,
            x: &x,
            y: &y,
            aggregated_gradient: &agg,
        });
    }
    Ok(CandidatePair {
        z: x,
        w: y,
        samples_used: cfg.inner_iters as u64 + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseModel;
    use crate::problem::{CompositeProblem, Quadratic};
    use crate::prox::Regularizer;
    use nalgebra::dvector;
    use std::sync::Arc;

    fn half_square() -> CompositeProblem {
        CompositeProblem::new(Arc::new(Quadratic::diagonal(&[1.0])), Regularizer::Zero, 1.0, 1.0)
            .unwrap()
    }

    #[test]
    fn alpha_floor_examples() {
        assert!((alpha_floor(2, 1.0, 1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((alpha_floor(1, 0.5, 1.0) - 0.5).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 1..200 {
            let a = alpha_floor(i, 1.0, 2.0);
            assert!(a > prev && a < 1.0);
            prev = a;
        }
        assert!(alpha_floor(4, 2.0, 1.0) > alpha_floor(4, 1.0, 1.0));
    }

    #[test]
    fn epsilon_bound_examples() {
        // sigma = 0 leaves alpha^I L D^2 / 2
        let v = epsilon_k_bound(0.5, 3, 1.0, 0.0, 2.0, 3.0);
        assert!((v - 0.125 * 6.0).abs() < 1e-15);
        // 0.9^10 * 1.5 + 0.1
        let v = epsilon_k_bound(0.9, 10, 1.0, 1.0, 1.0, 1.0);
        assert!((v - 0.6230).abs() < 1e-4, "{v}");
        let mut prev = f64::INFINITY;
        for i in 1..100 {
            let e = epsilon_k_bound(0.95, i, 2.0, 1.5, 1.0, 2.0);
            assert!(e <= prev);
            prev = e;
        }
    }

    #[test]
    fn hand_unrolled_recursion() {
        // s0=1, S1=1, x1=0, y1=0; s1=0, S2=2/3, x2=1/3, y2=1/9; s2=1/3, S3=5/9, x3=4/9, y3=2/9
        let p = half_square();
        let noise = NoiseModel::noiseless();
        let o = Oracle::new(&p, &noise).unwrap();
        let cfg = PssConfig::with_alpha(dvector![1.0], 2.0 / 3.0, 1.0, 2, 1.0).unwrap();
        let mut xs = Vec::new();
        let out = pss_run_traced(&o, &cfg, &RngStream::new(0), |st| {
            xs.push((st.x[0], st.y[0], st.aggregated_gradient[0]))
        })
        .unwrap();
        let expect = [(0.0, 0.0, 1.0), (1.0 / 3.0, 1.0 / 9.0, 2.0 / 3.0), (4.0 / 9.0, 2.0 / 9.0, 5.0 / 9.0)];
        for ((x, y, s), (ex, ey, es)) in xs.iter().zip(expect) {
            assert!((x - ex).abs() < 1e-15 && (y - ey).abs() < 1e-15 && (s - es).abs() < 1e-15);
        }
        assert!((out.z[0] - 4.0 / 9.0).abs() < 1e-15);
        assert!((out.w[0] - 2.0 / 9.0).abs() < 1e-15);
        assert_eq!(out.samples_used, 3);
        assert_eq!(o.calls(), 3);
    }

    #[test]
    fn long_run_reaches_the_prox_point() {
        let p = half_square();
        let noise = NoiseModel::noiseless();
        let o = Oracle::new(&p, &noise).unwrap();
        let cfg = PssConfig::expert(dvector![1.0], 2.0 / 3.0, 1.0, 500, 1.0).unwrap();
        let out = pss_run(&o, &cfg, &RngStream::new(0)).unwrap();
        assert!((out.z[0] - 0.5).abs() < 1e-3);
    }

    #[test]
    fn validated_mode_rejects_small_alpha() {
        assert!(PssConfig::with_alpha(dvector![0.0], 0.5, 1.0, 2, 1.0).is_err());
        assert!(PssConfig::expert(dvector![0.0], 0.5, 1.0, 2, 1.0).is_ok());
        assert!(PssConfig::new(dvector![0.0], 1.0, 0, 1.0).is_err());
        assert!(PssConfig::new(dvector![0.0], -1.0, 3, 1.0).is_err());
        let c = PssConfig::new(dvector![0.0], 1.0, 2, 1.0).unwrap();
        assert_eq!(c.alpha, alpha_floor(2, 1.0, 1.0));
    }

    #[test]
    fn noisy_runs_replay_bit_exactly() {
        let p = half_square();
        let noise = NoiseModel::student_t(3.0, 1.0).unwrap();
        let o = Oracle::new(&p, &noise).unwrap();
        let cfg = PssConfig::new(dvector![0.3], 2.0, 1, 1.0).unwrap();
        let s = RngStream::new(4).child("pss", 0);
        let a = pss_run(&o, &cfg, &s).unwrap();
        let b = pss_run(&o, &cfg, &s).unwrap();
        assert_eq!(a.z.as_slice(), b.z.as_slice());
        assert_eq!(a.w.as_slice(), b.w.as_slice());
    }
}
