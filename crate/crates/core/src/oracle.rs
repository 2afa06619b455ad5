//! The stochastic first-order oracle `s(x, xi)`, with a call counter.

use crate::error::{Error, Result};
use crate::noise::{NoiseFamily, NoiseModel};
use crate::problem::CompositeProblem;
use crate::rng::RngStream;
use crate::RealVector;
use rand::Rng;
use std::sync::atomic::{AtomicU64, Ordering};

/// Pairs a problem with a noise model and counts every stochastic gradient drawn.
#[derive(Debug)]
pub struct Oracle<'a> {
    problem: &'a CompositeProblem,
    noise: &'a NoiseModel,
    calls: AtomicU64,
}

impl<'a> Oracle<'a> {
    pub fn new(problem: &'a CompositeProblem, noise: &'a NoiseModel) -> Result<Self> {
        if noise.family() == NoiseFamily::FiniteSum && problem.smooth().finite_sum().is_none() {
            return Err(Error::Capability(
                "finite-sum noise requires a finite-sum smooth part".into(),
            ));
        }
        Ok(Self {
            problem,
            noise,
            calls: AtomicU64::new(0),
        })
    }

    pub fn problem(&self) -> &'a CompositeProblem {
        self.problem
    }

    pub fn noise(&self) -> &'a NoiseModel {
        self.noise
    }

    /// Number of stochastic gradients drawn so far.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    /// One unbiased stochastic gradient at `x`, drawn from `stream`.
    pub fn sample_gradient(&self, x: &RealVector, stream: &RngStream) -> Result<RealVector> {
        if !self.problem.contains(x) {
            return Err(Error::Domain(format!("gradient requested outside dom h at {stream}")));
        }
        self.calls.fetch_add(1, Ordering::Relaxed);
        let mut rng = stream.rng();
        match self.noise.family() {
            NoiseFamily::FiniteSum => {
                let fs = self.problem.smooth().finite_sum().expect("checked in new");
                let i = rng.random_range(0..fs.len());
                Ok(fs.component_gradient(i, x))
            }
            _ => Ok(self.problem.grad_f(x) + self.noise.draw(x.len(), &mut rng)),
        }
    }

    /// Mean of `count` independent gradients at `x`, sample `i` drawn from `stream.child("sample", i)`.
    pub fn batch_mean(&self, x: &RealVector, count: usize, stream: &RngStream) -> Result<RealVector> {
        let mut acc = RealVector::zeros(x.len());
        for i in 0..count {
            acc += self.sample_gradient(x, &stream.child("sample", i as u64))?;
        }
        Ok(acc / count as f64)
    }
}
