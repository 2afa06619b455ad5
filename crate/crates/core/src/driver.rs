//! The outer proximal point loop and a stochastic gradient baseline.
//!
//! Iteration `k` runs `n` independent subproblem solves from the prox center
//! `z_bar_{k-1}` on substreams `outer:k/pss:j`, boosts them with
//! [`pb`](crate::booster::pb) on `outer:k/pb:0`, and moves the center to the
//! selected `z`.

use crate::booster::{pb, PbConfig};
use crate::error::{validate, Error, Result};
use crate::oracle::Oracle;
use crate::problem::CompositeProblem;
use crate::pss::{pss_run, CandidatePair, PssConfig};
use crate::rng::RngStream;
use crate::schedule::Schedule;
use crate::RealVector;
use rayon::prelude::*;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub z_bar: RealVector,
    pub w_bar: RealVector,
    /// 0-based index of the boosted candidate.
    pub selected_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    /// `(z_bar_k, w_bar_k)` for `k = 1..K`.
    pub iterates: Vec<IterateRecord>,
    pub per_iter_samples: Vec<u64>,
    pub total_samples: u64,
    pub master_seed: u64,
    pub schedule: Schedule,
}

/// A failed run with every completed iteration preserved.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: RunRecord,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "run failed after {} iterations: {}", self.partial.iterates.len(), self.error)
    }
}

impl std::error::Error for RunFailure {}

fn check_schedule(s: &Schedule) -> Result<()> {
    validate(
        s.candidates_per_iter >= 1 && s.outer_iters >= 1 && s.inner_iters >= 1 && s.rge_batch >= 1,
        || "schedule needs n, K, I, q >= 1".into(),
    )?;
    validate(s.lambda > 0.0 && s.alpha > 0.0 && s.alpha < 1.0, || {
        format!("schedule has lambda = {}, alpha = {}", s.lambda, s.alpha)
    })
}

/// Runs `K` outer iterations from `z0`. With `parallel`, the `n` candidate
/// solves of each iteration run on the rayon pool; the result is identical.
pub fn sppm_run(
    oracle: &Oracle<'_>,
    schedule: &Schedule,
    z0: &RealVector,
    stream: &RngStream,
    parallel: bool,
) -> std::result::Result<RunRecord, Box<RunFailure>> {
    let mut record = RunRecord {
        iterates: Vec::with_capacity(schedule.outer_iters),
        per_iter_samples: Vec::with_capacity(schedule.outer_iters),
        total_samples: 0,
        master_seed: stream.master_seed(),
        schedule: schedule.clone(),
    };
    let fail = |error: Error, partial: RunRecord| Box::new(RunFailure { error, partial });
    if let Err(e) = check_schedule(schedule) {
        return Err(fail(e, record));
    }
    let problem = oracle.problem();
    if z0.len() != problem.dim() || !problem.contains(z0) {
        return Err(fail(Error::Domain("initial prox center must lie in dom h".into()), record));
    }

    let mut z_bar = z0.clone();
    for k in 1..=schedule.outer_iters {
        match outer_step(oracle, schedule, &z_bar, &stream.child("outer", k as u64), parallel) {
            Ok((iterate, samples)) => {
                z_bar = iterate.z_bar.clone();
                record.iterates.push(iterate);
                record.per_iter_samples.push(samples);
                record.total_samples += samples;
            }
            Err(e) => return Err(fail(e, record)),
        }
    }
    Ok(record)
}

fn outer_step(
    oracle: &Oracle<'_>,
    s: &Schedule,
    z_bar: &RealVector,
    stream: &RngStream,
    parallel: bool,
) -> Result<(IterateRecord, u64)> {
    let cfg = PssConfig {
        x0: z_bar.clone(),
        alpha: s.alpha,
        lambda: s.lambda,
        inner_iters: s.inner_iters,
    };
    let solve = |j: usize| pss_run(oracle, &cfg, &stream.child("pss", j as u64));
    let pairs: Vec<CandidatePair> = if parallel {
        (0..s.candidates_per_iter).into_par_iter().map(solve).collect::<Result<_>>()?
    } else {
        (0..s.candidates_per_iter).map(solve).collect::<Result<_>>()?
    };
    let pss_samples: u64 = pairs.iter().map(|p| p.samples_used).sum();
    let pb_cfg = PbConfig::new(s.rge_batch, s.lambda, z_bar.clone())?;
    let out = pb(&pairs, &pb_cfg, oracle, &stream.child("pb", 0))?;
    Ok((
        IterateRecord {
            z_bar: out.selected.z,
            w_bar: out.selected.w,
            selected_index: out.selected_index,
        },
        pss_samples + out.samples_used,
    ))
}

/// The iterate with the smallest exact objective, as `(k, w_bar_k)` with
/// 1-based `k`. Ties go to the smallest `k`.
pub fn select_best(problem: &CompositeProblem, record: &RunRecord) -> Result<(usize, RealVector)> {
    validate(!record.iterates.is_empty(), || "run record has no iterates".into())?;
    let mut best = (0, f64::INFINITY);
    for (i, it) in record.iterates.iter().enumerate() {
        let v = problem.evaluate_phi(&it.w_bar);
        if v < best.1 {
            best = (i, v);
        }
    }
    Ok((best.0 + 1, record.iterates[best.0].w_bar.clone()))
}

/// Stochastic proximal gradient with steps `1 / (mu (t + 1))`, consuming exactly
/// `budget` samples; sample `t` comes from `stream.child("sgd", t)`.
pub fn sgd_baseline(oracle: &Oracle<'_>, x0: &RealVector, budget: u64, stream: &RngStream) -> Result<RealVector> {
    validate(budget >= 1, || "sgd budget must be at least 1".into())?;
    let problem = oracle.problem();
    let h = problem.regularizer();
    let mut x = x0.clone();
    for t in 0..budget {
        let gamma = 1.0 / (problem.mu() * (t as f64 + 1.0));
        let g = oracle.sample_gradient(&x, &stream.child("sgd", t))?;
        x = h.prox(&(&x - g * gamma), gamma)?;
    }
    Ok(x)
}
