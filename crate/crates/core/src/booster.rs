//! Probability booster: picks one candidate pair out of `n` so that a
//! constant-probability guarantee on each candidate becomes a high-probability
//! guarantee on the output.
//!
//! Steps: Euclidean [`sts`](crate::select::sts) over the `w`'s, then over the
//! `z`'s; a robust gradient estimate at the first candidate kept by both; a
//! third selection over the `w`'s under the runtime metric `d_h` built from that
//! estimate. The output is the smallest index kept by all three.

use crate::error::{validate, Error, Result};
use crate::oracle::Oracle;
use crate::pss::CandidatePair;
use crate::rng::RngStream;
use crate::select::{make_dh, rge, DhParams, SelectionMetric, StsOutcome};
use crate::RealVector;

/// `tau = 8 eps_k`.
pub fn tau_from_eps(eps_k: f64) -> f64 {
    8.0 * eps_k
}

/// Smallest batch size `ceil(18 (1 + lambda mu) sigma^2 / (lambda L^2 tau))`, at least 1.
pub fn q_floor(lambda: f64, mu: f64, sigma: f64, lipschitz: f64, tau: f64) -> Result<usize> {
    validate(tau > 0.0, || format!("tau must be positive, got {tau}"))?;
    validate(lambda > 0.0 && mu > 0.0 && lipschitz > 0.0 && sigma >= 0.0, || {
        "q_floor needs lambda, mu, L > 0 and sigma >= 0".into()
    })?;
    let raw = 18.0 * (1.0 + lambda * mu) * sigma * sigma / (lambda * lipschitz * lipschitz * tau);
    validate(raw.is_finite(), || format!("q_floor overflowed for tau = {tau}"))?;
    Ok((raw.ceil() as usize).max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PbConfig {
    pub q: usize,
    pub lambda: f64,
    pub z_bar: RealVector,
}

impl PbConfig {
    pub fn new(q: usize, lambda: f64, z_bar: RealVector) -> Result<Self> {
        validate(q >= 1, || "rge batch size q must be at least 1".into())?;
        validate(lambda > 0.0 && lambda.is_finite(), || format!("lambda must be positive, got {lambda}"))?;
        Ok(Self { q, lambda, z_bar })
    }

    /// As [`PbConfig::new`], additionally requiring `q >= q_floor(lambda, mu, sigma, L, tau)`.
    pub fn validated(
        q: usize,
        lambda: f64,
        z_bar: RealVector,
        mu: f64,
        sigma: f64,
        lipschitz: f64,
        tau: f64,
    ) -> Result<Self> {
        let floor = if sigma == 0.0 { 1 } else { q_floor(lambda, mu, sigma, lipschitz, tau)? };
        validate(q >= floor, || format!("rge batch size q = {q} is below the floor {floor}"))?;
        Self::new(q, lambda, z_bar)
    }
}

#[derive(Debug, Clone)]
pub struct PbOutcome {
    pub selected: CandidatePair,
    /// 0-based index into the input pairs.
    pub selected_index: usize,
    /// Index `j0` at which the gradient estimate was taken.
    pub anchor_index: usize,
    pub s_bar: RealVector,
    /// Selections over the `w`'s, the `z`'s and the `w`'s under `d_h`.
    pub index_sets: [StsOutcome; 3],
    pub samples_used: u64,
}

/// Runs the booster. The gradient estimate draws from `stream.child("rge", 0)`.
pub fn pb(pairs: &[CandidatePair], cfg: &PbConfig, oracle: &Oracle<'_>, stream: &RngStream) -> Result<PbOutcome> {
    let n = pairs.len();
    validate(n >= 1, || "booster needs at least one candidate pair".into())?;
    let dim = cfg.z_bar.len();
    validate(pairs.iter().all(|p| p.z.len() == dim && p.w.len() == dim), || {
        format!("candidate dimensions do not match the prox center (dim {dim})")
    })?;
    let ws: Vec<RealVector> = pairs.iter().map(|p| p.w.clone()).collect();
    let zs: Vec<RealVector> = pairs.iter().map(|p| p.z.clone()).collect();

    let j1 = SelectionMetric::Euclidean.select(&ws)?;
    let j2 = SelectionMetric::Euclidean.select(&zs)?;
    let anchor_index = j1
        .selected
        .iter()
        .copied()
        .find(|&j| j2.contains(j))
        .ok_or_else(|| Error::Logic("first two selections are disjoint".into()))?;
    let w_tilde = &ws[anchor_index];
    let s_bar = rge(oracle, w_tilde, n, cfg.q, &stream.child("rge", 0))?;

    let dh = make_dh(DhParams {
        h: oracle.problem().regularizer().clone(),
        s_bar: s_bar.clone(),
        w_tilde: w_tilde.clone(),
        z_bar: cfg.z_bar.clone(),
        lambda: cfg.lambda,
    })?;
    let j3 = dh.select(&ws)?;
    let selected_index = j1
        .selected
        .iter()
        .copied()
        .find(|&j| j2.contains(j) && j3.contains(j))
        .ok_or_else(|| Error::Logic("the three selections have empty intersection".into()))?;

    Ok(PbOutcome {
        selected: pairs[selected_index].clone(),
        selected_index,
        anchor_index,
        s_bar,
        index_sets: [j1, j2, j3],
        samples_used: (n * cfg.q) as u64,
    })
}
