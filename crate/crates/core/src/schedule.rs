//! Parameter derivation for the outer loop.
//!
//! The error target `eps` is split evenly between the distance term and the
//! statistical term. With `lambda = 3 / mu`:
//!
//! ```text
//! K   = ceil( ln(1 + D^2 / (7 lambda eps/2)) / ln(8/7) )
//! tau_target = (eps/2) / (12 + 57 kappa)
//! I   = smallest I with epsilon_k_bound(alpha_floor(I), I) <= tau_target / 8
//! n   = ceil( 72 ln(2K / p) )
//! q   = q_floor(lambda, mu, sigma, L, 8 eps_k)
//! ```
//!
//! [`Mode::Practical`] replaces the constants `8`, `12 + 57 kappa` and `72` by
//! configurable factors and sizes `I` from the variance term alone.

use crate::booster::q_floor;
use crate::error::{validate, Result};
use crate::pss::{alpha_floor, epsilon_k_bound, variance_term};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_INNER_CAP: usize = 1_000_000;

/// Problem constants the schedule depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub mu: f64,
    pub lipschitz: f64,
    pub sigma: f64,
    pub diameter: f64,
}

impl ProblemConstants {
    pub fn kappa(&self) -> f64 {
        self.lipschitz / self.mu
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PracticalFactors {
    /// Replaces the `8` in `tau = 8 eps_k`.
    pub tau_factor: f64,
    /// Replaces `12 + 57 kappa`.
    pub boost_factor: f64,
    /// Replaces the `72` in `n = ceil(72 ln(2K/p))`.
    pub n_factor: f64,
}

impl Default for PracticalFactors {
    fn default() -> Self {
        Self {
            tau_factor: 1.0,
            boost_factor: 1.0,
            n_factor: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Mode {
    Verbatim,
    Practical(PracticalFactors),
}

impl Mode {
    fn factors(&self, kappa: f64) -> (f64, f64, f64) {
        match self {
            Mode::Verbatim => (8.0, 12.0 + 57.0 * kappa, 72.0),
            Mode::Practical(f) => (f.tau_factor, f.boost_factor, f.n_factor),
        }
    }
}

/// Explicit values replacing derived ones.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub inner_iters: Option<usize>,
    pub candidates_per_iter: Option<usize>,
    pub rge_batch: Option<usize>,
    pub outer_iters: Option<usize>,
    pub inner_cap: Option<usize>,
}

/// One checked constraint. `binding` constraints decide feasibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub required: f64,
    pub actual: f64,
    pub satisfied: bool,
    pub binding: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub mode: Mode,
    pub lambda: f64,
    pub alpha: f64,
    pub inner_iters: usize,
    pub candidates_per_iter: usize,
    pub rge_batch: usize,
    pub outer_iters: usize,
    pub eps_k: f64,
    pub tau: f64,
    pub target_eps: f64,
    pub target_p: f64,
    pub feasible: bool,
    pub diagnostics: BTreeMap<String, Diagnostic>,
    pub messages: Vec<String>,
}

impl Schedule {
    pub fn total_samples(&self) -> u64 {
        total_samples(self)
    }
}

/// `n K (I + 1) + n K q`.
pub fn total_samples(s: &Schedule) -> u64 {
    let nk = s.candidates_per_iter as u64 * s.outer_iters as u64;
    nk * (s.inner_iters as u64 + 1) + nk * s.rge_batch as u64
}

/// `ceil(ln(1 + D^2 / (7 lambda eps_dist)) / ln(8/7))`, at least 1.
pub fn outer_iters_for(diameter: f64, lambda: f64, eps_dist: f64) -> usize {
    let k = ((1.0 + diameter * diameter / (7.0 * lambda * eps_dist)).ln() / (8.0f64 / 7.0).ln()).ceil();
    (k as usize).max(1)
}

/// `ceil(factor ln(2K / p))`, at least 1.
pub fn candidates_for(factor: f64, outer_iters: usize, p: f64) -> usize {
    let n = (factor * (2.0 * outer_iters as f64 / p).ln()).ceil();
    (n as usize).max(1)
}

/// Smallest `i` in `[lo, cap]` with `ok(i)`, by doubling then bisection.
fn search_smallest(lo: usize, cap: usize, ok: impl Fn(usize) -> bool) -> Option<usize> {
    if lo > cap {
        return None;
    }
    let mut fail = lo - 1;
    let mut probe = lo;
    loop {
        if ok(probe) {
            break;
        }
        if probe == cap {
            return None;
        }
        fail = probe;
        probe = (probe.max(1) * 2).min(cap);
    }
    let mut good = probe;
    while good - fail > 1 {
        let mid = fail + (good - fail) / 2;
        if ok(mid) {
            good = mid;
        } else {
            fail = mid;
        }
    }
    Some(good)
}

pub fn derive_schedule(
    constants: &ProblemConstants,
    target_eps: f64,
    target_p: f64,
    mode: &Mode,
    overrides: &Overrides,
) -> Result<Schedule> {
    let ProblemConstants {
        mu,
        lipschitz,
        sigma,
        diameter,
    } = *constants;
    validate(mu > 0.0 && mu.is_finite(), || format!("mu must be positive, got {mu}"))?;
    validate(lipschitz > mu && lipschitz.is_finite(), || {
        format!("L must exceed mu, got L = {lipschitz}, mu = {mu}")
    })?;
    validate(sigma >= 0.0 && sigma.is_finite(), || format!("sigma must be nonnegative, got {sigma}"))?;
    validate(diameter > 0.0 && diameter.is_finite(), || format!("diameter must be positive, got {diameter}"))?;
    validate(target_eps > 0.0 && target_eps.is_finite(), || format!("target eps must be positive, got {target_eps}"))?;
    validate(target_p > 0.0 && target_p < 1.0, || format!("target p must lie in (0, 1), got {target_p}"))?;
    if let Mode::Practical(f) = mode {
        validate(f.tau_factor > 0.0 && f.boost_factor > 0.0 && f.n_factor > 0.0, || {
            "practical factors must be positive".into()
        })?;
    }
    for (name, v) in [
        ("inner_iters", overrides.inner_iters),
        ("candidates_per_iter", overrides.candidates_per_iter),
        ("rge_batch", overrides.rge_batch),
        ("outer_iters", overrides.outer_iters),
        ("inner_cap", overrides.inner_cap),
    ] {
        validate(v != Some(0), || format!("override {name} must be at least 1"))?;
    }

    let kappa = constants.kappa();
    let (tau_factor, boost_factor, n_factor) = mode.factors(kappa);
    let mut diagnostics = BTreeMap::new();
    let mut messages = Vec::new();
    let mut check = |name: &str, required: f64, actual: f64, satisfied: bool, binding: bool| {
        diagnostics.insert(
            name.to_string(),
            Diagnostic {
                required,
                actual,
                satisfied,
                binding,
            },
        );
    };

    let lambda = overrides.lambda.unwrap_or(3.0 / mu);
    validate(lambda > 0.0 && lambda.is_finite(), || format!("lambda must be positive, got {lambda}"))?;
    validate(lambda * mu >= 3.0 * (1.0 - 1e-12), || {
        format!("lambda mu = {} violates lambda mu >= 3", lambda * mu)
    })?;
    check("lambda_mu", 3.0, lambda * mu, true, true);

    let eps_dist = target_eps / 2.0;
    let eps_stat = target_eps / 2.0;
    let k_required = outer_iters_for(diameter, lambda, eps_dist);
    let outer_iters = overrides.outer_iters.unwrap_or(k_required);
    check(
        "outer_iters",
        k_required as f64,
        outer_iters as f64,
        outer_iters >= k_required,
        true,
    );

    let tau_target = eps_stat / boost_factor;
    let eps_k_target = tau_target / tau_factor;
    let cap = overrides.inner_cap.unwrap_or(DEFAULT_INNER_CAP);
    let verbatim_bound = |i: usize| epsilon_k_bound(alpha_floor(i, lambda, lipschitz), i, lambda, sigma, diameter, lipschitz);
    let inner_iters = match overrides.inner_iters {
        Some(i) => i,
        None => {
            let found = match mode {
                Mode::Verbatim => search_smallest(1, cap, |i| verbatim_bound(i) <= eps_k_target),
                Mode::Practical(_) => {
                    let lo = ((2.0 * lambda * lipschitz).ceil() as usize).max(1);
                    search_smallest(lo, cap, |i| variance_term(i, lambda, sigma) <= eps_k_target)
                }
            };
            match found {
                Some(i) => i,
                None => {
                    messages.push(format!(
                        "bias floor exceeded: no I <= {cap} brings eps_k below {eps_k_target:.6e} \
                         (eps_k({cap}) = {:.6e})",
                        verbatim_bound(cap)
                    ));
                    cap
                }
            }
        }
    };

    let floor = alpha_floor(inner_iters, lambda, lipschitz);
    let alpha = overrides.alpha.unwrap_or(floor);
    validate(alpha >= floor && alpha < 1.0, || {
        format!("alpha = {alpha} must lie in [{floor}, 1) for I = {inner_iters}")
    })?;
    check("alpha", floor, alpha, true, true);

    let bound = epsilon_k_bound(alpha, inner_iters, lambda, sigma, diameter, lipschitz);
    let eps_k = match mode {
        Mode::Verbatim => {
            check("eps_k", eps_k_target, bound, bound <= eps_k_target, true);
            bound
        }
        Mode::Practical(_) => {
            let var = variance_term(inner_iters, lambda, sigma);
            check("eps_k", eps_k_target, var, var <= eps_k_target, true);
            check("verbatim_eps_k", tau_target / 8.0, bound, bound <= tau_target / 8.0, false);
            var
        }
    };
    let tau = tau_factor * eps_k;

    let n_required = candidates_for(n_factor, outer_iters, target_p);
    let candidates_per_iter = overrides.candidates_per_iter.unwrap_or(n_required);
    check(
        "candidates_per_iter",
        n_required as f64,
        candidates_per_iter as f64,
        candidates_per_iter >= n_required,
        true,
    );

    let q_required = if sigma == 0.0 { 1 } else { q_floor(lambda, mu, sigma, lipschitz, tau)? };
    let rge_batch = overrides.rge_batch.unwrap_or(q_required);
    validate(rge_batch >= q_required, || {
        format!("rge batch q = {rge_batch} is below the floor {q_required}")
    })?;
    check("rge_batch", q_required as f64, rge_batch as f64, true, true);

    let feasible = diagnostics.values().all(|d| d.satisfied || !d.binding);
    if !feasible && messages.is_empty() {
        let failed: Vec<_> = diagnostics
            .iter()
            .filter(|(_, d)| d.binding && !d.satisfied)
            .map(|(k, _)| k.as_str())
            .collect();
        messages.push(format!("unsatisfied constraints: {}", failed.join(", ")));
    }
    Ok(Schedule {
        mode: *mode,
        lambda,
        alpha,
        inner_iters,
        candidates_per_iter,
        rge_batch,
        outer_iters,
        eps_k,
        tau,
        target_eps,
        target_p,
        feasible,
        diagnostics,
        messages,
    })
}
