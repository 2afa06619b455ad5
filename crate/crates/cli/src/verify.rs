//! Property suites behind `sppm verify`.
//!
//! Each experiment function returns raw counts or statistics and takes the
//! bound it is compared against from the caller, so the same code serves the
//! CLI suites and the acceptance tests.

use crate::report::{ensure_dir, write_json};
use crate::Result;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use sppm_core::booster::{pb, q_floor, PbConfig};
use sppm_core::instances::quadratic_ball;
use sppm_core::problem::Quadratic;
use sppm_core::pss::{alpha_floor, epsilon_k_bound, pss_run, CandidatePair, PssConfig};
use sppm_core::schedule::{Diagnostic, Mode, Schedule};
use sppm_core::select::{bregman_dh, make_dh, tertile_rank, DhParams, SelectionMetric};
use sppm_core::solver::exact_prox_point;
use sppm_core::{
    rge, sppm_run, CompositeProblem, NoiseModel, Oracle, RealVector, Regularizer, RngStream,
};
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

/// Tolerance for the ground-truth prox points used inside the suites.
pub const EXACT_TOL: f64 = 1e-12;

/// Reference instance: `d = 10`, `mu = 1`, `L = 4`, ball of radius 0.5 (`D = 1`).
pub fn reference_problem(seed: u64) -> Result<CompositeProblem> {
    Ok(quadratic_ball(10, 1.0, 4.0, 0.5, seed)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Frequency {
    pub hits: usize,
    pub total: usize,
}

impl Frequency {
    pub fn rate(&self) -> f64 {
        self.hits as f64 / self.total as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStat {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

impl MeanStat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Self {
            mean,
            se: (var / n).sqrt(),
            count: values.len(),
        }
    }
}

fn gaussian_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> RealVector {
    RealVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> RealVector {
    gaussian_vector(dim, rng).normalize()
}

/// Left side of the per-candidate event:
/// `phi^lambda(w) - phi^lambda(z_hat) + (1 + lambda mu) / (lambda (2 + lambda mu)) |z_hat - z|^2`.
pub fn candidate_event_lhs(problem: &CompositeProblem, center: &RealVector, lambda: f64, z_hat: &RealVector, pair: &CandidatePair) -> f64 {
    let lm = lambda * problem.mu();
    problem.phi_lambda(&pair.w, center, lambda) - problem.phi_lambda(z_hat, center, lambda)
        + (1.0 + lm) / (lambda * (2.0 + lm)) * (z_hat - &pair.z).norm_squared()
}

/// `epsilon_k_bound` at the floor weight for `I` inner steps.
pub fn eps_k_at_floor(problem: &CompositeProblem, lambda: f64, inner_iters: usize, sigma: f64) -> f64 {
    let l = problem.lipschitz();
    let d = problem.diameter().expect("bounded domain");
    epsilon_k_bound(alpha_floor(inner_iters, lambda, l), inner_iters, lambda, sigma, d, l)
}

/// Fraction of subproblem solves meeting `candidate_event_lhs <= rhs`, each from
/// a fresh random prox center in `dom h`.
pub fn pss_event_frequency(
    problem: &CompositeProblem,
    noise: &NoiseModel,
    lambda: f64,
    inner_iters: usize,
    calls: usize,
    rhs: f64,
    stream: &RngStream,
) -> Result<Frequency> {
    let oracle = Oracle::new(problem, noise)?;
    let mut hits = 0;
    for c in 0..calls {
        let s = stream.child("call", c as u64);
        let center = problem.random_domain_point(&mut s.child("center", 0).rng());
        let z_hat = exact_prox_point(problem, &center, lambda, EXACT_TOL)?;
        let cfg = PssConfig::new(center.clone(), lambda, inner_iters, problem.lipschitz())?;
        let pair = pss_run(&oracle, &cfg, &s)?;
        hits += usize::from(candidate_event_lhs(problem, &center, lambda, &z_hat, &pair) <= rhs);
    }
    Ok(Frequency { hits, total: calls })
}

/// Mean and standard error of `phi^lambda(y_{I+1}) - phi^lambda(z_hat)` over
/// `runs` solves from the problem's initial point.
pub fn pss_gap_stats(
    problem: &CompositeProblem,
    noise: &NoiseModel,
    lambda: f64,
    inner_iters: usize,
    runs: usize,
    stream: &RngStream,
) -> Result<MeanStat> {
    let oracle = Oracle::new(problem, noise)?;
    let center = problem.initial_point().expect("initial point").clone();
    let z_hat = exact_prox_point(problem, &center, lambda, EXACT_TOL)?;
    let base = problem.phi_lambda(&z_hat, &center, lambda);
    let cfg = PssConfig::new(center.clone(), lambda, inner_iters, problem.lipschitz())?;
    let gaps = (0..runs)
        .map(|r| {
            let pair = pss_run(&oracle, &cfg, &stream.child("run", r as u64))?;
            Ok(problem.phi_lambda(&pair.w, &center, lambda) - base)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeanStat::of(&gaps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlantedSts {
    pub configs: usize,
    pub selected: usize,
    /// Selected indices farther than `3 eps` from the hidden point.
    pub violations: usize,
    /// Selections whose size is at most `2n/3`.
    pub small_selections: usize,
}

/// Planted second tertile selection: `n - outliers` points uniform in the
/// `eps`-ball around a hidden point, `outliers <= max_outliers` points at
/// distance `far`, either clustered or scattered.
pub fn sts_planted(
    configs: usize,
    n: usize,
    dim: usize,
    eps: f64,
    max_outliers: usize,
    far: f64,
    stream: &RngStream,
) -> Result<PlantedSts> {
    let mut out = PlantedSts {
        configs,
        selected: 0,
        violations: 0,
        small_selections: 0,
    };
    for c in 0..configs {
        let mut rng = stream.child("config", c as u64).rng();
        let hidden = gaussian_vector(dim, &mut rng) * 10.0;
        let outliers = rng.random_range(0..=max_outliers);
        let cluster = &hidden + random_unit(dim, &mut rng) * far;
        let mut points: Vec<RealVector> = (0..n - outliers)
            .map(|_| {
                let r = eps * rng.random::<f64>().powf(1.0 / dim as f64);
                &hidden + random_unit(dim, &mut rng) * r
            })
            .collect();
        for o in 0..outliers {
            let p = if c % 2 == 0 {
                cluster.clone()
            } else {
                &hidden + random_unit(dim, &mut rng) * far
            };
            points.insert(rng.random_range(0..=points.len()).min(n - outliers + o), p);
        }
        let sel = SelectionMetric::Euclidean.select(&points)?;
        out.selected += sel.selected.len();
        out.small_selections += usize::from(3 * sel.selected.len() <= 2 * n);
        out.violations += sel
            .selected
            .iter()
            .filter(|&&j| (&points[j] - &hidden).norm() > 3.0 * eps)
            .count();
    }
    Ok(out)
}

/// Frequency of `|rge(x) - grad f(x)| > threshold` over `trials` calls.
#[allow(clippy::too_many_arguments)]
pub fn rge_exceed_frequency(
    problem: &CompositeProblem,
    noise: &NoiseModel,
    x: &RealVector,
    n: usize,
    q: usize,
    threshold: f64,
    trials: usize,
    stream: &RngStream,
) -> Result<(Frequency, u64)> {
    let oracle = Oracle::new(problem, noise)?;
    let grad = problem.grad_f(x);
    let mut hits = 0;
    for t in 0..trials {
        let est = rge(&oracle, x, n, q, &stream.child("trial", t as u64))?;
        hits += usize::from((est - &grad).norm() > threshold);
    }
    Ok((Frequency { hits, total: trials }, oracle.calls()))
}

/// One planted booster input: `tertile_rank(n)` pairs satisfying the
/// per-candidate event with right side `tau`, the rest adversarial.
#[allow(clippy::too_many_arguments)]
pub fn planted_pairs(
    problem: &CompositeProblem,
    center: &RealVector,
    lambda: f64,
    z_hat: &RealVector,
    n: usize,
    tau: f64,
    style: usize,
    rng: &mut impl Rng,
) -> Result<Vec<CandidatePair>> {
    let dim = problem.dim();
    let h = problem.regularizer();
    let near = |radius: f64, rng: &mut dyn rand::RngCore| -> Result<RealVector> {
        let r = radius * rng.random::<f64>();
        Ok(h.prox(&(z_hat + random_unit(dim, rng) * r), 1.0)?)
    };
    let lm = lambda * problem.mu();
    let scale = (tau / ((1.0 + lambda * problem.lipschitz()) / (2.0 * lambda) + (1.0 + lm) / (lambda * (2.0 + lm)))).sqrt();
    let good_count = tertile_rank(n);
    let mut pairs = Vec::with_capacity(n);
    while pairs.len() < good_count {
        let mut radius = scale;
        loop {
            let pair = CandidatePair {
                z: near(radius, rng)?,
                w: near(radius, rng)?,
                samples_used: 0,
            };
            if candidate_event_lhs(problem, center, lambda, z_hat, &pair) <= tau {
                pairs.push(pair);
                break;
            }
            radius *= 0.5;
        }
    }
    let diameter = problem.diameter().expect("bounded domain");
    let far = h.prox(&(z_hat - (z_hat - center).normalize() * (2.0 * diameter)), 1.0)?;
    for _ in good_count..n {
        let pair = match style % 3 {
            0 => CandidatePair {
                z: far.clone(),
                w: far.clone(),
                samples_used: 0,
            },
            1 => {
                let p = problem.random_domain_point(rng);
                CandidatePair {
                    z: p.clone(),
                    w: problem.random_domain_point(rng),
                    samples_used: 0,
                }
            }
            _ => {
                let p = h.prox(&(z_hat + random_unit(dim, rng) * (4.0 * scale)), 1.0)?;
                CandidatePair {
                    z: p.clone(),
                    w: p,
                    samples_used: 0,
                }
            }
        };
        pairs.push(pair);
    }
    // interleave so that good pairs do not simply come first
    for i in (1..pairs.len()).rev() {
        pairs.swap(i, rng.random_range(0..=i));
    }
    Ok(pairs)
}

/// Frequency of the boosted output violating `candidate_event_lhs <= rhs` on
/// planted inputs whose good pairs meet it with right side `tau`.
#[allow(clippy::too_many_arguments)]
pub fn pb_planted_violations(
    problem: &CompositeProblem,
    noise: &NoiseModel,
    lambda: f64,
    n: usize,
    tau: f64,
    q: usize,
    rhs: f64,
    trials: usize,
    stream: &RngStream,
) -> Result<Frequency> {
    let oracle = Oracle::new(problem, noise)?;
    let mut hits = 0;
    for t in 0..trials {
        let s = stream.child("trial", t as u64);
        let mut rng = s.child("plant", 0).rng();
        let center = problem.random_domain_point(&mut rng);
        let z_hat = exact_prox_point(problem, &center, lambda, EXACT_TOL)?;
        let pairs = planted_pairs(problem, &center, lambda, &z_hat, n, tau, t, &mut rng)?;
        let cfg = PbConfig::new(q, lambda, center.clone())?;
        let out = pb(&pairs, &cfg, &oracle, &s.child("pb", 0))?;
        hits += usize::from(candidate_event_lhs(problem, &center, lambda, &z_hat, &out.selected) > rhs);
    }
    Ok(Frequency { hits, total: trials })
}

/// Schedule with explicit `(n, K, I, q)` at `lambda = 3 / mu` and the floor weight.
pub fn fixed_schedule(problem: &CompositeProblem, sigma: f64, n: usize, k: usize, inner_iters: usize, q: usize) -> Schedule {
    let lambda = 3.0 / problem.mu();
    let eps_k = eps_k_at_floor(problem, lambda, inner_iters, sigma);
    Schedule {
        mode: Mode::Verbatim,
        lambda,
        alpha: alpha_floor(inner_iters, lambda, problem.lipschitz()),
        inner_iters,
        candidates_per_iter: n,
        rge_batch: q,
        outer_iters: k,
        eps_k,
        tau: 8.0 * eps_k,
        target_eps: f64::NAN,
        target_p: f64::NAN,
        feasible: true,
        diagnostics: BTreeMap::<String, Diagnostic>::new(),
        messages: vec![],
    }
}

/// Frequency over all outer iterations of
/// `phi(w_k) - phi* - |x* - z_{k-1}|^2 / (2 lambda) + (1 + lambda mu) / (lambda (4 + lambda mu)) |x* - z_k|^2 <= rhs`.
pub fn iteration_event_frequency(
    problem: &CompositeProblem,
    noise: &NoiseModel,
    schedule: &Schedule,
    runs: usize,
    rhs: f64,
    stream: &RngStream,
) -> Result<Frequency> {
    let opt = problem.optimum().expect("stored optimum").clone();
    let lambda = schedule.lambda;
    let lm = lambda * problem.mu();
    let mut hits = 0;
    let mut total = 0;
    for r in 0..runs {
        let s = stream.child("run", r as u64);
        let z0 = problem.random_domain_point(&mut s.child("start", 0).rng());
        let oracle = Oracle::new(problem, noise)?;
        let rec = sppm_run(&oracle, schedule, &z0, &s, false).map_err(|f| f.error)?;
        let mut prev = z0;
        for it in &rec.iterates {
            let lhs = problem.evaluate_phi(&it.w_bar) - opt.value - (&opt.x - &prev).norm_squared() / (2.0 * lambda)
                + (1.0 + lm) / (lambda * (4.0 + lm)) * (&opt.x - &it.z_bar).norm_squared();
            hits += usize::from(lhs <= rhs);
            total += 1;
            prev = it.z_bar.clone();
        }
    }
    Ok(Frequency { hits, total })
}

/// Frequency of more than `2n/3` successes among `n` independent events of
/// probability `3/4`, over `meta` repetitions.
pub fn hoeffding_frequency(n: usize, meta: usize, stream: &RngStream) -> Frequency {
    let mut rng = stream.child("hoeffding", n as u64).rng();
    let hits = (0..meta)
        .filter(|_| {
            let successes = (0..n).filter(|_| rng.random::<f64>() < 0.75).count();
            3 * successes > 2 * n
        })
        .count();
    Frequency { hits, total: meta }
}

/// Largest distance between [`exact_prox_point`] and the linear solve
/// `(Q + I/lambda) x = Q c + x0/lambda` over random unconstrained quadratics.
pub fn prox_point_max_error(count: usize, dim: usize, stream: &RngStream) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for t in 0..count {
        let mut rng = stream.child("quadratic", t as u64).rng();
        let a = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = a.tr_mul(&a) / dim as f64 + DMatrix::identity(dim, dim) * 0.1;
        let q = (&q + q.transpose()) * 0.5;
        let eig = q.clone().symmetric_eigen().eigenvalues;
        let c = gaussian_vector(dim, &mut rng);
        let x0 = gaussian_vector(dim, &mut rng) * 2.0;
        let lambda = rng.random_range(0.1..5.0);
        let f = Quadratic::new(q.clone(), c.clone(), 0.0)?;
        let problem = CompositeProblem::new(Arc::new(f), Regularizer::Zero, eig.min(), eig.max())?;
        let got = exact_prox_point(&problem, &x0, lambda, EXACT_TOL)?;
        let lhs = &q + DMatrix::identity(dim, dim) / lambda;
        let want = lhs.lu().solve(&(&q * &c + &x0 / lambda)).expect("positive definite");
        worst = worst.max((got - want).norm());
    }
    Ok(worst)
}

/// Smallest slack of the two-sided shifted-objective bound and of the two
/// `d_h` / Bregman comparison inequalities over random inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaSlacks {
    pub lower: f64,
    pub upper: f64,
    pub dh_le_bregman: f64,
    pub bregman_le_dh: f64,
    pub bregman_min: f64,
}

pub fn lemma_slacks(problem: &CompositeProblem, lambda: f64, count: usize, stream: &RngStream) -> Result<LemmaSlacks> {
    let h = problem.regularizer();
    let (mu, l) = (problem.mu(), problem.lipschitz());
    let mut out = LemmaSlacks {
        lower: f64::INFINITY,
        upper: f64::INFINITY,
        dh_le_bregman: f64::INFINITY,
        bregman_le_dh: f64::INFINITY,
        bregman_min: f64::INFINITY,
    };
    for t in 0..count {
        let mut rng = stream.child("input", t as u64).rng();
        let center = problem.random_domain_point(&mut rng);
        let z_hat = exact_prox_point(problem, &center, lambda, EXACT_TOL)?;
        let x = problem.random_domain_point(&mut rng);
        let g = problem.grad_f(&z_hat) + (&z_hat - &center) / lambda;
        let breg = bregman_dh(h, &x, &z_hat, &g)?;
        let gap = problem.phi_lambda(&x, &center, lambda) - problem.phi_lambda(&z_hat, &center, lambda);
        let dist2 = (&x - &z_hat).norm_squared();
        out.lower = out.lower.min(gap - ((1.0 + lambda * mu) / (2.0 * lambda) * dist2 + breg));
        out.upper = out.upper.min((1.0 + lambda * l) / (2.0 * lambda) * dist2 + breg - gap);
        out.bregman_min = out.bregman_min.min(breg);

        let s_bar = problem.grad_f(&z_hat) + gaussian_vector(problem.dim(), &mut rng) * rng.random_range(0.0..2.0);
        let w_tilde = problem.random_domain_point(&mut rng);
        let dh = make_dh(DhParams {
            h: h.clone(),
            s_bar: s_bar.clone(),
            w_tilde: w_tilde.clone(),
            z_bar: center.clone(),
            lambda,
        })?;
        let d = dh.eval(&x, &z_hat)?;
        let term = ((&s_bar - problem.grad_f(&z_hat)).norm() + (&w_tilde - &z_hat).norm() / lambda) * dist2.sqrt();
        out.dh_le_bregman = out.dh_le_bregman.min(breg + term - d);
        out.bregman_le_dh = out.bregman_le_dh.min(d + term - breg);
    }
    Ok(out)
}

/// Curvature check `mu |x-y|^2 <= <grad f(x) - grad f(y), x - y> <= L |x-y|^2`
/// over random pairs in `dom h`; returns the smallest relative slack.
pub fn curvature_slack(problem: &CompositeProblem, pairs: usize, stream: &RngStream) -> f64 {
    let mut rng = stream.child("curvature", 0).rng();
    let mut worst = f64::INFINITY;
    for _ in 0..pairs {
        let x = problem.random_domain_point(&mut rng);
        let y = problem.random_domain_point(&mut rng);
        let d2 = (&x - &y).norm_squared();
        if d2 == 0.0 {
            continue;
        }
        let inner = (problem.grad_f(&x) - problem.grad_f(&y)).dot(&(&x - &y)) / d2;
        worst = worst.min(inner - problem.mu()).min(problem.lipschitz() - inner);
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Core,
    Pss,
    Sts,
    Rge,
    Pb,
    Iteration,
    Hoeffding,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Core,
        Suite::Pss,
        Suite::Sts,
        Suite::Rge,
        Suite::Pb,
        Suite::Iteration,
        Suite::Hoeffding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Core => "core",
            Suite::Pss => "pss",
            Suite::Sts => "sts",
            Suite::Rge => "rge",
            Suite::Pb => "pb",
            Suite::Iteration => "iteration",
            Suite::Hoeffding => "hoeffding",
        }
    }
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Suite::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown suite {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub bound: f64,
}

impl Check {
    fn at_most(name: &str, measured: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            passed: measured <= bound,
            measured,
            bound,
        }
    }

    fn at_least(name: &str, measured: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            passed: measured >= bound,
            measured,
            bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub seed: u64,
    pub checks: Vec<Check>,
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    let stream = RngStream::new(seed).child("verify", suite as u64);
    let problem = reference_problem(seed)?;
    let noise = NoiseModel::gaussian(1.0)?;
    let lambda = 3.0;
    let kappa = problem.condition_number();
    let mut checks = Vec::new();
    match suite {
        Suite::Core => {
            checks.push(Check::at_most("prox_point_vs_linear_solve", prox_point_max_error(100, 6, &stream)?, 1e-8));
            let s = lemma_slacks(&problem, lambda, 1000, &stream)?;
            checks.push(Check::at_least("shifted_lower_bound_slack", s.lower, -1e-9));
            checks.push(Check::at_least("shifted_upper_bound_slack", s.upper, -1e-9));
            checks.push(Check::at_least("dh_vs_bregman_slack", s.dh_le_bregman, -1e-9));
            checks.push(Check::at_least("bregman_vs_dh_slack", s.bregman_le_dh, -1e-9));
            checks.push(Check::at_least("bregman_nonnegative", s.bregman_min, -1e-9));
            checks.push(Check::at_least("curvature_slack", curvature_slack(&problem, 1000, &stream), -1e-9));
        }
        Suite::Pss => {
            let eps_k = eps_k_at_floor(&problem, lambda, 50, 1.0);
            let f = pss_event_frequency(&problem, &noise, lambda, 50, 500, 8.0 * eps_k, &stream)?;
            checks.push(Check::at_least("per_call_event_frequency", f.rate(), 0.74));
            let mut prev: Option<MeanStat> = None;
            for i in [25, 50, 100, 200] {
                let m = pss_gap_stats(&problem, &noise, lambda, i, 300, &stream.child("inner", i as u64))?;
                let bound = eps_k_at_floor(&problem, lambda, i, 1.0);
                checks.push(Check::at_most(&format!("mean_gap_i{i}"), m.mean, bound + 3.0 * m.se));
                if let Some(p) = prev {
                    let slack = 2.0 * (p.se.powi(2) + m.se.powi(2)).sqrt();
                    checks.push(Check::at_most(&format!("mean_gap_trend_i{i}"), m.mean, p.mean + slack));
                }
                prev = Some(m);
            }
        }
        Suite::Sts => {
            let eps = 0.1;
            let p = sts_planted(200, 30, 5, eps, 9, 1e6, &stream)?;
            checks.push(Check::at_most("planted_violations", p.violations as f64, 0.0));
            checks.push(Check::at_most("selections_not_above_two_thirds", p.small_selections as f64, 0.0));
        }
        Suite::Rge => {
            let x = problem.initial_point().expect("initial point").clone();
            let (f, calls) = rge_exceed_frequency(&problem, &noise, &x, 144, 16, 1.5, 500, &stream)?;
            checks.push(Check::at_most("exceed_frequency", f.rate(), (-2.0f64).exp()));
            checks.push(Check::at_most("sample_count_error", (calls as f64 - 500.0 * 144.0 * 16.0).abs(), 0.0));
        }
        Suite::Pb => {
            let (n, tau) = (144, 0.05);
            let q = q_floor(lambda, problem.mu(), 1.0, problem.lipschitz(), tau)?;
            let rhs = 12.0 * tau + 57.0 * kappa * tau;
            let f = pb_planted_violations(&problem, &noise, lambda, n, tau, q, rhs, 100, &stream)?;
            checks.push(Check::at_most("boosted_violation_rate", f.rate(), 2.0 * (-(n as f64) / 72.0).exp() + 0.01));
        }
        Suite::Iteration => {
            let n = 72;
            let tmp = fixed_schedule(&problem, 1.0, n, 5, 50, 1);
            let q = q_floor(lambda, problem.mu(), 1.0, problem.lipschitz(), tmp.tau)?;
            let schedule = fixed_schedule(&problem, 1.0, n, 5, 50, q);
            let rhs = 12.0 * schedule.tau + 57.0 * kappa * schedule.tau;
            let f = iteration_event_frequency(&problem, &noise, &schedule, 100, rhs, &stream)?;
            let bound = 1.0 - 2.0 * (-(n as f64) / 72.0).exp() - 0.02;
            checks.push(Check::at_least("iteration_event_frequency", f.rate(), bound));
            checks.push(Check::at_least("iterations_checked", f.total as f64, 500.0));
        }
        Suite::Hoeffding => {
            for n in [30, 72, 144] {
                let f = hoeffding_frequency(n, 10_000, &stream);
                let bound = 1.0 - (-(n as f64) / 72.0).exp() - 0.01;
                checks.push(Check::at_least(&format!("majority_frequency_n{n}"), f.rate(), bound));
            }
        }
    }
    Ok(SuiteReport {
        suite: suite.name().into(),
        passed: checks.iter().all(|c| c.passed),
        seed,
        checks,
    })
}

/// Runs `suite` and writes `<out_dir>/<suite>.json`.
pub fn run_and_write(suite: Suite, seed: u64, out_dir: &Path) -> Result<SuiteReport> {
    let report = run_suite(suite, seed)?;
    ensure_dir(out_dir)?;
    write_json(&out_dir.join(format!("{}.json", suite.name())), &report)?;
    Ok(report)
}
