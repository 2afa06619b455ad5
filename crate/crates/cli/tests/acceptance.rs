//! Acceptance criteria at their stated tolerances. Each test writes one
//! `criterion N: PASS|FAIL ...` line to stderr (uncaptured).

use sppm_cli::config::ExperimentConfig;
use sppm_cli::verify::{
    hoeffding_frequency, lemma_slacks, pb_planted_violations, prox_point_max_error, pss_event_frequency,
    pss_gap_stats, reference_problem, rge_exceed_frequency, sts_planted,
};
use sppm_cli::{prepare, run_trials};
use sppm_core::schedule::{derive_schedule, Mode, Overrides, ProblemConstants};
use sppm_core::{sppm_run, NoiseModel, Oracle, RngStream};
use std::io::Write;
use std::process::{Command, Stdio};
use std::time::Instant;

const SEED: u64 = 20_240_601;
const LAMBDA: f64 = 3.0;
const MU: f64 = 1.0;
const L: f64 = 4.0;
const KAPPA: f64 = 4.0;
const SIGMA: f64 = 1.0;
const D: f64 = 1.0;

fn report(id: u32, passed: bool, detail: String, start: Instant) {
    let line = format!(
        "criterion {id}: {} {detail} ({:.1}s)\n",
        if passed { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(passed, "criterion {id} failed: {detail}");
}

/// Per-call bound at the floor weight, written out from its definition.
fn eps_k(i: usize) -> f64 {
    let a = i as f64 / 2.0 + LAMBDA * L;
    let alpha = a / (1.0 + a);
    alpha.powi(i as i32) * (SIGMA * D + L * D * D / 2.0) + LAMBDA * SIGMA * SIGMA / i as f64
}

fn stream(id: u64) -> RngStream {
    RngStream::new(SEED).child("criterion", id)
}

#[test]
fn criterion_01_per_call_event() {
    let start = Instant::now();
    let problem = reference_problem(SEED).unwrap();
    let noise = NoiseModel::gaussian(SIGMA).unwrap();
    let rhs = 8.0 * eps_k(50);
    let f = pss_event_frequency(&problem, &noise, LAMBDA, 50, 2000, rhs, &stream(1)).unwrap();
    report(
        1,
        f.rate() >= 0.74,
        format!("I = 50, {} calls, event frequency {:.4} >= 0.74 (rhs 8 eps_k = {rhs:.4})", f.total, f.rate()),
        start,
    );
}

#[test]
fn criterion_02_mean_bound_and_trend() {
    let start = Instant::now();
    let problem = reference_problem(SEED).unwrap();
    let noise = NoiseModel::gaussian(SIGMA).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in [25usize, 50, 100, 200] {
        let m = pss_gap_stats(&problem, &noise, LAMBDA, i, 1000, &stream(2).child("inner", i as u64)).unwrap();
        let bound = eps_k(i);
        ok &= m.mean <= bound + 3.0 * m.se;
        if let Some((pm, pse)) = prev {
            ok &= m.mean <= pm + 2.0 * (pse * pse + m.se * m.se).sqrt();
        }
        parts.push(format!("I={i}: {:.4}+-{:.4} (bound {bound:.4})", m.mean, m.se));
        prev = Some((m.mean, m.se));
    }
    report(2, ok, format!("M = 1000, {}", parts.join(", ")), start);
}

#[test]
fn criterion_03_sts_three_eps() {
    let start = Instant::now();
    let p = sts_planted(200, 30, 10, 0.01, 9, 1e6, &stream(3)).unwrap();
    report(
        3,
        p.violations == 0 && p.small_selections == 0,
        format!("200 configs, n = 30, <= 9 outliers at 1e6: {} violations of 3 eps among {} selected", p.violations, p.selected),
        start,
    );
}

#[test]
fn criterion_04_rge() {
    let start = Instant::now();
    let problem = reference_problem(SEED).unwrap();
    let noise = NoiseModel::gaussian(SIGMA).unwrap();
    let x = problem.initial_point().unwrap().clone();
    let (delta, q, n, trials) = (0.5, 16, 144, 2000);
    assert!(q as f64 >= 4.0 * SIGMA * SIGMA / (delta * delta));
    let (f, calls) = rge_exceed_frequency(&problem, &noise, &x, n, q, 3.0 * delta, trials, &stream(4)).unwrap();
    let bound = (-(n as f64) / 72.0).exp();
    report(
        4,
        f.rate() <= bound && calls == (trials * n * q) as u64,
        format!("frequency of error > 3 delta {:.4} <= {bound:.4}, {calls} samples", f.rate()),
        start,
    );
}

#[test]
fn criterion_05_boosted_guarantee() {
    let start = Instant::now();
    let problem = reference_problem(SEED).unwrap();
    let noise = NoiseModel::gaussian(SIGMA).unwrap();
    let (n, tau, trials) = (288, 0.05, 500);
    let q = (18.0 * (1.0 + LAMBDA * MU) * SIGMA * SIGMA / (LAMBDA * L * L * tau)).ceil() as usize;
    let rhs = 12.0 * tau + 57.0 * KAPPA * tau;
    let f = pb_planted_violations(&problem, &noise, LAMBDA, n, tau, q, rhs, trials, &stream(5)).unwrap();
    let bound = 2.0 * (-4.0f64).exp() + 0.01;
    report(
        5,
        f.rate() <= bound,
        format!("n = {n}, q = {q}, {trials} trials: violation rate {:.4} <= {bound:.4}", f.rate()),
        start,
    );
}

const HEAVY_TAIL: &str = "\
problem.kind = quadratic-ball
problem.dim = 10
problem.mu = 1
problem.L = 4
problem.radius = 0.5
problem.seed = 1
noise.family = student-t
noise.sigma = 1
noise.nu = 3
algo.mode = practical
algo.auto.eps_rel = 0.05
algo.auto.p = 0.05
run.master_seed = 7
run.trials = 200
run.parallelism = 4
";

#[test]
fn criterion_06_end_to_end_heavy_tail() {
    let start = Instant::now();
    let cfg = ExperimentConfig::parse(HEAVY_TAIL).unwrap();
    let verbatim = prepare(&ExperimentConfig::parse(&HEAVY_TAIL.replace("algo.mode = practical", "algo.mode = verbatim")).unwrap()).unwrap();
    assert!(!verbatim.schedule.feasible);
    let r = run_trials(&cfg).unwrap();
    let s = &r.schedule;
    report(
        6,
        r.failure_rate <= 0.05,
        format!(
            "practical mode, M = {}: failure rate {:.4} (Wilson upper {:.4}) <= 0.05; K={} I={} n={} q={}; verbatim: {}",
            r.trials,
            r.failure_rate,
            r.ci_hi,
            s.outer_iters,
            s.inner_iters,
            s.candidates_per_iter,
            s.rge_batch,
            verbatim.schedule.messages.join("; ")
        ),
        start,
    );
}

#[test]
fn criterion_07_accounting_and_log_scaling() {
    let start = Instant::now();
    let problem = reference_problem(SEED).unwrap();
    let noise = NoiseModel::gaussian(SIGMA).unwrap();
    let (k, i, q) = (2usize, 5usize, 2usize);
    let constants = ProblemConstants {
        mu: MU,
        lipschitz: L,
        sigma: SIGMA,
        diameter: D,
    };
    let overrides = Overrides {
        outer_iters: Some(k),
        inner_iters: Some(i),
        rge_batch: Some(q),
        ..Default::default()
    };
    let z0 = problem.initial_point().unwrap().clone();
    let mut ok = true;
    let mut ns = Vec::new();
    for e in 1..=6 {
        let p = 10f64.powi(-e);
        let s = derive_schedule(&constants, 0.1, p, &Mode::Verbatim, &overrides).unwrap();
        let n = (72.0 * (2.0 * k as f64 / p).ln()).ceil() as u64;
        let formula = n * k as u64 * (i as u64 + 1) + n * k as u64 * q as u64;
        let oracle = Oracle::new(&problem, &noise).unwrap();
        let rec = sppm_run(&oracle, &s, &z0, &stream(7).child("p", e as u64), false).unwrap();
        ok &= s.candidates_per_iter as u64 == n && oracle.calls() == formula && rec.total_samples == formula;
        ns.push(format!("p=1e-{e}: n={n} samples={}", oracle.calls()));
    }
    report(7, ok, format!("K={k} I={i} q={q}: {}", ns.join(", ")), start);
}

#[test]
fn criterion_08_ground_truth() {
    let start = Instant::now();
    let err = prox_point_max_error(100, 8, &stream(8)).unwrap();
    let problem = reference_problem(SEED).unwrap();
    let s = lemma_slacks(&problem, LAMBDA, 1000, &stream(8).child("lemmas", 0)).unwrap();
    let min_slack = s.lower.min(s.upper).min(s.dh_le_bregman).min(s.bregman_le_dh);
    report(
        8,
        err <= 1e-8 && min_slack >= -1e-9,
        format!("max prox-point error {err:.2e} <= 1e-8, min inequality slack {min_slack:.2e} >= -1e-9"),
        start,
    );
}

#[test]
fn criterion_09_majority_of_events() {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [30usize, 72, 144] {
        let f = hoeffding_frequency(n, 10_000, &stream(9));
        let bound = 1.0 - (-(n as f64) / 72.0).exp() - 0.01;
        ok &= f.rate() >= bound;
        parts.push(format!("n={n}: {:.4} >= {bound:.4}", f.rate()));
    }
    report(9, ok, parts.join(", "), start);
}

fn trials_summary(dir: &std::path::Path, parallelism: usize) -> String {
    let cfg = HEAVY_TAIL
        .replace("run.trials = 200", "run.trials = 40")
        .replace("run.parallelism = 4", &format!("run.parallelism = {parallelism}"));
    let path = dir.join(format!("p{parallelism}.cfg"));
    std::fs::write(&path, cfg).unwrap();
    let out = dir.join(format!("out{parallelism}"));
    let status = Command::new(env!("CARGO_BIN_EXE_sppm"))
        .args(["trials", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&out)
        .env_remove("SPPM_SEED")
        .stdout(Stdio::null())
        .status()
        .unwrap();
    assert!(status.success());
    let body = std::fs::read_to_string(out.join("summary.json")).unwrap();
    body.lines()
        .filter(|l| !l.trim_start().starts_with("\"wall_ms\""))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn criterion_10_determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let one = trials_summary(dir.path(), 1);
    let eight = trials_summary(dir.path(), 8);
    report(
        10,
        one == eight,
        format!("summary.json at parallelism 1 and 8 identical without wall time ({} bytes)", one.len()),
        start,
    );
}
