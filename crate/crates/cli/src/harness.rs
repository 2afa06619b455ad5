//! Problem generation, replicated trials and the equal-budget comparison.

use crate::config::{ExperimentConfig, NoiseKind, ProblemKind, ProblemSpec, Target};
use crate::stats::{quantile_sorted, wilson_interval, Z95};
use crate::{HarnessError, Result};
use rayon::prelude::*;
use serde::Serialize;
use sppm_core::instances::{logreg_ridge_ball, quadratic_ball, ridge_l1_box};
use sppm_core::schedule::{derive_schedule, Mode, ProblemConstants};
use sppm_core::{
    select_best, sgd_baseline, sppm_run, CompositeProblem, NoiseFamily, NoiseModel, Oracle, RealVector, RngStream,
    RunRecord, Schedule,
};
use std::time::Instant;

const DEFAULT_POOL: usize = 200;

/// Builds the problem described by `spec`, including its optimum and initial point.
pub fn generate_problem(spec: &ProblemSpec) -> Result<CompositeProblem> {
    let p = match spec.kind {
        ProblemKind::QuadraticBall => quadratic_ball(
            spec.dim,
            spec.mu,
            spec.lipschitz,
            spec.radius.ok_or_else(|| HarnessError::Config("problem.radius is required".into()))?,
            spec.seed,
        )?,
        ProblemKind::RidgeL1Box => ridge_l1_box(
            spec.dim,
            spec.mu,
            spec.lipschitz,
            spec.half_width.ok_or_else(|| HarnessError::Config("problem.box is required".into()))?,
            spec.l1_weight.unwrap_or(0.0),
            spec.samples.unwrap_or(DEFAULT_POOL.max(spec.dim)),
            spec.seed,
        )?,
        ProblemKind::LogregRidgeBall => logreg_ridge_ball(
            spec.dim,
            spec.mu,
            spec.lipschitz,
            spec.radius.ok_or_else(|| HarnessError::Config("problem.radius is required".into()))?,
            spec.samples.unwrap_or(DEFAULT_POOL),
            spec.seed,
        )?,
    };
    Ok(p)
}

/// Everything a trial needs, derived once from the config.
#[derive(Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub problem: CompositeProblem,
    pub noise: NoiseModel,
    pub z0: RealVector,
    pub phi_star: f64,
    pub initial_gap: f64,
    pub target_eps: f64,
    pub schedule: Schedule,
}

impl Experiment {
    pub fn gap(&self, x: &RealVector) -> f64 {
        self.problem.evaluate_phi(x) - self.phi_star
    }

    pub fn trial_stream(&self, trial: usize) -> RngStream {
        RngStream::new(self.config.run.master_seed).child("trial", trial as u64)
    }

    pub fn oracle(&self) -> Oracle<'_> {
        Oracle::new(&self.problem, &self.noise).expect("noise checked against problem in prepare")
    }

    /// One SPPM run on the trial substream.
    pub fn run_one(&self, trial: usize) -> Result<RunRecord> {
        let oracle = self.oracle();
        sppm_run(
            &oracle,
            &self.schedule,
            &self.z0,
            &self.trial_stream(trial),
            self.config.run.candidate_parallel,
        )
        .map_err(|f| HarnessError::Core(f.error))
    }

    /// Fails unless the schedule may be run: verbatim schedules must be feasible.
    pub fn ensure_runnable(&self) -> Result<()> {
        if self.schedule.mode == Mode::Verbatim && !self.schedule.feasible {
            return Err(HarnessError::Infeasible(self.schedule.messages.clone()));
        }
        Ok(())
    }
}

/// Generates the problem, the noise model and the schedule.
pub fn prepare(config: &ExperimentConfig) -> Result<Experiment> {
    config.validate()?;
    let problem = generate_problem(&config.problem)?;
    let z0 = problem
        .initial_point()
        .cloned()
        .ok_or_else(|| HarnessError::Config("generated problem has no initial point".into()))?;
    let optimum = problem
        .optimum()
        .cloned()
        .ok_or_else(|| HarnessError::Config("generated problem has no stored optimum".into()))?;
    let n = &config.noise;
    let noise = match n.family {
        NoiseKind::None => NoiseModel::noiseless(),
        NoiseKind::FiniteSum => NoiseModel::finite_sum(&problem, &z0)?,
        kind => {
            let sigma = n.sigma.unwrap_or(0.0);
            let family = match kind {
                NoiseKind::Gaussian => NoiseFamily::Gaussian,
                NoiseKind::StudentT => NoiseFamily::StudentT { nu: n.nu.unwrap_or(0.0) },
                NoiseKind::Rademacher => NoiseFamily::Rademacher,
                _ => NoiseFamily::Sphere,
            };
            NoiseModel::new(family, sigma)?
        }
    };
    Oracle::new(&problem, &noise)?;
    let initial_gap = problem.evaluate_phi(&z0) - optimum.value;
    let target_eps = match config.algo.target {
        Target::Absolute(e) => e,
        Target::Relative(r) => r * initial_gap,
    };
    let diameter = problem
        .diameter()
        .ok_or_else(|| HarnessError::Config("problem domain must be bounded".into()))?;
    let constants = ProblemConstants {
        mu: problem.mu(),
        lipschitz: problem.lipschitz(),
        sigma: noise.sigma(),
        diameter,
    };
    let schedule = derive_schedule(&constants, target_eps, config.algo.p, &config.algo.mode, &config.algo.overrides)?;
    Ok(Experiment {
        config: config.clone(),
        problem,
        noise,
        z0,
        phi_star: optimum.value,
        initial_gap,
        target_eps,
        schedule,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    /// Key of the trial substream.
    pub seed: u64,
    pub best_k: usize,
    pub best_gap: f64,
    pub failed: bool,
    pub samples: u64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub trials: usize,
    pub failures: usize,
    pub failure_rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub target_eps: f64,
    pub target_p: f64,
    pub initial_gap: f64,
    pub phi_star: f64,
    pub samples_per_trial: u64,
    pub master_seed: u64,
    pub schedule: Schedule,
    pub records: Vec<TrialRecord>,
}

impl TrialReport {
    /// Aggregates records given in trial order.
    pub fn from_records(exp: &Experiment, records: Vec<TrialRecord>) -> Self {
        let trials = records.len();
        let failures = records.iter().filter(|r| r.failed).count();
        let (ci_lo, ci_hi) = wilson_interval(failures, trials, Z95);
        TrialReport {
            trials,
            failures,
            failure_rate: if trials == 0 { 0.0 } else { failures as f64 / trials as f64 },
            ci_lo,
            ci_hi,
            target_eps: exp.target_eps,
            target_p: exp.config.algo.p,
            initial_gap: exp.initial_gap,
            phi_star: exp.phi_star,
            samples_per_trial: exp.schedule.total_samples(),
            master_seed: exp.config.run.master_seed,
            schedule: exp.schedule.clone(),
            records,
        }
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot build a pool of {threads} threads: {e}")))
}

/// Runs `f(t)` for every trial on a pool of `run.parallelism` threads,
/// returning results in trial order.
fn map_trials<T: Send>(exp: &Experiment, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let trials = exp.config.run.trials;
    pool(exp.config.run.parallelism)?.install(|| (0..trials).into_par_iter().map(&f).collect())
}

/// `M` independent runs with best-iterate selection and exact gaps.
pub fn run_trials(config: &ExperimentConfig) -> Result<TrialReport> {
    let exp = prepare(config)?;
    exp.ensure_runnable()?;
    let records = map_trials(&exp, |t| {
        let start = Instant::now();
        let rec = exp.run_one(t)?;
        let (best_k, w) = select_best(&exp.problem, &rec)?;
        let best_gap = exp.gap(&w);
        Ok(TrialRecord {
            trial: t,
            seed: exp.trial_stream(t).key(),
            best_k,
            best_gap,
            failed: best_gap > exp.target_eps,
            samples: rec.total_samples,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    })?;
    Ok(TrialReport::from_records(&exp, records))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub method: String,
    pub trials: usize,
    pub failure_rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub gap_p50: f64,
    pub gap_p90: f64,
    pub gap_p95: f64,
    pub gap_p99: f64,
    pub samples: u64,
}

fn summarize(method: &str, mut gaps: Vec<f64>, eps: f64, samples: u64) -> ComparisonRow {
    let trials = gaps.len();
    let failures = gaps.iter().filter(|&&g| g > eps).count();
    let (ci_lo, ci_hi) = wilson_interval(failures, trials, Z95);
    gaps.sort_by(f64::total_cmp);
    ComparisonRow {
        method: method.to_string(),
        trials,
        failure_rate: if trials == 0 { 0.0 } else { failures as f64 / trials as f64 },
        ci_lo,
        ci_hi,
        gap_p50: quantile_sorted(&gaps, 0.50),
        gap_p90: quantile_sorted(&gaps, 0.90),
        gap_p95: quantile_sorted(&gaps, 0.95),
        gap_p99: quantile_sorted(&gaps, 0.99),
        samples,
    }
}

/// SPPM against the stochastic proximal gradient baseline over `M` trials.
///
/// Both methods consume `total_samples(schedule)` samples per trial, which must
/// not exceed `budget`. With `sgd_only`, only the baseline runs, on `budget` samples.
pub fn compare_budget(config: &ExperimentConfig, budget: u64, sgd_only: bool) -> Result<Vec<ComparisonRow>> {
    let exp = prepare(config)?;
    let sgd = |samples: u64| {
        map_trials(&exp, |t| {
            let oracle = exp.oracle();
            let x = sgd_baseline(&oracle, &exp.z0, samples, &exp.trial_stream(t).child("baseline", 0))?;
            Ok(exp.gap(&x))
        })
    };
    if sgd_only {
        return Ok(vec![summarize("sgd", sgd(budget)?, exp.target_eps, budget)]);
    }
    exp.ensure_runnable()?;
    let needed = exp.schedule.total_samples();
    if budget < needed {
        return Err(HarnessError::Config(format!(
            "budget {budget} is below the schedule total of {needed} samples"
        )));
    }
    let sppm_gaps = map_trials(&exp, |t| {
        let rec = exp.run_one(t)?;
        let (_, w) = select_best(&exp.problem, &rec)?;
        Ok(exp.gap(&w))
    })?;
    Ok(vec![
        summarize("sppm", sppm_gaps, exp.target_eps, needed),
        summarize("sgd", sgd(needed)?, exp.target_eps, needed),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(extra: &str) -> ExperimentConfig {
        let text = format!(
            "problem.kind = quadratic-ball
problem.dim = 4
problem.mu = 1
problem.L = 4
problem.radius = 0.5
problem.seed = 3
noise.family = gaussian
noise.sigma = 1
algo.mode = practical
algo.auto.eps_rel = 0.1
algo.auto.p = 0.1
run.master_seed = 11
run.trials = 6
{extra}"
        );
        ExperimentConfig::parse(&text).unwrap()
    }

    #[test]
    fn generated_quadratic_has_declared_spectrum() {
        let mut spec = config("").problem;
        spec.dim = 2;
        spec.lipschitz = 2.0;
        let p = generate_problem(&spec).unwrap();
        let q = p.smooth();
        // Hessian from gradient differences along the basis
        let x0 = RealVector::zeros(2);
        let g0 = q.gradient(&x0);
        let h = nalgebra::DMatrix::from_fn(2, 2, |i, j| {
            let mut e = RealVector::zeros(2);
            e[j] = 1.0;
            (q.gradient(&e) - &g0)[i]
        });
        let mut eig: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        assert!((eig[0] - 1.0).abs() < 1e-12 && (eig[1] - 2.0).abs() < 1e-12, "{eig:?}");
        let again = generate_problem(&spec).unwrap();
        assert_eq!(p.initial_point(), again.initial_point());
        assert_eq!(p.optimum(), again.optimum());
    }

    #[test]
    fn every_kind_prepares() {
        for extra in [
            "",
            "noise.family = none\n",
        ] {
            let mut text = config("").to_text();
            if !extra.is_empty() {
                text = text.replace("noise.family = gaussian\nnoise.sigma = 1\n", extra);
            }
            let exp = prepare(&ExperimentConfig::parse(&text).unwrap()).unwrap();
            assert!(exp.schedule.feasible);
        }
        let ridge = config("")
            .to_text()
            .replace("quadratic-ball", "ridge-l1-box")
            .replace("problem.radius = 0.5", "problem.box = 1\nproblem.l1_weight = 0.1\nproblem.samples = 50")
            .replace("noise.family = gaussian\nnoise.sigma = 1", "noise.family = finite-sum");
        let exp = prepare(&ExperimentConfig::parse(&ridge).unwrap()).unwrap();
        assert!(exp.noise.sigma() > 0.0);
        let logreg = config("")
            .to_text()
            .replace("quadratic-ball", "logreg-ridge-ball")
            .replace("noise.family = gaussian", "noise.family = sphere");
        let exp = prepare(&ExperimentConfig::parse(&logreg).unwrap()).unwrap();
        assert!(exp.initial_gap > 0.0);
    }

    #[test]
    fn noiseless_trials_never_fail() {
        let text = config("").to_text().replace("noise.family = gaussian\nnoise.sigma = 1\n", "noise.family = none\n");
        let r = run_trials(&ExperimentConfig::parse(&text).unwrap()).unwrap();
        assert_eq!((r.trials, r.failures), (6, 0));
        assert!(r.records.iter().all(|t| t.samples == r.samples_per_trial));
    }

    #[test]
    fn report_is_order_and_thread_independent() {
        let strip = |mut r: TrialReport| {
            r.records.iter_mut().for_each(|t| t.wall_ms = 0.0);
            r
        };
        let a = strip(run_trials(&config("")).unwrap());
        let b = strip(run_trials(&config("run.parallelism = 3\nrun.candidate_parallel = true\n")).unwrap());
        assert_eq!(a, b);
        let seeds: std::collections::BTreeSet<_> = a.records.iter().map(|t| t.seed).collect();
        assert_eq!(seeds.len(), a.trials);
        assert!(a.ci_lo <= a.failure_rate && a.failure_rate <= a.ci_hi);
    }

    #[test]
    fn interval_covers_planted_rate() {
        let exp = prepare(&config("")).unwrap();
        let rate = 0.1;
        let mut covered = 0;
        for rep in 0..100u64 {
            let mut rng = RngStream::new(rep).rng();
            let records = (0..200)
                .map(|t| {
                    let failed = rand::Rng::random::<f64>(&mut rng) < rate;
                    TrialRecord {
                        trial: t,
                        seed: 0,
                        best_k: 1,
                        best_gap: if failed { 1.0 } else { 0.0 },
                        failed,
                        samples: 0,
                        wall_ms: 0.0,
                    }
                })
                .collect();
            let r = TrialReport::from_records(&exp, records);
            covered += usize::from(r.ci_lo <= rate && rate <= r.ci_hi);
        }
        assert!(covered >= 93, "{covered}/100");
    }

    #[test]
    fn comparison_budget_rules() {
        let mut cfg = config("");
        cfg.run.trials = 3;
        let exp = prepare(&cfg).unwrap();
        let total = exp.schedule.total_samples();
        let err = compare_budget(&cfg, total - 1, false).unwrap_err().to_string();
        assert!(err.contains(&(total - 1).to_string()) && err.contains(&total.to_string()));
        let rows = compare_budget(&cfg, total + 10, false).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].samples, rows[1].samples);
        assert_eq!(rows[0].trials, 3);
        let only = compare_budget(&cfg, 100, true).unwrap();
        assert_eq!((only.len(), only[0].samples), (1, 100));
    }

    #[test]
    fn verbatim_reference_is_reported_infeasible() {
        let text = config("").to_text().replace(
            "algo.mode = practical\nalgo.practical.tau_factor = 1\nalgo.practical.boost_factor = 1\nalgo.practical.n_factor = 8\n",
            "algo.mode = verbatim\n",
        );
        let err = run_trials(&ExperimentConfig::parse(&text).unwrap()).unwrap_err();
        assert!(matches!(err, HarnessError::Infeasible(_)));
        assert!(err.to_string().contains("bias floor exceeded"));
        assert_eq!(err.exit_code(), 1);
    }
}
