//! Flat `key = value` experiment files with dotted section names.
//!
//! ```text
//! # comments and blank lines are ignored
//! problem.kind = quadratic-ball
//! problem.dim = 10
//! problem.mu = 1
//! problem.L = 4
//! problem.radius = 0.5
//! problem.seed = 1
//! noise.family = student-t
//! noise.sigma = 1
//! noise.nu = 3
//! algo.mode = practical
//! algo.auto.eps_rel = 0.05
//! algo.auto.p = 0.05
//! run.master_seed = 7
//! run.trials = 200
//! ```
//!
//! Unknown or repeated keys are rejected. [`ExperimentConfig::to_text`] writes
//! the canonical form, which parses back to the same config.

use crate::{HarnessError, Result};
use sppm_core::schedule::{Mode, Overrides, PracticalFactors};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

pub const SEED_ENV: &str = "SPPM_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    QuadraticBall,
    RidgeL1Box,
    LogregRidgeBall,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::QuadraticBall => "quadratic-ball",
            ProblemKind::RidgeL1Box => "ridge-l1-box",
            ProblemKind::LogregRidgeBall => "logreg-ridge-ball",
        }
    }
}

impl FromStr for ProblemKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [ProblemKind::QuadraticBall, ProblemKind::RidgeL1Box, ProblemKind::LogregRidgeBall]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown problem kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub dim: usize,
    pub mu: f64,
    pub lipschitz: f64,
    /// Ball radius (`quadratic-ball`, `logreg-ridge-ball`).
    pub radius: Option<f64>,
    /// Box half width (`ridge-l1-box`).
    pub half_width: Option<f64>,
    pub l1_weight: Option<f64>,
    /// Data pool size (`ridge-l1-box`, `logreg-ridge-ball`).
    pub samples: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    None,
    Gaussian,
    StudentT,
    Rademacher,
    Sphere,
    FiniteSum,
}

impl NoiseKind {
    const ALL: [NoiseKind; 6] = [
        NoiseKind::None,
        NoiseKind::Gaussian,
        NoiseKind::StudentT,
        NoiseKind::Rademacher,
        NoiseKind::Sphere,
        NoiseKind::FiniteSum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::None => "none",
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::StudentT => "student-t",
            NoiseKind::Rademacher => "rademacher",
            NoiseKind::Sphere => "sphere",
            NoiseKind::FiniteSum => "finite-sum",
        }
    }
}

impl FromStr for NoiseKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        NoiseKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown noise family {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub family: NoiseKind,
    /// Required for additive families; ignored by `none` and `finite-sum`.
    pub sigma: Option<f64>,
    pub nu: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Absolute(f64),
    /// Fraction of the initial gap `phi(z0) - phi*`.
    Relative(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgoSpec {
    pub mode: Mode,
    pub target: Target,
    pub p: f64,
    pub overrides: Overrides,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub master_seed: u64,
    pub trials: usize,
    pub parallelism: usize,
    pub candidate_parallel: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub noise: NoiseSpec,
    pub algo: AlgoSpec,
    pub run: RunSpec,
}

/// Key-value pairs with consumption tracking.
struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| cfg_err(format!("line {}: expected `key = value`", no + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(cfg_err(format!("line {}: empty key or value", no + 1)));
            }
            if map.insert(key.to_string(), (no + 1, value.to_string())).is_some() {
                return Err(cfg_err(format!("line {}: duplicate key {key}", no + 1)));
            }
        }
        Ok(Self { map })
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.map.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|e| cfg_err(format!("line {line}: {key} = {v}: {e}"))),
        }
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.take(key)?.ok_or_else(|| cfg_err(format!("missing required key {key}")))
    }

    fn finish(self) -> Result<()> {
        match self.map.into_iter().next() {
            None => Ok(()),
            Some((k, (line, _))) => Err(cfg_err(format!("line {line}: unknown key {k}"))),
        }
    }
}

fn cfg_err(msg: String) -> HarnessError {
    HarnessError::Config(msg)
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(cfg_err(msg()))
    }
}

impl FromStr for ExperimentConfig {
    type Err = HarnessError;
    fn from_str(text: &str) -> Result<Self> {
        Self::parse(text)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut e = Entries::parse(text)?;
        let problem = ProblemSpec {
            kind: e.require("problem.kind")?,
            dim: e.require("problem.dim")?,
            mu: e.require("problem.mu")?,
            lipschitz: e.require("problem.L")?,
            radius: e.take("problem.radius")?,
            half_width: e.take("problem.box")?,
            l1_weight: e.take("problem.l1_weight")?,
            samples: e.take("problem.samples")?,
            seed: e.require("problem.seed")?,
        };
        let noise = NoiseSpec {
            family: e.require("noise.family")?,
            sigma: e.take("noise.sigma")?,
            nu: e.take("noise.nu")?,
        };
        let mode = match e.require::<String>("algo.mode")?.as_str() {
            "verbatim" => Mode::Verbatim,
            "practical" => {
                let d = PracticalFactors::default();
                Mode::Practical(PracticalFactors {
                    tau_factor: e.take("algo.practical.tau_factor")?.unwrap_or(d.tau_factor),
                    boost_factor: e.take("algo.practical.boost_factor")?.unwrap_or(d.boost_factor),
                    n_factor: e.take("algo.practical.n_factor")?.unwrap_or(d.n_factor),
                })
            }
            other => return Err(cfg_err(format!("algo.mode must be verbatim or practical, got {other:?}"))),
        };
        let target = match (e.take("algo.auto.eps")?, e.take("algo.auto.eps_rel")?) {
            (Some(a), None) => Target::Absolute(a),
            (None, Some(r)) => Target::Relative(r),
            _ => return Err(cfg_err("exactly one of algo.auto.eps and algo.auto.eps_rel is required".into())),
        };
        let algo = AlgoSpec {
            mode,
            target,
            p: e.require("algo.auto.p")?,
            overrides: Overrides {
                lambda: e.take("algo.lambda")?,
                alpha: e.take("algo.alpha")?,
                inner_iters: e.take("algo.inner_iters")?,
                candidates_per_iter: e.take("algo.candidates")?,
                rge_batch: e.take("algo.rge_batch")?,
                outer_iters: e.take("algo.outer_iters")?,
                inner_cap: e.take("algo.inner_cap")?,
            },
        };
        let run = RunSpec {
            master_seed: e.require("run.master_seed")?,
            trials: e.require("run.trials")?,
            parallelism: e.take("run.parallelism")?.unwrap_or(1),
            candidate_parallel: e.take("run.candidate_parallel")?.unwrap_or(false),
        };
        e.finish()?;
        let cfg = Self {
            problem,
            noise,
            algo,
            run,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the keys each problem kind and noise family needs.
    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        check(p.dim >= 2, || format!("problem.dim must be at least 2, got {}", p.dim))?;
        check(p.mu > 0.0 && p.lipschitz > p.mu, || {
            format!("need 0 < problem.mu < problem.L, got mu = {}, L = {}", p.mu, p.lipschitz)
        })?;
        let ball = matches!(p.kind, ProblemKind::QuadraticBall | ProblemKind::LogregRidgeBall);
        check(ball == p.radius.is_some(), || {
            format!("problem.radius is {} for {}", if ball { "required" } else { "not accepted" }, p.kind.name())
        })?;
        let boxed = p.kind == ProblemKind::RidgeL1Box;
        check(boxed == p.half_width.is_some(), || {
            format!("problem.box is {} for {}", if boxed { "required" } else { "not accepted" }, p.kind.name())
        })?;
        check(boxed || p.l1_weight.is_none(), || "problem.l1_weight is only accepted for ridge-l1-box".into())?;
        check(p.kind != ProblemKind::QuadraticBall || p.samples.is_none(), || {
            "problem.samples is not accepted for quadratic-ball".into()
        })?;
        check(p.radius.is_none_or(|r| r > 0.0) && p.half_width.is_none_or(|w| w > 0.0), || {
            "problem.radius and problem.box must be positive".into()
        })?;

        let n = &self.noise;
        let additive = !matches!(n.family, NoiseKind::None | NoiseKind::FiniteSum);
        check(additive == n.sigma.is_some(), || {
            format!("noise.sigma is {} for {}", if additive { "required" } else { "not accepted" }, n.family.name())
        })?;
        let student = n.family == NoiseKind::StudentT;
        check(student == n.nu.is_some(), || {
            format!("noise.nu is {} for {}", if student { "required" } else { "not accepted" }, n.family.name())
        })?;
        check(n.family != NoiseKind::FiniteSum || p.kind != ProblemKind::QuadraticBall, || {
            "finite-sum noise needs ridge-l1-box or logreg-ridge-ball".into()
        })?;

        let a = &self.algo;
        let t = match a.target {
            Target::Absolute(v) | Target::Relative(v) => v,
        };
        check(t > 0.0 && t.is_finite(), || format!("eps must be positive, got {t}"))?;
        check(a.p > 0.0 && a.p < 1.0, || format!("algo.auto.p must lie in (0, 1), got {}", a.p))?;
        check(self.run.trials >= 1 && self.run.parallelism >= 1, || {
            "run.trials and run.parallelism must be at least 1".into()
        })
    }

    /// Replaces `run.master_seed` by `value` when present.
    pub fn apply_seed_override(&mut self, value: Option<&str>) -> Result<()> {
        if let Some(v) = value {
            self.run.master_seed = v
                .trim()
                .parse()
                .map_err(|e| cfg_err(format!("{SEED_ENV} = {v}: {e}")))?;
        }
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical text form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let p = &self.problem;
        put("problem.kind", p.kind.name().into());
        put("problem.dim", p.dim.to_string());
        put("problem.mu", p.mu.to_string());
        put("problem.L", p.lipschitz.to_string());
        if let Some(v) = p.radius {
            put("problem.radius", v.to_string());
        }
        if let Some(v) = p.half_width {
            put("problem.box", v.to_string());
        }
        if let Some(v) = p.l1_weight {
            put("problem.l1_weight", v.to_string());
        }
        if let Some(v) = p.samples {
            put("problem.samples", v.to_string());
        }
        put("problem.seed", p.seed.to_string());
        put("noise.family", self.noise.family.name().into());
        if let Some(v) = self.noise.sigma {
            put("noise.sigma", v.to_string());
        }
        if let Some(v) = self.noise.nu {
            put("noise.nu", v.to_string());
        }
        let a = &self.algo;
        match a.mode {
            Mode::Verbatim => put("algo.mode", "verbatim".into()),
            Mode::Practical(f) => {
                put("algo.mode", "practical".into());
                put("algo.practical.tau_factor", f.tau_factor.to_string());
                put("algo.practical.boost_factor", f.boost_factor.to_string());
                put("algo.practical.n_factor", f.n_factor.to_string());
            }
        }
        match a.target {
            Target::Absolute(v) => put("algo.auto.eps", v.to_string()),
            Target::Relative(v) => put("algo.auto.eps_rel", v.to_string()),
        }
        put("algo.auto.p", a.p.to_string());
        let o = &a.overrides;
        let opt = [
            ("algo.lambda", o.lambda.map(|v| v.to_string())),
            ("algo.alpha", o.alpha.map(|v| v.to_string())),
            ("algo.inner_iters", o.inner_iters.map(|v| v.to_string())),
            ("algo.candidates", o.candidates_per_iter.map(|v| v.to_string())),
            ("algo.rge_batch", o.rge_batch.map(|v| v.to_string())),
            ("algo.outer_iters", o.outer_iters.map(|v| v.to_string())),
            ("algo.inner_cap", o.inner_cap.map(|v| v.to_string())),
        ];
        for (k, v) in opt {
            if let Some(v) = v {
                put(k, v);
            }
        }
        put("run.master_seed", self.run.master_seed.to_string());
        put("run.trials", self.run.trials.to_string());
        put("run.parallelism", self.run.parallelism.to_string());
        put("run.candidate_parallel", self.run.candidate_parallel.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const REFERENCE: &str = "\
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
";

    #[test]
    fn parses_reference() {
        let c = ExperimentConfig::parse(REFERENCE).unwrap();
        assert_eq!(c.problem.kind, ProblemKind::QuadraticBall);
        assert_eq!(c.problem.lipschitz, 4.0);
        assert_eq!(c.noise.nu, Some(3.0));
        assert_eq!(c.algo.target, Target::Relative(0.05));
        assert_eq!(c.algo.mode, Mode::Practical(PracticalFactors::default()));
        assert_eq!((c.run.trials, c.run.parallelism, c.run.candidate_parallel), (200, 1, false));
    }

    #[test]
    fn round_trip_is_a_fixed_point() {
        let extra = format!("{REFERENCE}algo.outer_iters = 4\nalgo.lambda = 3.5\nrun.parallelism = 8\n# note\n\n");
        let c = ExperimentConfig::parse(&extra).unwrap();
        let text = c.to_text();
        let c2 = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(c, c2);
        assert_eq!(text, c2.to_text());
    }

    #[test]
    fn rejects_bad_files() {
        let bad = |t: String| ExperimentConfig::parse(&t).unwrap_err().to_string();
        assert!(bad(format!("{REFERENCE}problem.colour = red\n")).contains("unknown key problem.colour"));
        assert!(bad(format!("{REFERENCE}run.trials = 3\n")).contains("duplicate key"));
        assert!(bad(REFERENCE.replace("problem.seed = 1\n", "")).contains("missing required key problem.seed"));
        assert!(bad(REFERENCE.replace("problem.dim = 10", "problem.dim = ten")).contains("problem.dim"));
        assert!(bad(REFERENCE.replace("noise.nu = 3\n", "")).contains("noise.nu"));
        assert!(bad(REFERENCE.replace("problem.L = 4", "problem.L = 0.5")).contains("mu < problem.L"));
        assert!(bad(format!("{REFERENCE}algo.auto.eps = 0.1\n")).contains("exactly one"));
        assert!(bad(REFERENCE.replace("problem.radius = 0.5\n", "")).contains("problem.radius"));
        assert!(bad("just text\n".into()).contains("key = value"));
    }

    #[test]
    fn seed_override() {
        let mut c = ExperimentConfig::parse(REFERENCE).unwrap();
        c.apply_seed_override(None).unwrap();
        assert_eq!(c.run.master_seed, 7);
        c.apply_seed_override(Some("42")).unwrap();
        assert_eq!(c.run.master_seed, 42);
        assert!(c.apply_seed_override(Some("x")).is_err());
    }
}
