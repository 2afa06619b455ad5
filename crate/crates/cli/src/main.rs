use anyhow::Context;
use clap::{Parser, Subcommand};
use sppm_cli::config::{ExperimentConfig, SEED_ENV};
use sppm_cli::report::{emit_comparison, emit_report, emit_run};
use sppm_cli::verify::{run_and_write, Suite};
use sppm_cli::{compare_budget, prepare, run_trials, HarnessError};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Stdout line that tolerates a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

const EXIT_INFEASIBLE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SUITE: u8 = 3;

#[derive(Parser)]
#[command(name = "sppm", version, about = "Stochastic proximal point experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the derived schedule as JSON.
    Derive {
        #[arg(long)]
        config: PathBuf,
    },
    /// One run, written as run.json and trace.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replicated trials with failure-rate estimate.
    Trials {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// SPPM against stochastic proximal gradient at equal sample counts.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        budget: u64,
        #[arg(long)]
        out: PathBuf,
        /// Run only the baseline, on the full budget.
        #[arg(long)]
        sgd_only: bool,
    },
    /// Run a property suite and write its pass/fail JSON.
    Verify {
        #[arg(long, value_parser = parse_suite)]
        suite: Suite,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse()
}

fn load(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.apply_seed_override(std::env::var(SEED_ENV).ok().as_deref())?;
    Ok(cfg)
}

fn fail(err: HarnessError) -> ExitCode {
    eprintln!("error: {err}");
    match err {
        HarnessError::Infeasible(_) => ExitCode::from(EXIT_INFEASIBLE),
        e if e.exit_code() == 2 => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::FAILURE,
    }
}

fn run(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Derive { config } => {
            let exp = prepare(&load(&config)?)?;
            say!("{}", serde_json::to_string_pretty(&exp.schedule)?);
            if !exp.schedule.feasible {
                for m in &exp.schedule.messages {
                    eprintln!("infeasible: {m}");
                }
                return Ok(ExitCode::from(EXIT_INFEASIBLE));
            }
        }
        Command::Run { config, out } => {
            let exp = prepare(&load(&config)?)?;
            exp.ensure_runnable()?;
            let record = exp.run_one(0)?;
            for p in emit_run(&exp, &record, &out)? {
                log::info!("wrote {}", p.display());
            }
        }
        Command::Trials { config, out } => {
            let report = run_trials(&load(&config)?)?;
            emit_report(&report, &out)?;
            say!(
                "trials={} failures={} failure_rate={:.4} ci=[{:.4}, {:.4}] samples_per_trial={}",
                report.trials, report.failures, report.failure_rate, report.ci_lo, report.ci_hi, report.samples_per_trial
            );
        }
        Command::Compare {
            config,
            budget,
            out,
            sgd_only,
        } => {
            let rows = compare_budget(&load(&config)?, budget, sgd_only)?;
            emit_comparison(&rows, &out)?;
            for r in &rows {
                say!("{:<5} failure_rate={:.4} gap_p50={:.3e} samples={}", r.method, r.failure_rate, r.gap_p50, r.samples);
            }
        }
        Command::Verify { suite, out, seed } => {
            let report = run_and_write(suite, seed, &out)?;
            for c in &report.checks {
                say!(
                    "{} {} measured={:.6e} bound={:.6e}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.bound
                );
            }
            if !report.passed {
                return Ok(ExitCode::from(EXIT_SUITE));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> anyhow::Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            e.print().context("writing usage")?;
            return Ok(ExitCode::from(code));
        }
    };
    Ok(run(cli).unwrap_or_else(fail))
}
