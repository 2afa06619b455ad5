//! Report files: `summary.json`, `trials.csv`, `schedule.json`, single-run
//! traces and comparison tables.

use crate::harness::{ComparisonRow, Experiment, TrialReport};
use crate::{HarnessError, Result};
use serde::Serialize;
use sppm_core::{select_best, RunRecord};
use std::fs;
use std::path::{Path, PathBuf};

pub const TRIALS_COLUMNS: [&str; 7] = ["trial", "seed", "best_k", "best_gap", "failed", "samples", "wall_ms"];
pub const TRACE_COLUMNS: [&str; 5] = ["k", "phi_wbar", "gap", "dist_z_to_opt", "samples_cum"];
pub const COMPARISON_COLUMNS: [&str; 10] = [
    "method",
    "trials",
    "failure_rate",
    "ci_lo",
    "ci_hi",
    "gap_p50",
    "gap_p90",
    "gap_p95",
    "gap_p99",
    "samples",
];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    fs::write(path, body).map_err(io_err(path))
}

/// Writes `rows` under an explicit header, so an empty table still has one.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let err = csv_err(path);
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(&err)?;
    w.write_record(header).map_err(&err)?;
    for row in rows {
        w.serialize(row).map_err(&err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `summary.json`, `trials.csv` and `schedule.json` into `out_dir`.
pub fn emit_report(report: &TrialReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out_dir)?;
    let summary = out_dir.join("summary.json");
    let trials = out_dir.join("trials.csv");
    let schedule = out_dir.join("schedule.json");
    write_json(&summary, report)?;
    write_csv(&trials, &TRIALS_COLUMNS, &report.records)?;
    write_json(&schedule, &report.schedule)?;
    Ok(vec![summary, trials, schedule])
}

pub fn emit_comparison(rows: &[ComparisonRow], out_dir: &Path) -> Result<PathBuf> {
    ensure_dir(out_dir)?;
    let path = out_dir.join("comparison.csv");
    write_csv(&path, &COMPARISON_COLUMNS, rows)?;
    Ok(path)
}

#[derive(Debug, Serialize)]
struct TraceRow {
    k: usize,
    phi_wbar: f64,
    gap: f64,
    dist_z_to_opt: f64,
    samples_cum: u64,
}

#[derive(Debug, Serialize)]
struct IterateJson {
    k: usize,
    selected_index: usize,
    z_bar: Vec<f64>,
    w_bar: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct RunJson<'a> {
    master_seed: u64,
    total_samples: u64,
    per_iter_samples: &'a [u64],
    best_k: usize,
    best_gap: f64,
    target_eps: f64,
    phi_star: f64,
    schedule: &'a sppm_core::Schedule,
    iterates: Vec<IterateJson>,
}

/// Writes `run.json` and `trace.csv` for one run.
pub fn emit_run(exp: &Experiment, record: &RunRecord, out_dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out_dir)?;
    let x_star = &exp.problem.optimum().expect("prepared problems store an optimum").x;
    let mut cum = 0;
    let trace: Vec<TraceRow> = record
        .iterates
        .iter()
        .zip(&record.per_iter_samples)
        .enumerate()
        .map(|(i, (it, &s))| {
            cum += s;
            let phi = exp.problem.evaluate_phi(&it.w_bar);
            TraceRow {
                k: i + 1,
                phi_wbar: phi,
                gap: phi - exp.phi_star,
                dist_z_to_opt: (&it.z_bar - x_star).norm(),
                samples_cum: cum,
            }
        })
        .collect();
    let (best_k, w) = select_best(&exp.problem, record)?;
    let body = RunJson {
        master_seed: record.master_seed,
        total_samples: record.total_samples,
        per_iter_samples: &record.per_iter_samples,
        best_k,
        best_gap: exp.gap(&w),
        target_eps: exp.target_eps,
        phi_star: exp.phi_star,
        schedule: &record.schedule,
        iterates: record
            .iterates
            .iter()
            .enumerate()
            .map(|(i, it)| IterateJson {
                k: i + 1,
                selected_index: it.selected_index,
                z_bar: it.z_bar.iter().copied().collect(),
                w_bar: it.w_bar.iter().copied().collect(),
            })
            .collect(),
    };
    let run = out_dir.join("run.json");
    let trace_path = out_dir.join("trace.csv");
    write_json(&run, &body)?;
    write_csv(&trace_path, &TRACE_COLUMNS, &trace)?;
    Ok(vec![run, trace_path])
}
