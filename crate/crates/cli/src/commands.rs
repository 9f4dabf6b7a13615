//! Runs an experiment and writes its files under `output_dir`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::config::ExperimentConfig;
use crate::environments::Environment;
use crate::error::{CliError, Result};
use crate::experiments::{self, with_workers};
use crate::output::{opt_real, real, write_csv, write_json, Metadata, Table};

/// Subcommand selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Bench,
    Consistency,
    RelevanceMap,
    Diagnostics { smoke: bool },
}

impl Command {
    pub fn id(self) -> &'static str {
        match self {
            Self::Bench => "bench",
            Self::Consistency => "consistency",
            Self::RelevanceMap => "relevance-map",
            Self::Diagnostics { .. } => "diagnostics",
        }
    }
}

/// Files written by a run, plus per-trial wall times when the command has
/// trials.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub wall_times: Vec<(String, Duration)>,
}

/// Runs `command` with `workers` threads. Diagnostics failures are reported
/// as [`CliError::ChecksFailed`] after the files are written.
pub fn run(command: Command, cfg: &ExperimentConfig, workers: usize) -> Result<RunOutput> {
    cfg.validate()?;
    let env = cfg.env.load()?;
    let out_dir = cfg.output_dir.as_path();
    with_workers(workers, || match command {
        Command::Bench => bench(&env, cfg, out_dir),
        Command::Consistency => consistency(&env, cfg, out_dir),
        Command::RelevanceMap => relevance_map(&env, cfg, out_dir),
        Command::Diagnostics { smoke } => diagnostics(&env, cfg, out_dir, smoke),
    })?
}

/// Writes wall times as `label,seconds` lines.
pub fn write_timings(path: &Path, wall_times: &[(String, Duration)]) -> Result<()> {
    let mut text = String::from("label,seconds\n");
    for (label, d) in wall_times {
        let _ = writeln!(text, "{label},{}", real(d.as_secs_f64()));
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn alpha_cell(alpha: Option<f64>) -> String {
    opt_real(alpha)
}

fn bench(env: &Environment, cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutput> {
    let result = experiments::run_benchmark(env, cfg)?;
    let meta = Metadata::new("bench", &cfg.env.to_string(), result.truth, cfg);
    let mut trials = Table::new(&[
        "trial",
        "seed",
        "estimator",
        "alpha",
        "estimate",
        "mean_effective_length",
        "relevant_states",
        "failure",
    ]);
    let mut wall_times = Vec::with_capacity(result.records.len());
    for r in &result.records {
        let relevant: Vec<String> = r.relevant_states.iter().map(usize::to_string).collect();
        trials.push(vec![
            r.trial.to_string(),
            r.seed.to_string(),
            r.estimator.id().into(),
            alpha_cell(r.alpha),
            opt_real(r.estimate),
            opt_real(r.mean_effective_length),
            relevant.join(" "),
            r.failure.clone().unwrap_or_default(),
        ]);
        let alpha = r.alpha.map(|a| format!("@{a}")).unwrap_or_default();
        wall_times.push((format!("trial {} {}{alpha}", r.trial, r.estimator), r.wall_time));
    }
    let mut summary = Table::new(&["estimator", "alpha", "n_ok", "n_failed", "mean", "std", "rmse"]);
    for s in &result.summary {
        summary.push(vec![
            s.estimator.id().into(),
            alpha_cell(s.alpha),
            s.n_ok.to_string(),
            s.n_failed.to_string(),
            real(s.mean),
            real(s.std),
            real(s.rmse),
        ]);
    }
    let files = vec![
        dir.join("bench_trials.csv"),
        dir.join("bench_summary.csv"),
        dir.join("bench_summary.json"),
    ];
    write_csv(&files[0], &meta, &trials)?;
    write_csv(&files[1], &meta, &summary)?;
    write_json(&files[2], &meta, &result.summary)?;
    Ok(RunOutput { files, wall_times })
}

fn consistency(env: &Environment, cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutput> {
    let result = experiments::run_consistency_sweep(env, cfg)?;
    let meta = Metadata::new("consistency", &cfg.env.to_string(), result.truth, cfg);
    let mut long = Table::new(&["batch_size", "alpha", "trial", "estimate", "wis", "failure"]);
    for r in &result.records {
        long.push(vec![
            r.batch_size.to_string(),
            real(r.alpha),
            r.trial.to_string(),
            opt_real(r.estimate),
            opt_real(r.wis),
            r.failure.clone().unwrap_or_default(),
        ]);
    }
    let mut cells = Table::new(&["batch_size", "alpha", "n_ok", "mean", "std", "bias", "truth"]);
    for c in &result.cells {
        cells.push(vec![
            c.batch_size.to_string(),
            real(c.alpha),
            c.n_ok.to_string(),
            real(c.mean),
            real(c.std),
            real(c.bias),
            real(result.truth),
        ]);
    }
    let files = vec![dir.join("consistency.csv"), dir.join("consistency_summary.csv")];
    write_csv(&files[0], &meta, &long)?;
    write_csv(&files[1], &meta, &cells)?;
    Ok(RunOutput {
        files,
        wall_times: Vec::new(),
    })
}

fn relevance_map(env: &Environment, cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutput> {
    let result = experiments::run_relevance_map(env, cfg)?;
    let meta = Metadata::new("relevance-map", &cfg.env.to_string(), result.truth, cfg);
    let mut table = Table::new(&[
        "alpha",
        "state",
        "row",
        "col",
        "kind",
        "mean_theta",
        "visits",
        "trials_visited",
        "true_relevance",
    ]);
    let cell = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    for s in &result.states {
        table.push(vec![
            real(s.alpha),
            s.state.to_string(),
            cell(s.row),
            cell(s.col),
            s.kind.id().into(),
            real(s.mean_theta),
            s.visits.to_string(),
            s.trials_visited.to_string(),
            u8::from(s.true_relevance).to_string(),
        ]);
    }
    let files = vec![dir.join("relevance_map.csv")];
    write_csv(&files[0], &meta, &table)?;
    Ok(RunOutput {
        files,
        wall_times: Vec::new(),
    })
}

fn diagnostics(env: &Environment, cfg: &ExperimentConfig, dir: &Path, smoke: bool) -> Result<RunOutput> {
    let result = experiments::run_diagnostics(env, cfg, smoke)?;
    let meta = Metadata::new("diagnostics", &cfg.env.to_string(), result.truth, cfg);
    let mut files = vec![dir.join("diagnostics.json")];
    write_json(&files[0], &meta, &result)?;
    if let Some(corr) = &result.correlation {
        let mut points = Table::new(&["effective_length", "log_weight"]);
        for &(len, w) in &corr.points {
            points.push(vec![real(len), real(w)]);
        }
        let mut weights = Table::new(&["alpha", "weight"]);
        for a in &corr.weights_by_alpha {
            for &w in &a.weights {
                weights.push(vec![real(a.alpha), real(w)]);
            }
        }
        files.push(dir.join("weight_length_points.csv"));
        files.push(dir.join("weights_by_alpha.csv"));
        write_csv(&files[1], &meta, &points)?;
        write_csv(&files[2], &meta, &weights)?;
    }
    let failed = result.failed();
    if failed > 0 {
        return Err(CliError::ChecksFailed {
            failed,
            total: result.checks.len(),
        });
    }
    Ok(RunOutput {
        files,
        wall_times: Vec::new(),
    })
}
