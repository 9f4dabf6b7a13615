//! Seeded experiments: benchmark table, consistency sweep, relevance maps and
//! identity diagnostics.
//!
//! Trial `i` draws everything from seeds derived from `(config.seed, i)`, and
//! results are collected in trial order, so outputs do not depend on the
//! number of worker threads.

use std::time::{Duration, Instant};

use osiris_core::diagnostics::{
    check_bias_identity, check_length_propositions, check_omitted_mean, check_variance_identity,
    weight_length_analysis, CorrelationReport, IdentityCheckReport, PropositionReport, Tolerance,
};
use osiris_core::dp::{self, DEFAULT_RELEVANCE_TOL};
use osiris_core::estimators::{self, EstimatorKind, EstimatorReport, WeightConfig};
use osiris_core::relevance::estimate_relevance_map;
use osiris_core::rng::mix;
use osiris_core::testbeds;
use osiris_core::trajectory::sample_batch;
use osiris_core::{Policy, Relevance, TimedRelevance, TrajectoryBatch};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::environments::Environment;
use crate::error::{CliError, Result};

const BEHAVIOR_SALT: u64 = 1;
const EVALUATION_SALT: u64 = 2;

/// Worker count from `OSIRIS_WORKERS`, else the available parallelism.
pub fn workers_from_env() -> Result<usize> {
    match std::env::var("OSIRIS_WORKERS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Config(format!(
                "OSIRIS_WORKERS must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

fn trial_seed(seed: u64, trial: usize) -> u64 {
    mix(seed, trial as u64)
}

fn truth(env: &Environment) -> Result<f64> {
    Ok(dp::exact_policy_value(&env.mdp, &env.eval)?)
}

fn behavior_batch(env: &Environment, n: usize, seed: u64) -> Result<TrajectoryBatch> {
    Ok(sample_batch(
        &env.mdp,
        &env.behavior,
        n,
        mix(seed, BEHAVIOR_SALT),
        "behavior",
    )?)
}

fn population_std(xs: &[f64], mean: f64) -> f64 {
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64).sqrt()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// One estimator run in one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub estimator: EstimatorKind,
    /// Significance level of the relevance test; `None` for estimators that
    /// do not use relevance.
    pub alpha: Option<f64>,
    pub estimate: Option<f64>,
    pub failure: Option<String>,
    pub mean_effective_length: Option<f64>,
    pub relevant_states: Vec<usize>,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Mean, population standard deviation and RMSE of one estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub estimator: EstimatorKind,
    pub alpha: Option<f64>,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean: f64,
    pub std: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub truth: f64,
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
}

impl BenchResult {
    pub fn row(&self, estimator: EstimatorKind, alpha: Option<f64>) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.estimator == estimator && r.alpha == alpha)
    }

    /// Per-trial estimates of one estimator, in trial order.
    pub fn estimates(&self, estimator: EstimatorKind, alpha: Option<f64>) -> Vec<Option<f64>> {
        self.records
            .iter()
            .filter(|r| r.estimator == estimator && r.alpha == alpha)
            .map(|r| r.estimate)
            .collect()
    }
}

fn uses_relevance(kind: EstimatorKind) -> bool {
    matches!(
        kind,
        EstimatorKind::Osiris | EstimatorKind::Osirwis | EstimatorKind::StepwiseOsiris
    )
}

fn record(
    trial: usize,
    seed: u64,
    estimator: EstimatorKind,
    alpha: Option<f64>,
    relevant_states: Vec<usize>,
    started: Instant,
    outcome: osiris_core::Result<EstimatorReport>,
) -> TrialRecord {
    let (estimate, failure, mean_effective_length) = match outcome {
        Ok(r) => {
            let lengths: Vec<f64> = r.effective_lengths.iter().map(|&l| l as f64).collect();
            (Some(r.estimate), None, Some(mean(&lengths)))
        }
        Err(e) => (None, Some(e.to_string()), None),
    };
    TrialRecord {
        trial,
        seed,
        estimator,
        alpha,
        estimate,
        failure,
        mean_effective_length,
        relevant_states,
        wall_time: started.elapsed(),
    }
}

fn bench_trial(env: &Environment, cfg: &ExperimentConfig, trial: usize) -> Result<Vec<TrialRecord>> {
    let seed = trial_seed(cfg.seed, trial);
    let gamma = env.mdp.gamma();
    let batch = behavior_batch(env, cfg.batch_size, seed)?;
    let (eval, behavior) = (&env.eval, &env.behavior);
    let mut out = Vec::new();
    let mut maps: Vec<(f64, osiris_core::Result<Relevance>)> = Vec::new();
    if cfg.estimators.iter().any(|&k| uses_relevance(k)) {
        for &alpha in &cfg.alphas {
            let map = estimate_relevance_map(
                &batch,
                &WeightConfig::new(eval, behavior),
                &cfg.relevance_at(alpha),
                gamma,
            );
            maps.push((alpha, map));
        }
    }
    for &kind in &cfg.estimators {
        let started = Instant::now();
        match kind {
            EstimatorKind::Mc => {
                let on_policy = sample_batch(&env.mdp, eval, cfg.batch_size, mix(seed, EVALUATION_SALT), "evaluation")?;
                out.push(record(
                    trial,
                    seed,
                    kind,
                    None,
                    Vec::new(),
                    started,
                    estimators::mc_estimate(&on_policy, gamma),
                ));
            }
            EstimatorKind::Is => {
                let r = estimators::is_estimate(&batch, eval, behavior, gamma);
                out.push(record(trial, seed, kind, None, Vec::new(), started, r));
            }
            EstimatorKind::Wis => {
                let r = estimators::wis_estimate(&batch, eval, behavior, gamma);
                out.push(record(trial, seed, kind, None, Vec::new(), started, r));
            }
            EstimatorKind::Pdis => {
                let r = estimators::pdis_estimate(&batch, eval, behavior, gamma);
                out.push(record(trial, seed, kind, None, Vec::new(), started, r));
            }
            EstimatorKind::Osiris | EstimatorKind::Osirwis | EstimatorKind::StepwiseOsiris => {
                for (alpha, map) in &maps {
                    let started = Instant::now();
                    let outcome = map.clone().and_then(|theta| {
                        let wcfg = WeightConfig::new(eval, behavior).with_relevance(&theta);
                        match kind {
                            EstimatorKind::Osiris => estimators::osiris_estimate(&batch, &wcfg, gamma),
                            EstimatorKind::Osirwis => estimators::osirwis_estimate(&batch, &wcfg, gamma),
                            _ => {
                                let timed = TimedRelevance::from_relevance(&theta);
                                estimators::stepwise_osiris_estimate(&batch, eval, behavior, &timed, gamma)
                            }
                        }
                    });
                    let relevant = map.as_ref().map(Relevance::relevant_states).unwrap_or_default();
                    out.push(record(trial, seed, kind, Some(*alpha), relevant, started, outcome));
                }
            }
        }
    }
    Ok(out)
}

fn summarize(records: &[TrialRecord], truth: f64) -> Vec<SummaryRow> {
    let mut keys: Vec<(EstimatorKind, Option<f64>)> = Vec::new();
    for r in records {
        if !keys.iter().any(|k| k.0 == r.estimator && k.1 == r.alpha) {
            keys.push((r.estimator, r.alpha));
        }
    }
    keys.into_iter()
        .map(|(estimator, alpha)| {
            let group: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.estimator == estimator && r.alpha == alpha)
                .collect();
            let ok: Vec<f64> = group.iter().filter_map(|r| r.estimate).collect();
            let (m, std, rmse) = if ok.is_empty() {
                (f64::NAN, f64::NAN, f64::NAN)
            } else {
                let m = mean(&ok);
                let mse = ok.iter().map(|x| (x - truth) * (x - truth)).sum::<f64>() / ok.len() as f64;
                (m, population_std(&ok, m), mse.sqrt())
            };
            SummaryRow {
                estimator,
                alpha,
                n_ok: ok.len(),
                n_failed: group.len() - ok.len(),
                mean: m,
                std,
                rmse,
            }
        })
        .collect()
}

/// Benchmark table: every requested estimator on `n_trials` batches.
pub fn run_benchmark(env: &Environment, cfg: &ExperimentConfig) -> Result<BenchResult> {
    cfg.validate()?;
    let truth = truth(env)?;
    let per_trial: Vec<Vec<TrialRecord>> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|trial| bench_trial(env, cfg, trial))
        .collect::<Result<_>>()?;
    let records: Vec<TrialRecord> = per_trial.into_iter().flatten().collect();
    let summary = summarize(&records, truth);
    Ok(BenchResult {
        truth,
        records,
        summary,
    })
}

/// OSIRWIS (and WIS on the same batch) for one trial of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyRecord {
    pub batch_size: usize,
    pub alpha: f64,
    pub trial: usize,
    pub estimate: Option<f64>,
    pub wis: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyCell {
    pub batch_size: usize,
    pub alpha: f64,
    pub n_ok: usize,
    pub mean: f64,
    pub std: f64,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyResult {
    pub truth: f64,
    pub records: Vec<ConsistencyRecord>,
    pub cells: Vec<ConsistencyCell>,
}

impl ConsistencyResult {
    pub fn cell(&self, batch_size: usize, alpha: f64) -> Option<&ConsistencyCell> {
        self.cells
            .iter()
            .find(|c| c.batch_size == batch_size && c.alpha == alpha)
    }
}

fn consistency_trial(
    env: &Environment,
    cfg: &ExperimentConfig,
    batch_size: usize,
    trial: usize,
) -> Result<Vec<ConsistencyRecord>> {
    let seed = trial_seed(mix(cfg.seed, batch_size as u64), trial);
    let gamma = env.mdp.gamma();
    let batch = behavior_batch(env, batch_size, seed)?;
    let (eval, behavior) = (&env.eval, &env.behavior);
    let wis = estimators::wis_estimate(&batch, eval, behavior, gamma)
        .ok()
        .map(|r| r.estimate);
    Ok(cfg
        .alphas
        .iter()
        .map(|&alpha| {
            let outcome = estimate_relevance_map(
                &batch,
                &WeightConfig::new(eval, behavior),
                &cfg.relevance_at(alpha),
                gamma,
            )
            .and_then(|theta| {
                let wcfg = WeightConfig::new(eval, behavior).with_relevance(&theta);
                estimators::osirwis_estimate(&batch, &wcfg, gamma)
            });
            let (estimate, failure) = match outcome {
                Ok(r) => (Some(r.estimate), None),
                Err(e) => (None, Some(e.to_string())),
            };
            ConsistencyRecord {
                batch_size,
                alpha,
                trial,
                estimate,
                wis,
                failure,
            }
        })
        .collect())
}

/// OSIRWIS across batch sizes and significance levels.
pub fn run_consistency_sweep(env: &Environment, cfg: &ExperimentConfig) -> Result<ConsistencyResult> {
    cfg.validate()?;
    let truth = truth(env)?;
    let jobs: Vec<(usize, usize)> = cfg
        .batch_sizes
        .iter()
        .flat_map(|&b| (0..cfg.n_trials).map(move |t| (b, t)))
        .collect();
    let records: Vec<ConsistencyRecord> = jobs
        .into_par_iter()
        .map(|(b, t)| consistency_trial(env, cfg, b, t))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut cells = Vec::new();
    for &batch_size in &cfg.batch_sizes {
        for &alpha in &cfg.alphas {
            let ok: Vec<f64> = records
                .iter()
                .filter(|r| r.batch_size == batch_size && r.alpha == alpha)
                .filter_map(|r| r.estimate)
                .collect();
            let m = if ok.is_empty() { f64::NAN } else { mean(&ok) };
            cells.push(ConsistencyCell {
                batch_size,
                alpha,
                n_ok: ok.len(),
                mean: m,
                std: if ok.is_empty() {
                    f64::NAN
                } else {
                    population_std(&ok, m)
                },
                bias: m - truth,
            });
        }
    }
    Ok(ConsistencyResult { truth, records, cells })
}

/// Where a state sits in a Gridworld.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Corridor,
    Branch,
    Terminal,
    Open,
}

impl StateKind {
    pub fn id(self) -> &'static str {
        match self {
            Self::Corridor => "corridor",
            Self::Branch => "branch",
            Self::Terminal => "terminal",
            Self::Open => "open",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateRelevance {
    pub alpha: f64,
    pub state: usize,
    pub row: Option<usize>,
    pub col: Option<usize>,
    pub kind: StateKind,
    /// Fraction of trials with `θ̂(s) = 1`.
    pub mean_theta: f64,
    pub visits: usize,
    pub trials_visited: usize,
    pub true_relevance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelevanceMapResult {
    pub truth: f64,
    pub states: Vec<StateRelevance>,
}

impl RelevanceMapResult {
    pub fn at(&self, alpha: f64) -> impl Iterator<Item = &StateRelevance> {
        self.states.iter().filter(move |s| s.alpha == alpha)
    }
}

/// Per-state frequency of `θ̂(s) = 1` over trials.
pub fn run_relevance_map(env: &Environment, cfg: &ExperimentConfig) -> Result<RelevanceMapResult> {
    cfg.validate()?;
    let truth = truth(env)?;
    let gamma = env.mdp.gamma();
    let n = env.mdp.n_states();
    let per_trial: Vec<(Vec<usize>, Vec<Relevance>)> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|trial| -> Result<_> {
            let batch = behavior_batch(env, cfg.batch_size, trial_seed(cfg.seed, trial))?;
            let wcfg = WeightConfig::new(&env.eval, &env.behavior);
            let maps = cfg
                .alphas
                .iter()
                .map(|&a| estimate_relevance_map(&batch, &wcfg, &cfg.relevance_at(a), gamma))
                .collect::<osiris_core::Result<Vec<_>>>()?;
            Ok((batch.visit_counts(n), maps))
        })
        .collect::<Result<_>>()?;
    let exact = dp::true_relevance(&env.mdp, &env.eval, &env.behavior, DEFAULT_RELEVANCE_TOL)?;
    let corridor = env.corridor_states();
    let branch = env.branch_state();
    let mut states = Vec::with_capacity(n * cfg.alphas.len());
    for (k, &alpha) in cfg.alphas.iter().enumerate() {
        for s in 0..n {
            let hits = per_trial.iter().filter(|(_, maps)| maps[k].is_relevant(s)).count();
            let cell = env.grid.as_ref().map(|g| g.cells[s]);
            let kind = if env.mdp.is_terminal(s) {
                StateKind::Terminal
            } else if Some(s) == branch {
                StateKind::Branch
            } else if corridor.contains(&s) {
                StateKind::Corridor
            } else {
                StateKind::Open
            };
            states.push(StateRelevance {
                alpha,
                state: s,
                row: cell.map(|c| c.row()),
                col: cell.map(|c| c.col()),
                kind,
                mean_theta: hits as f64 / cfg.n_trials as f64,
                visits: per_trial.iter().map(|(v, _)| v[s]).sum(),
                trials_visited: per_trial.iter().filter(|(v, _)| v[s] > 0).count(),
                true_relevance: exact.is_relevant(s),
            });
        }
    }
    Ok(RelevanceMapResult { truth, states })
}

/// What a diagnostic is expected to show.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    /// The identity or property holds.
    Holds,
    /// The identity holds while OSIRIS is visibly biased.
    ExpectedBias,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckReport {
    Identity(IdentityCheckReport),
    Propositions(PropositionReport),
    Correlation(CorrelationSummary),
}

/// Correlation statistics without the raw points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationSummary {
    pub pearson_r: f64,
    pub degenerate: bool,
    pub n_points: usize,
    pub zero_weight_count: usize,
    pub weight_variance_by_alpha: Vec<(f64, f64)>,
}

impl From<&CorrelationReport> for CorrelationSummary {
    fn from(r: &CorrelationReport) -> Self {
        Self {
            pearson_r: r.pearson_r,
            degenerate: r.degenerate,
            n_points: r.points.len(),
            zero_weight_count: r.zero_weight_count,
            weight_variance_by_alpha: r.weights_by_alpha.iter().map(|a| (a.alpha, a.variance)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub subject: String,
    pub expectation: Expectation,
    pub pass: bool,
    pub report: CheckReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsResult {
    pub truth: f64,
    pub checks: Vec<CheckOutcome>,
    /// Pooled weight-length data; written separately as figure data.
    #[serde(skip)]
    pub correlation: Option<CorrelationReport>,
}

impl DiagnosticsResult {
    pub fn failed(&self) -> usize {
        self.checks.iter().filter(|c| !c.pass).count()
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn identity(
    name: &str,
    subject: &str,
    expectation: Expectation,
    pass: bool,
    report: IdentityCheckReport,
) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        subject: subject.into(),
        expectation,
        pass,
        report: CheckReport::Identity(report),
    }
}

/// `|osiris_mean - truth|` in units of its standard error.
pub fn osiris_deviation(report: &IdentityCheckReport) -> f64 {
    let mean = report.term("osiris_mean").unwrap_or(f64::NAN);
    let se = report.term("osiris_mean_se").unwrap_or(f64::NAN);
    (mean - report.rhs).abs() / se
}

fn covariance_deviation(report: &IdentityCheckReport) -> f64 {
    let cov = report.term("covariance").unwrap_or(f64::NAN);
    let se = report.term("covariance_se").unwrap_or(f64::NAN);
    if cov == 0.0 {
        0.0
    } else {
        cov.abs() / se
    }
}

/// Relevance that drops the branch state (or the first relevant state).
fn adversarial(env: &Environment, truth: &Relevance) -> Option<Relevance> {
    let target = env
        .branch_state()
        .filter(|&s| truth.is_relevant(s))
        .or_else(|| truth.relevant_states().first().copied())?;
    let mut theta = truth.clone();
    theta.set(target, false);
    Some(theta)
}

type Job<'a> = Box<dyn Fn() -> Result<CheckOutcome> + Send + Sync + 'a>;

/// Full diagnostics bundle, or only the trivial `θ ≡ 1` equalities when
/// `smoke` is set.
pub fn run_diagnostics(env: &Environment, cfg: &ExperimentConfig, smoke: bool) -> Result<DiagnosticsResult> {
    cfg.validate()?;
    let truth_value = truth(env)?;
    let tol = Tolerance::default();
    let d = &cfg.diagnostics;
    let (mdp, eval, behavior) = (&env.mdp, &env.eval, &env.behavior);
    let subject = env.name.as_str();
    let seed = |salt: u64| mix(cfg.seed, 1000 + salt);
    let mut jobs: Vec<Job<'_>> = Vec::new();

    if smoke {
        let all = Relevance::all(mdp.n_states());
        let n = 20_000;
        let all_a = all.clone();
        jobs.push(Box::new(move || {
            let r = check_omitted_mean(mdp, eval, behavior, &all_a, n, seed(0), &tol)?;
            Ok(identity(
                "omitted_weight_mean_keep_all",
                subject,
                Expectation::Holds,
                r.lhs == 1.0,
                r,
            ))
        }));
        let all_b = all.clone();
        jobs.push(Box::new(move || {
            let r = check_variance_identity(mdp, eval, behavior, &all_b, n, seed(1), &tol)?;
            let corrections = ["center_adjustment", "omitted_variance", "covariance"]
                .iter()
                .all(|t| r.term(t).is_some_and(|v| v.abs() <= 1e-12));
            let pass = corrections && r.term("base_variance") == Some(r.lhs);
            Ok(identity(
                "variance_identity_keep_all",
                subject,
                Expectation::Holds,
                pass,
                r,
            ))
        }));
        jobs.push(Box::new(move || {
            let r = check_bias_identity(mdp, eval, behavior, &all, n, seed(2), &tol)?;
            let pass = r.term("covariance") == Some(0.0) && r.pass;
            Ok(identity("bias_identity_keep_all", subject, Expectation::Holds, pass, r))
        }));
    } else {
        let exact = dp::true_relevance(mdp, eval, behavior, DEFAULT_RELEVANCE_TOL)?;
        let exact_a = exact.clone();
        jobs.push(Box::new(move || {
            let r = check_omitted_mean(mdp, eval, behavior, &exact_a, d.omitted_draws, seed(10), &tol)?;
            Ok(identity("omitted_weight_mean", subject, Expectation::Holds, r.pass, r))
        }));
        let exact_b = exact.clone();
        jobs.push(Box::new(move || {
            let r = check_bias_identity(mdp, eval, behavior, &exact_b, d.bias_draws, seed(11), &tol)?;
            let pass = r.pass && osiris_deviation(&r) <= tol.k_se && covariance_deviation(&r) <= tol.k_se;
            Ok(identity("unbiasedness", subject, Expectation::Holds, pass, r))
        }));
        if let Some(theta) = adversarial(env, &exact) {
            jobs.push(Box::new(move || {
                let r = check_bias_identity(mdp, eval, behavior, &theta, d.bias_draws, seed(12), &tol)?;
                let pass = r.pass && osiris_deviation(&r) > tol.k_se;
                Ok(identity(
                    "adversarial_bias",
                    subject,
                    Expectation::ExpectedBias,
                    pass,
                    r,
                ))
            }));
        }
        let chain = testbeds::three_state_chain()?;
        let chain_theta = dp::true_relevance(&chain.mdp, &chain.eval, &chain.behavior, DEFAULT_RELEVANCE_TOL)?;
        let (chain_a, theta_a) = (chain.clone(), chain_theta.clone());
        jobs.push(Box::new(move || {
            let r = check_variance_identity(
                &chain_a.mdp,
                &chain_a.eval,
                &chain_a.behavior,
                &theta_a,
                d.identity_draws,
                seed(13),
                &tol,
            )?;
            Ok(identity(
                "variance_identity",
                "three_state_chain",
                Expectation::Holds,
                r.pass,
                r,
            ))
        }));
        jobs.push(Box::new(move || {
            let r = check_bias_identity(
                &chain.mdp,
                &chain.eval,
                &chain.behavior,
                &chain_theta,
                d.identity_draws,
                seed(14),
                &tol,
            )?;
            Ok(identity(
                "bias_identity",
                "three_state_chain",
                Expectation::Holds,
                r.pass,
                r,
            ))
        }));
        let (pe, pb) = epsilon_greedy_pair()?;
        let states = vec![0; d.subset_sizes.last().copied().unwrap_or(0)];
        let subsets: Vec<Vec<usize>> = d.subset_sizes.iter().map(|&k| (0..k).collect()).collect();
        let (pe_a, pb_a, states_a, subsets_a) = (pe.clone(), pb.clone(), states.clone(), subsets.clone());
        jobs.push(Box::new(move || {
            let r =
                check_length_propositions(&pe_a, &pb_a, &states_a, &subsets_a, d.proposition_draws, seed(15), &tol)?;
            Ok(CheckOutcome {
                name: "length_propositions".into(),
                subject: "epsilon_greedy_pair".into(),
                expectation: Expectation::Holds,
                pass: r.pass,
                report: CheckReport::Propositions(r),
            })
        }));
        jobs.push(Box::new(move || {
            let r = check_length_propositions(&pb, &pe, &states, &subsets, d.proposition_draws, seed(16), &tol)?;
            Ok(CheckOutcome {
                name: "log_weight_decay_swapped_roles".into(),
                subject: "epsilon_greedy_pair".into(),
                expectation: Expectation::Holds,
                pass: r.log_mean_decreasing,
                report: CheckReport::Propositions(r),
            })
        }));
    }

    let mut checks: Vec<CheckOutcome> = jobs.par_iter().map(|job| job()).collect::<Result<_>>()?;
    let correlation = if smoke {
        None
    } else {
        let pooled = weight_length_study(env, cfg)?;
        let summary = CorrelationSummary::from(&pooled);
        let low = cfg.alphas.iter().copied().fold(f64::INFINITY, f64::min);
        let pass = !pooled.degenerate
            && pooled.pearson_r < 0.0
            && matches!((pooled.variance_at(low), pooled.variance_at(1.0)), (Some(a), Some(b)) if a < b);
        checks.push(CheckOutcome {
            name: "weight_length_correlation".into(),
            subject: subject.into(),
            expectation: Expectation::Holds,
            pass,
            report: CheckReport::Correlation(summary),
        });
        Some(pooled)
    };
    Ok(DiagnosticsResult {
        truth: truth_value,
        checks,
        correlation,
    })
}

/// The ε-greedy pair of the Gridworlds on a single state with four actions.
pub fn epsilon_greedy_pair() -> Result<(Policy, Policy)> {
    Ok((
        Policy::epsilon_greedy(4, &[Some(1)], &[0.1])?,
        Policy::epsilon_greedy(4, &[Some(1)], &[0.5])?,
    ))
}

/// Weight against effective length with `θ̂` at `α = 1`, pooled over
/// `diagnostics.correlation_trials` batches, plus weight variances at every
/// configured `α` and at `α = 1`.
pub fn weight_length_study(env: &Environment, cfg: &ExperimentConfig) -> Result<CorrelationReport> {
    let gamma = env.mdp.gamma();
    let mut alphas = cfg.alphas.clone();
    if !alphas.contains(&1.0) {
        alphas.push(1.0);
    }
    let reports: Vec<CorrelationReport> = (0..cfg.diagnostics.correlation_trials)
        .into_par_iter()
        .map(|trial| -> Result<_> {
            let batch = behavior_batch(env, cfg.batch_size, trial_seed(mix(cfg.seed, 77), trial))?;
            let wcfg = WeightConfig::new(&env.eval, &env.behavior);
            let full = estimate_relevance_map(&batch, &wcfg, &cfg.relevance_at(1.0), gamma)?;
            Ok(weight_length_analysis(
                &batch,
                &env.eval,
                &env.behavior,
                &full,
                &alphas,
                &cfg.relevance,
                gamma,
            )?)
        })
        .collect::<Result<_>>()?;
    Ok(CorrelationReport::pool(&reports)?)
}
