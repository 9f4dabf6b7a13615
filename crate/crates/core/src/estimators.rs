//! Monte Carlo, importance sampling and OSIRIS estimators.
//!
//! OSIRIS replaces the likelihood ratio of every state marked irrelevant by
//! one. With a mapping that keeps every state it is ordinary IS; with one that
//! keeps none it is the plain average of behavior returns.

use alloc::vec::Vec;
use core::fmt;

use crate::mdp::{Policy, Relevance, TimedRelevance};
use crate::numeric;
use crate::trajectory::{discount, Trajectory, TrajectoryBatch};
use crate::{Error, Result};

/// Which estimator produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EstimatorKind {
    Mc,
    Is,
    Wis,
    Pdis,
    Osiris,
    Osirwis,
    StepwiseOsiris,
}

impl EstimatorKind {
    pub fn id(self) -> &'static str {
        match self {
            Self::Mc => "mc",
            Self::Is => "is",
            Self::Wis => "wis",
            Self::Pdis => "pdis",
            Self::Osiris => "osiris",
            Self::Osirwis => "osirwis",
            Self::StepwiseOsiris => "stepwise_osiris",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Estimate plus per-trajectory diagnostics.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EstimatorReport {
    pub estimator: EstimatorKind,
    pub estimate: f64,
    /// Kept weight `ρ_θ(τ)` (the full `ρ(τ)` for IS-type estimators).
    pub weights: Vec<f64>,
    /// `g(τ)`.
    pub returns: Vec<f64>,
    /// Omitted product `ρ^∁_θ(τ)`; `None` when an omitted factor has zero
    /// behavior probability.
    pub omitted_weights: Vec<Option<f64>>,
    /// Number of kept ratios `Σ_t θ(s_t)`.
    pub effective_lengths: Vec<usize>,
    /// Single-trajectory estimates, e.g. `g(τ) ρ_θ(τ)`.
    pub contributions: Vec<f64>,
}

impl EstimatorReport {
    pub fn n(&self) -> usize {
        self.returns.len()
    }
}

/// Policies and relevance mapping used to form weights.
#[derive(Debug, Clone, Copy)]
pub struct WeightConfig<'a> {
    pub eval: &'a Policy,
    pub behavior: &'a Policy,
    /// `None` keeps every ratio.
    pub relevance: Option<&'a Relevance>,
}

impl<'a> WeightConfig<'a> {
    pub fn new(eval: &'a Policy, behavior: &'a Policy) -> Self {
        Self {
            eval,
            behavior,
            relevance: None,
        }
    }

    pub fn with_relevance(mut self, relevance: &'a Relevance) -> Self {
        self.relevance = Some(relevance);
        self
    }

    pub fn keeps(&self, s: usize) -> bool {
        self.relevance.is_none_or(|r| r.is_relevant(s))
    }

    fn check_shapes(&self) -> Result<()> {
        if self.eval.n_states() != self.behavior.n_states() || self.eval.n_actions() != self.behavior.n_actions() {
            return Err(Error::Shape("evaluation and behavior policies differ in shape".into()));
        }
        if let Some(r) = self.relevance {
            if r.len() != self.eval.n_states() {
                return Err(Error::Shape("relevance mapping does not cover every state".into()));
            }
        }
        Ok(())
    }
}

/// `π_e(a|s) / π_b(a|s)`.
pub fn likelihood_ratio(cfg: &WeightConfig<'_>, s: usize, a: usize) -> Result<f64> {
    ratio(cfg.eval, cfg.behavior, s, a)
}

pub(crate) fn ratio(eval: &Policy, behavior: &Policy, s: usize, a: usize) -> Result<f64> {
    let pe = eval.prob(s, a);
    let pb = behavior.prob(s, a);
    if pb > 0.0 {
        Ok(pe / pb)
    } else if pe > 0.0 {
        Err(Error::SupportViolation { state: s, action: a })
    } else {
        Err(Error::ImpossibleObservation { state: s, action: a })
    }
}

/// Kept and omitted weight products of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitWeight {
    pub kept: f64,
    pub omitted: Option<f64>,
    pub effective_length: usize,
}

/// Splits `ρ(τ)` into `Π ρ_t^{θ(s_t)}` and `Π ρ_t^{1-θ(s_t)}`.
pub fn osiris_weight(traj: &Trajectory, cfg: &WeightConfig<'_>) -> Result<SplitWeight> {
    let mut kept = 1.0;
    let mut omitted = Some(1.0);
    let mut effective_length = 0;
    for (s, a) in traj.steps() {
        if cfg.keeps(s) {
            kept *= likelihood_ratio(cfg, s, a)?;
            effective_length += 1;
        } else {
            omitted = match (omitted, likelihood_ratio(cfg, s, a)) {
                (Some(w), Ok(r)) => Some(w * r),
                _ => None,
            };
        }
    }
    Ok(SplitWeight {
        kept,
        omitted,
        effective_length,
    })
}

fn require_non_empty(batch: &TrajectoryBatch) -> Result<()> {
    if batch.is_empty() {
        Err(Error::EmptyBatch)
    } else {
        Ok(())
    }
}

/// On-policy Monte Carlo: mean return.
pub fn mc_estimate(batch: &TrajectoryBatch, gamma: f64) -> Result<EstimatorReport> {
    require_non_empty(batch)?;
    let returns = batch.returns(gamma);
    let n = returns.len();
    Ok(EstimatorReport {
        estimator: EstimatorKind::Mc,
        estimate: numeric::mean(&returns),
        weights: alloc::vec![1.0; n],
        omitted_weights: alloc::vec![Some(1.0); n],
        effective_lengths: alloc::vec![0; n],
        contributions: returns.clone(),
        returns,
    })
}

fn weighted_parts(batch: &TrajectoryBatch, cfg: &WeightConfig<'_>, gamma: f64) -> Result<EstimatorReport> {
    require_non_empty(batch)?;
    cfg.check_shapes()?;
    let n = batch.len();
    let mut report = EstimatorReport {
        estimator: EstimatorKind::Osiris,
        estimate: 0.0,
        weights: Vec::with_capacity(n),
        returns: Vec::with_capacity(n),
        omitted_weights: Vec::with_capacity(n),
        effective_lengths: Vec::with_capacity(n),
        contributions: Vec::with_capacity(n),
    };
    for traj in batch.iter() {
        let w = osiris_weight(traj, cfg)?;
        let g = traj.discounted_return(gamma);
        report.weights.push(w.kept);
        report.returns.push(g);
        report.omitted_weights.push(w.omitted);
        report.effective_lengths.push(w.effective_length);
        report.contributions.push(g * w.kept);
    }
    Ok(report)
}

fn self_normalized(report: &EstimatorReport) -> Result<f64> {
    let total = numeric::sum(report.weights.iter().copied());
    if total <= 0.0 {
        return Err(Error::ZeroTotalWeight);
    }
    Ok(numeric::sum(report.contributions.iter().copied()) / total)
}

/// OSIRIS: `(1/N) Σ g(τ) ρ_θ(τ)`.
pub fn osiris_estimate(batch: &TrajectoryBatch, cfg: &WeightConfig<'_>, gamma: f64) -> Result<EstimatorReport> {
    let mut report = weighted_parts(batch, cfg, gamma)?;
    report.estimate = numeric::mean(&report.contributions);
    Ok(report)
}

/// OSIRWIS: `Σ g ρ_θ / Σ ρ_θ`.
pub fn osirwis_estimate(batch: &TrajectoryBatch, cfg: &WeightConfig<'_>, gamma: f64) -> Result<EstimatorReport> {
    let mut report = weighted_parts(batch, cfg, gamma)?;
    report.estimator = EstimatorKind::Osirwis;
    report.estimate = self_normalized(&report)?;
    Ok(report)
}

/// Ordinary IS: every ratio kept, whatever `cfg.relevance` says.
pub fn is_estimate(batch: &TrajectoryBatch, eval: &Policy, behavior: &Policy, gamma: f64) -> Result<EstimatorReport> {
    let mut report = osiris_estimate(batch, &WeightConfig::new(eval, behavior), gamma)?;
    report.estimator = EstimatorKind::Is;
    Ok(report)
}

/// Weighted IS.
pub fn wis_estimate(batch: &TrajectoryBatch, eval: &Policy, behavior: &Policy, gamma: f64) -> Result<EstimatorReport> {
    let mut report = osirwis_estimate(batch, &WeightConfig::new(eval, behavior), gamma)?;
    report.estimator = EstimatorKind::Wis;
    Ok(report)
}

/// Per-decision IS: `(1/N) Σ_τ Σ_t γ^{t-1} r_t ρ_{1:t}(τ)`.
pub fn pdis_estimate(batch: &TrajectoryBatch, eval: &Policy, behavior: &Policy, gamma: f64) -> Result<EstimatorReport> {
    require_non_empty(batch)?;
    let n = batch.len();
    let mut report = EstimatorReport {
        estimator: EstimatorKind::Pdis,
        estimate: 0.0,
        weights: Vec::with_capacity(n),
        returns: Vec::with_capacity(n),
        omitted_weights: alloc::vec![Some(1.0); n],
        effective_lengths: Vec::with_capacity(n),
        contributions: Vec::with_capacity(n),
    };
    for traj in batch.iter() {
        let mut w = 1.0;
        let mut value = 0.0;
        let mut disc = 1.0;
        for (t, (s, a)) in traj.steps().enumerate() {
            w *= ratio(eval, behavior, s, a)?;
            value += disc * traj.rewards[t] * w;
            disc *= gamma;
        }
        report.weights.push(w);
        report.returns.push(traj.discounted_return(gamma));
        report.effective_lengths.push(traj.len());
        report.contributions.push(value);
    }
    report.estimate = numeric::mean(&report.contributions);
    Ok(report)
}

/// Step-wise OSIRIS:
/// `(1/N) Σ_τ Σ_{t'} γ^{t'-1} r_{t'} Π_t ρ_t^{θ_{t'-t}(s_t)}`.
///
/// Ratios that are never kept for any reward may have zero behavior
/// probability; ratios that are kept must be supported.
pub fn stepwise_osiris_estimate(
    batch: &TrajectoryBatch,
    eval: &Policy,
    behavior: &Policy,
    timed: &TimedRelevance,
    gamma: f64,
) -> Result<EstimatorReport> {
    require_non_empty(batch)?;
    if timed.n_states() != eval.n_states() {
        return Err(Error::Shape("timed relevance does not cover every state".into()));
    }
    let n = batch.len();
    let mut report = EstimatorReport {
        estimator: EstimatorKind::StepwiseOsiris,
        estimate: 0.0,
        weights: Vec::with_capacity(n),
        returns: Vec::with_capacity(n),
        omitted_weights: Vec::with_capacity(n),
        effective_lengths: Vec::with_capacity(n),
        contributions: Vec::with_capacity(n),
    };
    for traj in batch.iter() {
        let len = traj.len();
        let ratios: Vec<Result<f64>> = traj.steps().map(|(s, a)| ratio(eval, behavior, s, a)).collect();
        let mut value = 0.0;
        let mut full_kept = 0;
        for t_reward in 0..len {
            let mut w = 1.0;
            let mut kept = 0;
            for (t, r) in ratios.iter().enumerate() {
                let dt = t_reward as i64 - t as i64;
                if timed.is_relevant(traj.states[t], dt) {
                    w *= r.clone()?;
                    kept += 1;
                }
            }
            value += discount(gamma, t_reward) * traj.rewards[t_reward] * w;
            full_kept = full_kept.max(kept);
        }
        let full: Option<f64> = ratios.iter().try_fold(1.0, |acc, r| r.as_ref().ok().map(|r| acc * r));
        report.weights.push(full.unwrap_or(f64::NAN));
        report.returns.push(traj.discounted_return(gamma));
        report.omitted_weights.push(None);
        report.effective_lengths.push(full_kept);
        report.contributions.push(value);
    }
    report.estimate = numeric::mean(&report.contributions);
    Ok(report)
}
