//! Estimating state relevance from logged trajectories.
//!
//! For every visit to a state the weighted return-to-go
//! `g_{t:T}(τ) ρ_{t:T}(τ)` is placed into one of two samples according to a
//! partition of the taken actions. A state is declared relevant when a
//! two-sample test rejects equality of the two samples.

use alloc::vec;
use alloc::vec::Vec;

use crate::estimators::{ratio, WeightConfig};
use crate::mdp::Relevance;
use crate::numeric;
use crate::stats::{self, TestResult};
use crate::trajectory::TrajectoryBatch;
use crate::{Error, Result};

/// Two-sample test used to compare the partitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TestKind {
    #[default]
    Welch,
    Smirnov,
}

/// Rule assigning a visit to the positive or negative sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PartitionKind {
    /// Positive iff the likelihood ratio at the visit exceeds one.
    #[default]
    RatioBinary,
    /// Positive iff the trajectory return is strictly above the batch mean.
    ReturnBinary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct RelevanceConfig {
    pub alpha: f64,
    pub test: TestKind,
    pub partition: PartitionKind,
    pub min_samples_per_side: usize,
}

impl Default for RelevanceConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            test: TestKind::Welch,
            partition: PartitionKind::RatioBinary,
            min_samples_per_side: 2,
        }
    }
}

impl RelevanceConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(alloc::format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.min_samples_per_side == 0 {
            return Err(Error::InvalidArgument("min_samples_per_side must be positive".into()));
        }
        Ok(())
    }
}

/// Weighted returns-to-go of the visits to one state.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleSplit {
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

impl SampleSplit {
    pub fn visits(&self) -> usize {
        self.positive.len() + self.negative.len()
    }
}

/// Splits for every state in a single pass over the batch.
pub fn collect_splits(
    batch: &TrajectoryBatch,
    n_states: usize,
    cfg: &WeightConfig<'_>,
    gamma: f64,
    partition: PartitionKind,
) -> Result<Vec<SampleSplit>> {
    let mut splits = vec![SampleSplit::default(); n_states];
    if batch.is_empty() {
        return Ok(splits);
    }
    let returns = batch.returns(gamma);
    let mean_return = numeric::mean(&returns);
    for (traj, &g) in batch.iter().zip(&returns) {
        let ratios = traj
            .steps()
            .map(|(s, a)| ratio(cfg.eval, cfg.behavior, s, a))
            .collect::<Result<Vec<f64>>>()?;
        let to_go = traj.returns_to_go(gamma);
        let mut weight_to_go = 1.0;
        for t in (0..traj.len()).rev() {
            weight_to_go *= ratios[t];
            let s = traj.states[t];
            let split = splits
                .get_mut(s)
                .ok_or_else(|| Error::Shape(alloc::format!("state {s} outside the {n_states}-state space")))?;
            let positive = match partition {
                PartitionKind::RatioBinary => ratios[t] > 1.0,
                PartitionKind::ReturnBinary => g > mean_return,
            };
            let value = to_go[t] * weight_to_go;
            if positive {
                split.positive.push(value);
            } else {
                split.negative.push(value);
            }
        }
    }
    for split in &mut splits {
        split.positive.reverse();
        split.negative.reverse();
    }
    Ok(splits)
}

/// Split for a single state.
pub fn collect_split(
    batch: &TrajectoryBatch,
    s: usize,
    cfg: &WeightConfig<'_>,
    gamma: f64,
    partition: PartitionKind,
) -> Result<SampleSplit> {
    let n_states = cfg.eval.n_states();
    if s >= n_states {
        return Err(Error::InvalidArgument(alloc::format!(
            "state {s} outside the {n_states}-state space"
        )));
    }
    let mut splits = collect_splits(batch, n_states, cfg, gamma, partition)?;
    Ok(splits.swap_remove(s))
}

/// Runs the configured test on a split. `None` when a side is too small.
pub fn test_split(split: &SampleSplit, rcfg: &RelevanceConfig) -> Option<TestResult> {
    if split.positive.len() < rcfg.min_samples_per_side || split.negative.len() < rcfg.min_samples_per_side {
        return None;
    }
    let result = match rcfg.test {
        TestKind::Welch => stats::welch_t_test(&split.positive, &split.negative, rcfg.alpha),
        TestKind::Smirnov => stats::smirnov_test(&split.positive, &split.negative, rcfg.alpha),
    };
    (!result.inconclusive).then_some(result)
}

/// Decision for one split, applying the `alpha` shortcuts.
pub fn decide(split: &SampleSplit, rcfg: &RelevanceConfig) -> bool {
    if rcfg.alpha <= 0.0 {
        false
    } else if rcfg.alpha >= 1.0 {
        split.visits() > 0
    } else {
        test_split(split, rcfg).is_some_and(|r| r.reject)
    }
}

/// Estimated relevance `θ̂(s)` of one state.
pub fn estimate_relevance(
    batch: &TrajectoryBatch,
    s: usize,
    wcfg: &WeightConfig<'_>,
    rcfg: &RelevanceConfig,
    gamma: f64,
) -> Result<bool> {
    rcfg.validate()?;
    if rcfg.alpha <= 0.0 {
        return Ok(false);
    }
    let split = collect_split(batch, s, wcfg, gamma, rcfg.partition)?;
    Ok(decide(&split, rcfg))
}

/// Estimated relevance of every state; unvisited states are irrelevant.
pub fn estimate_relevance_map(
    batch: &TrajectoryBatch,
    wcfg: &WeightConfig<'_>,
    rcfg: &RelevanceConfig,
    gamma: f64,
) -> Result<Relevance> {
    rcfg.validate()?;
    let n_states = wcfg.eval.n_states();
    if rcfg.alpha <= 0.0 {
        return Ok(Relevance::none(n_states));
    }
    let splits = collect_splits(batch, n_states, wcfg, gamma, rcfg.partition)?;
    Ok(Relevance::new(splits.iter().map(|split| decide(split, rcfg)).collect()))
}

/// Cell assignment of continuous states on a regular grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Discretization {
    pub assignments: Vec<usize>,
    /// Interior bin edges per dimension; empty for a constant dimension.
    pub edges: Vec<Vec<f64>>,
    /// Number of bins per dimension.
    pub bins: Vec<usize>,
}

impl Discretization {
    pub fn n_cells(&self) -> usize {
        self.bins.iter().product()
    }
}

/// Bins each dimension into `bins_per_dim` equal-width intervals between the
/// observed extremes. A value on an edge goes to the upper bin, so the
/// maximum lands in the top bin. The cell index is mixed-radix with the first
/// dimension most significant.
pub fn discretize(points: &[Vec<f64>], bins_per_dim: usize) -> Result<Discretization> {
    let first = points
        .first()
        .ok_or_else(|| Error::InvalidArgument("no points to discretize".into()))?;
    if bins_per_dim == 0 {
        return Err(Error::InvalidArgument("bins_per_dim must be positive".into()));
    }
    let dims = first.len();
    if let Some(row) = points.iter().position(|p| p.len() != dims) {
        return Err(Error::InvalidRow {
            what: "point",
            row,
            reason: alloc::format!("expected {dims} coordinates, found {}", points[row].len()),
        });
    }
    let mut edges = Vec::with_capacity(dims);
    let mut bins = Vec::with_capacity(dims);
    for d in 0..dims {
        let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p[d]), hi.max(p[d]))
        });
        if hi > lo {
            let width = (hi - lo) / bins_per_dim as f64;
            edges.push((1..bins_per_dim).map(|i| lo + width * i as f64).collect::<Vec<_>>());
            bins.push(bins_per_dim);
        } else {
            edges.push(Vec::new());
            bins.push(1);
        }
    }
    let assignments = points
        .iter()
        .map(|p| {
            p.iter().zip(&edges).zip(&bins).fold(0, |code, ((&x, e), &radix)| {
                let idx = e.iter().take_while(|&&edge| edge <= x).count();
                code * radix + idx
            })
        })
        .collect();
    Ok(Discretization {
        assignments,
        edges,
        bins,
    })
}
