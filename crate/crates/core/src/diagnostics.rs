//! Monte Carlo checks of the OSIRIS identities.
//!
//! Every check draws behavior trajectories from per-draw streams
//! `rng::stream(seed, i)`, so a report depends only on its inputs and seed.
//! Moments are population moments of the shared draws.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dp;
use crate::estimators::{osiris_weight, ratio, WeightConfig};
use crate::mdp::{MdpSpec, Policy, Relevance};
use crate::numeric::{covariance, mean, pearson, population_variance};
use crate::relevance::{estimate_relevance_map, RelevanceConfig};
use crate::rng;
use crate::trajectory::{sample_trajectory, TrajectoryBatch};
use crate::{Error, Result};

/// Pass rule `|lhs - rhs| <= max(rel_tol |rhs|, k_se * combined SE)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tolerance {
    pub rel_tol: f64,
    pub k_se: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rel_tol: 0.05,
            k_se: 4.0,
        }
    }
}

impl Tolerance {
    pub fn passes(&self, lhs: f64, rhs: f64, lhs_se: f64, rhs_se: f64) -> bool {
        let combined = (lhs_se * lhs_se + rhs_se * rhs_se).sqrt();
        (lhs - rhs).abs() <= (self.rel_tol * rhs.abs()).max(self.k_se * combined)
    }
}

/// A named scalar in a report breakdown.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Term {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IdentityCheckReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_se: f64,
    pub rhs_se: f64,
    pub n_draws: usize,
    pub pass: bool,
    pub terms: Vec<Term>,
}

impl IdentityCheckReport {
    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }
}

/// Per-draw quantities: return, kept weight and omitted weight.
struct Draws {
    returns: Vec<f64>,
    kept: Vec<f64>,
    omitted: Vec<f64>,
}

fn draw(mdp: &MdpSpec, eval: &Policy, behavior: &Policy, theta: &Relevance, n: usize, seed: u64) -> Result<Draws> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one draw".into()));
    }
    eval.check_shape(mdp)?;
    behavior.check_shape(mdp)?;
    if theta.len() != mdp.n_states() {
        return Err(Error::Shape("relevance mapping does not cover every state".into()));
    }
    let cfg = WeightConfig::new(eval, behavior).with_relevance(theta);
    let mut out = Draws {
        returns: Vec::with_capacity(n),
        kept: Vec::with_capacity(n),
        omitted: Vec::with_capacity(n),
    };
    for i in 0..n {
        let traj = sample_trajectory(mdp, behavior, &mut rng::stream(seed, i as u64))?;
        let w = osiris_weight(&traj, &cfg)?;
        out.returns.push(traj.discounted_return(mdp.gamma()));
        out.kept.push(w.kept);
        // sampled actions always have behavior support
        out.omitted.push(w.omitted.unwrap_or(0.0));
    }
    Ok(out)
}

fn standard_error(xs: &[f64]) -> f64 {
    (population_variance(xs) / xs.len() as f64).sqrt()
}

/// Standard error of the population variance, `sqrt((m4 - m2²) / n)`.
fn variance_standard_error(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let centered: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    standard_error(&centered)
}

fn term(name: &str, value: f64) -> Term {
    Term {
        name: name.into(),
        value,
    }
}

/// Mean omitted weight `E[ρ^∁]` against one.
pub fn check_omitted_mean(
    mdp: &MdpSpec,
    eval: &Policy,
    behavior: &Policy,
    theta: &Relevance,
    n_draws: usize,
    seed: u64,
    tol: &Tolerance,
) -> Result<IdentityCheckReport> {
    let d = draw(mdp, eval, behavior, theta, n_draws, seed)?;
    let lhs = mean(&d.omitted);
    let lhs_se = standard_error(&d.omitted);
    Ok(IdentityCheckReport {
        name: "omitted_weight_mean".into(),
        lhs,
        rhs: 1.0,
        lhs_se,
        rhs_se: 0.0,
        n_draws,
        pass: tol.passes(lhs, 1.0, lhs_se, 0.0),
        terms: alloc::vec![term("omitted_weight_variance", population_variance(&d.omitted))],
    })
}

/// Single-trajectory variance decomposition of OSIRIS against IS.
///
/// With `X = g ρ_θ`, `Y = ρ^∁` and `Z = X Y` (the IS estimate):
/// `Var[X] = Var[Z] + (E[Z]² - E[X]²) - E[X²] Var[Y] - Cov[X², Y²]`.
pub fn check_variance_identity(
    mdp: &MdpSpec,
    eval: &Policy,
    behavior: &Policy,
    theta: &Relevance,
    n_outer: usize,
    seed: u64,
    tol: &Tolerance,
) -> Result<IdentityCheckReport> {
    let d = draw(mdp, eval, behavior, theta, n_outer, seed)?;
    let x: Vec<f64> = d.returns.iter().zip(&d.kept).map(|(g, w)| g * w).collect();
    let z: Vec<f64> = x.iter().zip(&d.omitted).map(|(x, y)| x * y).collect();
    let x2: Vec<f64> = x.iter().map(|x| x * x).collect();
    let y2: Vec<f64> = d.omitted.iter().map(|y| y * y).collect();

    let (mean_x, mean_z, mean_x2) = (mean(&x), mean(&z), mean(&x2));
    let base_variance = population_variance(&z);
    let center_adjustment = mean_z * mean_z - mean_x * mean_x;
    let omitted_variance = -mean_x2 * population_variance(&d.omitted);
    let covariance_term = -covariance(&x2, &y2);
    let rhs = base_variance + center_adjustment + omitted_variance + covariance_term;
    let lhs = population_variance(&x);

    let lhs_se = variance_standard_error(&x);
    // rhs - lhs = E[X²](Ȳ² - 1), whose noise is driven by Ȳ
    let mean_y_se = standard_error(&d.omitted);
    let drift_se = 2.0 * mean_x2 * mean(&d.omitted).abs() * mean_y_se;
    let rhs_se = (lhs_se * lhs_se + drift_se * drift_se).sqrt();
    Ok(IdentityCheckReport {
        name: "osiris_variance_identity".into(),
        lhs,
        rhs,
        lhs_se,
        rhs_se,
        n_draws: n_outer,
        pass: tol.passes(lhs, rhs, lhs_se, rhs_se),
        terms: alloc::vec![
            term("base_variance", base_variance),
            term("center_adjustment", center_adjustment),
            term("omitted_variance", omitted_variance),
            term("covariance", covariance_term),
        ],
    })
}

/// `E[X] + Cov[X, ρ^∁]` against the exact value of the evaluation policy.
///
/// The breakdown carries the OSIRIS mean and its standard error so the same
/// draws also measure the bias of OSIRIS itself.
pub fn check_bias_identity(
    mdp: &MdpSpec,
    eval: &Policy,
    behavior: &Policy,
    theta: &Relevance,
    n_outer: usize,
    seed: u64,
    tol: &Tolerance,
) -> Result<IdentityCheckReport> {
    let d = draw(mdp, eval, behavior, theta, n_outer, seed)?;
    let rhs = dp::exact_policy_value(mdp, eval)?;
    let x: Vec<f64> = d.returns.iter().zip(&d.kept).map(|(g, w)| g * w).collect();
    let mean_x = mean(&x);
    let mean_y = mean(&d.omitted);
    let cov = covariance(&x, &d.omitted);
    let lhs = mean_x + cov;
    let influence: Vec<f64> = x
        .iter()
        .zip(&d.omitted)
        .map(|(x, y)| (x - mean_x) + (x - mean_x) * (y - mean_y) - cov)
        .collect();
    let lhs_se = standard_error(&influence);
    let centered: Vec<f64> = x
        .iter()
        .zip(&d.omitted)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .collect();
    Ok(IdentityCheckReport {
        name: "osiris_bias_identity".into(),
        lhs,
        rhs,
        lhs_se,
        rhs_se: 0.0,
        n_draws: n_outer,
        pass: tol.passes(lhs, rhs, lhs_se, 0.0),
        terms: alloc::vec![
            term("osiris_mean", mean_x),
            term("osiris_mean_se", standard_error(&x)),
            term("covariance", cov),
            term("covariance_se", standard_error(&centered)),
        ],
    })
}

/// Moments of one weight product.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SubsetMoments {
    pub size: usize,
    pub variance: f64,
    pub variance_se: f64,
    pub log_mean: f64,
    pub log_mean_se: f64,
}

/// Variance growth and log-mean decay of nested weight products.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PropositionReport {
    pub subsets: Vec<SubsetMoments>,
    pub n_draws: usize,
    pub variance_increasing: bool,
    pub log_mean_decreasing: bool,
    pub pass: bool,
}

/// Draws one action per position of a fixed state sequence from the
/// behavior policy and compares `Π_{t∈T_i} ρ_t` across nested index sets.
///
/// Consecutive subsets must be separated by non-overlapping `k_se`
/// intervals: variance strictly up, mean log-weight strictly down.
pub fn check_length_propositions(
    eval: &Policy,
    behavior: &Policy,
    states: &[usize],
    nested_subsets: &[Vec<usize>],
    n_draws: usize,
    seed: u64,
    tol: &Tolerance,
) -> Result<PropositionReport> {
    if n_draws == 0 {
        return Err(Error::InvalidArgument("need at least one draw".into()));
    }
    if eval.n_states() != behavior.n_states() || eval.n_actions() != behavior.n_actions() {
        return Err(Error::Shape("evaluation and behavior policies differ in shape".into()));
    }
    if let Some(&s) = states.iter().find(|&&s| s >= eval.n_states()) {
        return Err(Error::InvalidArgument(alloc::format!("state {s} out of range")));
    }
    if states.iter().all(|&s| eval.row(s) == behavior.row(s)) {
        return Err(Error::IdenticalPolicies);
    }
    for (i, subset) in nested_subsets.iter().enumerate() {
        if let Some(&t) = subset.iter().find(|&&t| t >= states.len()) {
            return Err(Error::InvalidArgument(alloc::format!(
                "subset {i} indexes position {t}"
            )));
        }
        if i > 0 && !nested_subsets[i - 1].iter().all(|t| subset.contains(t)) {
            return Err(Error::InvalidArgument(alloc::format!(
                "subset {} is not contained in subset {i}",
                i - 1
            )));
        }
    }
    let mut products = alloc::vec![Vec::with_capacity(n_draws); nested_subsets.len()];
    let mut ratios = alloc::vec![0.0; states.len()];
    for i in 0..n_draws {
        let mut stream = rng::stream(seed, i as u64);
        for (t, &s) in states.iter().enumerate() {
            let a = rng::categorical(&mut stream, behavior.row(s));
            ratios[t] = ratio(eval, behavior, s, a)?;
        }
        for (subset, out) in nested_subsets.iter().zip(products.iter_mut()) {
            out.push(subset.iter().map(|&t| ratios[t]).product::<f64>());
        }
    }
    let subsets: Vec<SubsetMoments> = nested_subsets
        .iter()
        .zip(&products)
        .map(|(subset, w)| {
            let logs: Vec<f64> = w.iter().map(|w| w.ln()).collect();
            SubsetMoments {
                size: subset.len(),
                variance: population_variance(w),
                variance_se: variance_standard_error(w),
                log_mean: mean(&logs),
                log_mean_se: standard_error(&logs),
            }
        })
        .collect();
    let k = tol.k_se;
    let variance_increasing = subsets
        .windows(2)
        .all(|p| p[0].variance + k * p[0].variance_se < p[1].variance - k * p[1].variance_se);
    let log_mean_decreasing = subsets
        .windows(2)
        .all(|p| p[0].log_mean - k * p[0].log_mean_se > p[1].log_mean + k * p[1].log_mean_se);
    Ok(PropositionReport {
        subsets,
        n_draws,
        variance_increasing,
        log_mean_decreasing,
        pass: variance_increasing && log_mean_decreasing,
    })
}

/// OSIRIS weights of a batch under one significance level.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlphaWeights {
    pub alpha: f64,
    pub weights: Vec<f64>,
    pub variance: f64,
}

/// Effective length against log weight, plus weight spread per `α`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorrelationReport {
    /// Pearson r of `points`; 0 when undefined.
    pub pearson_r: f64,
    /// Set when either coordinate is constant.
    pub degenerate: bool,
    /// `(Σ_t θ̂(s_t), log ρ_θ̂(τ))` per trajectory with a positive weight.
    pub points: Vec<(f64, f64)>,
    pub zero_weight_count: usize,
    pub weights_by_alpha: Vec<AlphaWeights>,
}

impl CorrelationReport {
    fn from_parts(points: Vec<(f64, f64)>, zero_weight_count: usize, weights_by_alpha: Vec<AlphaWeights>) -> Self {
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        let r = if points.is_empty() { None } else { pearson(&xs, &ys) };
        Self {
            pearson_r: r.unwrap_or(0.0),
            degenerate: r.is_none(),
            points,
            zero_weight_count,
            weights_by_alpha,
        }
    }

    /// Concatenates reports (e.g. one per trial) and recomputes the
    /// statistics. Reports must list the same `α` values in the same order.
    pub fn pool(reports: &[CorrelationReport]) -> Result<Self> {
        let first = reports
            .first()
            .ok_or_else(|| Error::InvalidArgument("no reports to pool".into()))?;
        let alphas: Vec<f64> = first.weights_by_alpha.iter().map(|a| a.alpha).collect();
        let mut points = Vec::new();
        let mut zeros = 0;
        let mut weights: Vec<Vec<f64>> = alloc::vec![Vec::new(); alphas.len()];
        for r in reports {
            if r.weights_by_alpha.len() != alphas.len()
                || r.weights_by_alpha.iter().zip(&alphas).any(|(a, &b)| a.alpha != b)
            {
                return Err(Error::InvalidArgument("reports use different alpha lists".into()));
            }
            points.extend_from_slice(&r.points);
            zeros += r.zero_weight_count;
            for (acc, a) in weights.iter_mut().zip(&r.weights_by_alpha) {
                acc.extend_from_slice(&a.weights);
            }
        }
        let by_alpha = alphas
            .into_iter()
            .zip(weights)
            .map(|(alpha, weights)| AlphaWeights {
                alpha,
                variance: population_variance(&weights),
                weights,
            })
            .collect();
        Ok(Self::from_parts(points, zeros, by_alpha))
    }

    pub fn variance_at(&self, alpha: f64) -> Option<f64> {
        self.weights_by_alpha
            .iter()
            .find(|a| a.alpha == alpha)
            .map(|a| a.variance)
    }
}

/// Relates OSIRIS weights to effective trajectory lengths under `theta_hat`
/// and collects the weights obtained by re-estimating relevance at every
/// level in `alphas` (other settings from `rcfg`).
pub fn weight_length_analysis(
    batch: &TrajectoryBatch,
    eval: &Policy,
    behavior: &Policy,
    theta_hat: &Relevance,
    alphas: &[f64],
    rcfg: &RelevanceConfig,
    gamma: f64,
) -> Result<CorrelationReport> {
    let weights_of = |theta: &Relevance| -> Result<Vec<(usize, f64)>> {
        let cfg = WeightConfig::new(eval, behavior).with_relevance(theta);
        batch
            .iter()
            .map(|traj| osiris_weight(traj, &cfg).map(|w| (w.effective_length, w.kept)))
            .collect()
    };
    let mut points = Vec::with_capacity(batch.len());
    let mut zero_weight_count = 0;
    for (len, w) in weights_of(theta_hat)? {
        if w > 0.0 {
            points.push((len as f64, w.ln()));
        } else {
            zero_weight_count += 1;
        }
    }
    let mut by_alpha = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let cfg = RelevanceConfig { alpha, ..*rcfg };
        let theta = estimate_relevance_map(batch, &WeightConfig::new(eval, behavior), &cfg, gamma)?;
        let weights: Vec<f64> = weights_of(&theta)?.into_iter().map(|(_, w)| w).collect();
        by_alpha.push(AlphaWeights {
            alpha,
            variance: if weights.is_empty() {
                0.0
            } else {
                population_variance(&weights)
            },
            weights,
        });
    }
    Ok(CorrelationReport::from_parts(points, zero_weight_count, by_alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    /// Two-step chain: state 0 (action 0 pays 1, action 1 pays 0) then
    /// state 1 (both actions pay 2), then terminal state 2.
    fn chain() -> (MdpSpec, Policy, Policy) {
        let mut transition = vec![0.0; 3 * 2 * 3];
        for a in 0..2 {
            for (s, next) in [(0, 1), (1, 2), (2, 2)] {
                transition[(s * 2 + a) * 3 + next] = 1.0;
            }
        }
        let reward = vec![1.0, 0.0, 2.0, 2.0, 0.0, 0.0];
        let mdp = MdpSpec::new(3, 2, transition, reward, vec![1.0, 0.0, 0.0], &[2], 1.0, 10).unwrap();
        let eval = Policy::from_rows(&[vec![0.8, 0.2], vec![0.3, 0.7], vec![0.5, 0.5]]).unwrap();
        let behavior = Policy::from_rows(&[vec![0.5, 0.5], vec![0.6, 0.4], vec![0.5, 0.5]]).unwrap();
        (mdp, eval, behavior)
    }

    #[test]
    fn keeping_everything_reduces_to_is() {
        let (mdp, eval, behavior) = chain();
        let all = Relevance::all(3);
        let tol = Tolerance::default();
        let r = check_omitted_mean(&mdp, &eval, &behavior, &all, 100, 1, &tol).unwrap();
        assert_eq!(r.lhs, 1.0);
        let r = check_variance_identity(&mdp, &eval, &behavior, &all, 1000, 1, &tol).unwrap();
        for name in ["center_adjustment", "omitted_variance", "covariance"] {
            assert!(r.term(name).unwrap().abs() <= 1e-12, "{name}");
        }
        assert_eq!(r.lhs, r.term("base_variance").unwrap());
    }

    #[test]
    fn equal_policies_give_plain_return_variance() {
        let (mdp, eval, _) = chain();
        let theta = Relevance::from_relevant(3, &[0]);
        let r = check_variance_identity(&mdp, &eval, &eval, &theta, 1000, 3, &Tolerance::default()).unwrap();
        assert_eq!(r.lhs, r.rhs);
        let r = check_omitted_mean(&mdp, &eval, &eval, &theta, 100, 3, &Tolerance::default()).unwrap();
        assert_eq!(r.lhs, 1.0);
    }

    #[test]
    fn breakdown_sums_to_rhs() {
        let (mdp, eval, behavior) = chain();
        let theta = Relevance::from_relevant(3, &[0]);
        let r = check_variance_identity(&mdp, &eval, &behavior, &theta, 5000, 9, &Tolerance::default()).unwrap();
        let total: f64 = r.terms.iter().map(|t| t.value).sum();
        assert!((total - r.rhs).abs() <= 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn bias_identity_on_chain() {
        let (mdp, eval, behavior) = chain();
        let theta = Relevance::from_relevant(3, &[0]);
        let r = check_bias_identity(&mdp, &eval, &behavior, &theta, 20_000, 5, &Tolerance::default()).unwrap();
        // 0.8 + 2
        assert!((r.rhs - 2.8).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn reports_are_reproducible() {
        let (mdp, eval, behavior) = chain();
        let theta = Relevance::from_relevant(3, &[1]);
        let tol = Tolerance::default();
        let a = check_bias_identity(&mdp, &eval, &behavior, &theta, 500, 11, &tol).unwrap();
        let b = check_bias_identity(&mdp, &eval, &behavior, &theta, 500, 11, &tol).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_subset_is_unit_product() {
        let eval = Policy::from_rows(&[vec![0.9, 0.1]]).unwrap();
        let behavior = Policy::from_rows(&[vec![0.5, 0.5]]).unwrap();
        let subsets = vec![vec![], vec![0], vec![0, 1, 2]];
        let r =
            check_length_propositions(&eval, &behavior, &[0, 0, 0], &subsets, 2000, 4, &Tolerance::default()).unwrap();
        assert_eq!(r.subsets[0].variance, 0.0);
        assert_eq!(r.subsets[0].log_mean, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn propositions_need_distinct_policies() {
        let eval = Policy::from_rows(&[vec![0.9, 0.1]]).unwrap();
        let err = check_length_propositions(&eval, &eval, &[0], &[vec![0]], 10, 0, &Tolerance::default());
        assert_eq!(err, Err(Error::IdenticalPolicies));
        let behavior = Policy::from_rows(&[vec![0.5, 0.5]]).unwrap();
        let not_nested = vec![vec![0], vec![1]];
        assert!(
            check_length_propositions(&eval, &behavior, &[0, 0], &not_nested, 10, 0, &Tolerance::default()).is_err()
        );
    }

    #[test]
    fn degenerate_correlation() {
        let (mdp, eval, behavior) = chain();
        let batch = crate::trajectory::sample_batch(&mdp, &behavior, 50, 2, "behavior").unwrap();
        let rcfg = RelevanceConfig::default();
        let r = weight_length_analysis(&batch, &eval, &behavior, &Relevance::none(3), &[0.0], &rcfg, 1.0).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.pearson_r, 0.0);
        assert!(r.points.iter().all(|&(l, w)| l == 0.0 && w == 0.0));
        assert_eq!(r.variance_at(0.0), Some(0.0));
        let r = weight_length_analysis(&batch, &eval, &eval, &Relevance::all(3), &[1.0], &rcfg, 1.0).unwrap();
        assert!(r.degenerate);
        let pooled = CorrelationReport::pool(&[r.clone(), r.clone()]).unwrap();
        assert_eq!(pooled.points.len(), 2 * r.points.len());
    }
}
