use osiris_core::dp::{self, DEFAULT_RELEVANCE_TOL};
use osiris_core::estimators::{self, osiris_weight, WeightConfig};
use osiris_core::testbeds::{self, Testbed};
use osiris_core::trajectory::sample_batch;
use osiris_core::{Relevance, TimedRelevance, TrajectoryBatch};
use proptest::prelude::*;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

fn setup(seed: u64, n_states: usize, n_actions: usize, gamma: f64, n: usize) -> (Testbed, TrajectoryBatch) {
    let bed = testbeds::random_with_irrelevant(seed, n_states, n_actions, gamma).unwrap();
    let batch = sample_batch(&bed.mdp, &bed.behavior, n, seed ^ 0x5eed, "behavior").unwrap();
    (bed, batch)
}

fn random_mask(bits: u32, n: usize) -> Relevance {
    Relevance::new((0..n).map(|s| bits >> s & 1 == 1).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn weight_factorizes(seed in any::<u64>(), bits in any::<u32>(), n_states in 2usize..7) {
        let (bed, batch) = setup(seed, n_states, 3, 0.9, 20);
        let theta = random_mask(bits, n_states);
        let cfg = WeightConfig::new(&bed.eval, &bed.behavior).with_relevance(&theta);
        let full = WeightConfig::new(&bed.eval, &bed.behavior);
        for traj in batch.iter() {
            let split = osiris_weight(traj, &cfg).unwrap();
            let whole = osiris_weight(traj, &full).unwrap();
            prop_assert!(close(split.kept * split.omitted.unwrap(), whole.kept));
            prop_assert_eq!(split.effective_length, traj.steps().filter(|&(s, _)| theta.is_relevant(s)).count());
        }
    }

    #[test]
    fn extreme_masks_match_classic_estimators(seed in any::<u64>(), n_states in 2usize..7, n_actions in 1usize..4, gamma in 0.5f64..=1.0) {
        let (bed, batch) = setup(seed, n_states, n_actions, gamma, 15);
        let all = Relevance::all(n_states);
        let none = Relevance::none(n_states);
        let keep_all = WeightConfig::new(&bed.eval, &bed.behavior).with_relevance(&all);
        let keep_none = WeightConfig::new(&bed.eval, &bed.behavior).with_relevance(&none);

        let is = estimators::is_estimate(&batch, &bed.eval, &bed.behavior, gamma).unwrap();
        let osiris_all = estimators::osiris_estimate(&batch, &keep_all, gamma).unwrap();
        for (a, b) in is.contributions.iter().zip(&osiris_all.contributions) {
            prop_assert!(close(*a, *b));
        }
        prop_assert!(close(is.estimate, osiris_all.estimate));

        let osiris_none = estimators::osiris_estimate(&batch, &keep_none, gamma).unwrap();
        let mean_return = batch.returns(gamma).iter().sum::<f64>() / batch.len() as f64;
        prop_assert!(close(osiris_none.estimate, mean_return));
        prop_assert!(osiris_none.weights.iter().all(|&w| w == 1.0));

        let wis = estimators::wis_estimate(&batch, &bed.eval, &bed.behavior, gamma).unwrap();
        let osirwis_all = estimators::osirwis_estimate(&batch, &keep_all, gamma).unwrap();
        prop_assert!(close(wis.estimate, osirwis_all.estimate));
    }

    #[test]
    fn stepwise_special_cases(seed in any::<u64>(), n_states in 2usize..6, gamma in 0.5f64..=1.0) {
        let (bed, batch) = setup(seed, n_states, 2, gamma, 15);
        let pdis = estimators::pdis_estimate(&batch, &bed.eval, &bed.behavior, gamma).unwrap();
        let per_decision = TimedRelevance::per_decision(n_states);
        let step = estimators::stepwise_osiris_estimate(&batch, &bed.eval, &bed.behavior, &per_decision, gamma).unwrap();
        for (a, b) in pdis.contributions.iter().zip(&step.contributions) {
            prop_assert!(close(*a, *b));
        }
        let is = estimators::is_estimate(&batch, &bed.eval, &bed.behavior, gamma).unwrap();
        let never = TimedRelevance::constant(n_states, false);
        let step = estimators::stepwise_osiris_estimate(&batch, &bed.eval, &bed.behavior, &never, gamma).unwrap();
        let mean_return = batch.returns(gamma).iter().sum::<f64>() / batch.len() as f64;
        prop_assert!(close(step.estimate, mean_return));
        let every = TimedRelevance::constant(n_states, true);
        let step = estimators::stepwise_osiris_estimate(&batch, &bed.eval, &bed.behavior, &every, gamma).unwrap();
        for (a, b) in is.contributions.iter().zip(&step.contributions) {
            prop_assert!(close(*a, *b));
        }
    }

    #[test]
    fn self_normalized_estimates_stay_in_return_range(seed in any::<u64>(), bits in any::<u32>()) {
        let (bed, batch) = setup(seed, 5, 3, 1.0, 10);
        let theta = random_mask(bits, 5);
        let cfg = WeightConfig::new(&bed.eval, &bed.behavior).with_relevance(&theta);
        let report = estimators::osirwis_estimate(&batch, &cfg, 1.0).unwrap();
        let lo = report.returns.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = report.returns.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(report.estimate >= lo - 1e-12 && report.estimate <= hi + 1e-12);
        prop_assert!(report.weights.iter().all(|&w| w >= 0.0));
    }
}

/// Mean and standard error of the single-trajectory estimates.
fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, (var / n).sqrt())
}

#[test]
fn osiris_with_true_relevance_is_unbiased() {
    for seed in [3, 17, 29] {
        let (bed, batch) = setup(seed, 5, 2, 0.95, 40_000);
        let truth = dp::true_relevance(&bed.mdp, &bed.eval, &bed.behavior, DEFAULT_RELEVANCE_TOL).unwrap();
        let cfg = WeightConfig::new(&bed.eval, &bed.behavior).with_relevance(&truth);
        let report = estimators::osiris_estimate(&batch, &cfg, 0.95).unwrap();
        let (m, se) = mean_and_se(&report.contributions);
        let v = dp::exact_policy_value(&bed.mdp, &bed.eval).unwrap();
        assert!((m - v).abs() <= 4.0 * se, "seed {seed}: {m} vs {v} (se {se})");
    }
}

#[test]
fn stepwise_with_timed_relevance_is_unbiased() {
    for seed in [5, 11] {
        let (bed, batch) = setup(seed, 5, 2, 0.9, 40_000);
        let timed = dp::timed_relevance(&bed.mdp, &bed.eval, &bed.behavior, 4, DEFAULT_RELEVANCE_TOL).unwrap();
        let report = estimators::stepwise_osiris_estimate(&batch, &bed.eval, &bed.behavior, &timed, 0.9).unwrap();
        let (m, se) = mean_and_se(&report.contributions);
        let v = dp::exact_policy_value(&bed.mdp, &bed.eval).unwrap();
        assert!((m - v).abs() <= 4.0 * se, "seed {seed}: {m} vs {v} (se {se})");
    }
}

#[test]
fn empty_batch_is_rejected() {
    let bed = testbeds::three_state_chain().unwrap();
    let empty = TrajectoryBatch::new(Vec::new(), 0, "behavior");
    assert!(estimators::mc_estimate(&empty, 1.0).is_err());
    assert!(estimators::is_estimate(&empty, &bed.eval, &bed.behavior, 1.0).is_err());
}
