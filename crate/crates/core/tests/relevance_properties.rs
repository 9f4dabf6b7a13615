use osiris_core::estimators::WeightConfig;
use osiris_core::relevance::{
    collect_splits, estimate_relevance, estimate_relevance_map, PartitionKind, RelevanceConfig, TestKind,
};
use osiris_core::rng::mix;
use osiris_core::stats::{ks_statistic, smirnov_test, student_t_two_sided, welch_t_test};
use osiris_core::testbeds::{self, Testbed};
use osiris_core::trajectory::sample_batch;
use proptest::collection::vec;
use proptest::prelude::*;

fn sample(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    vec(-1e3f64..1e3, len)
}

fn partitions() -> impl Strategy<Value = PartitionKind> {
    prop_oneof![Just(PartitionKind::RatioBinary), Just(PartitionKind::ReturnBinary)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn welch_is_antisymmetric(a in sample(2..30), b in sample(2..30)) {
        let ab = welch_t_test(&a, &b, 0.05);
        let ba = welch_t_test(&b, &a, 0.05);
        prop_assert_eq!(ab.statistic, -ba.statistic);
        prop_assert_eq!(ab.p_value, ba.p_value);
        prop_assert_eq!(ab.df, ba.df);
    }

    #[test]
    fn welch_p_value_is_a_probability(a in sample(2..30), b in sample(2..30), alpha in 0.0f64..=1.0) {
        let r = welch_t_test(&a, &b, alpha);
        prop_assert!((0.0..=1.0).contains(&r.p_value));
        prop_assert_eq!(r.reject, r.p_value < alpha);
    }

    #[test]
    fn student_tail_decreases_in_statistic(t in 0.0f64..20.0, step in 0.01f64..5.0, df in 1.0f64..200.0) {
        prop_assert!(student_t_two_sided(t + step, df) <= student_t_two_sided(t, df));
    }

    #[test]
    fn smirnov_statistic_is_bounded(a in sample(1..40), b in sample(1..40), alpha in 0.0f64..=1.0) {
        let r = smirnov_test(&a, &b, alpha);
        prop_assert!((0.0..=1.0).contains(&r.statistic));
        prop_assert!((0.0..=1.0).contains(&r.p_value));
        prop_assert_eq!(r.reject, r.p_value < alpha);
        prop_assert_eq!(ks_statistic(&a, &b), ks_statistic(&b, &a));
    }

    #[test]
    fn partition_is_exhaustive(seed in any::<u64>(), partition in partitions()) {
        let bed = testbeds::random_with_irrelevant(seed, 5, 3, 1.0).unwrap();
        let batch = sample_batch(&bed.mdp, &bed.behavior, 20, seed, "behavior").unwrap();
        let cfg = WeightConfig::new(&bed.eval, &bed.behavior);
        let splits = collect_splits(&batch, 5, &cfg, 1.0, partition).unwrap();
        let visits = batch.visit_counts(5);
        for (split, &n) in splits.iter().zip(&visits) {
            prop_assert_eq!(split.visits(), n);
        }
    }

    #[test]
    fn alpha_extremes_bypass_the_test(seed in any::<u64>(), n in 1usize..30, partition in partitions(), smirnov in any::<bool>()) {
        let bed = testbeds::random_with_irrelevant(seed, 5, 2, 1.0).unwrap();
        let batch = sample_batch(&bed.mdp, &bed.behavior, n, seed, "behavior").unwrap();
        let cfg = WeightConfig::new(&bed.eval, &bed.behavior);
        let test = if smirnov { TestKind::Smirnov } else { TestKind::Welch };
        let at = |alpha| RelevanceConfig { alpha, test, partition, min_samples_per_side: 2 };
        let visits = batch.visit_counts(5);
        let zero = estimate_relevance_map(&batch, &cfg, &at(0.0), 1.0).unwrap();
        let one = estimate_relevance_map(&batch, &cfg, &at(1.0), 1.0).unwrap();
        for (s, &count) in visits.iter().enumerate() {
            prop_assert!(!zero.is_relevant(s));
            prop_assert_eq!(one.is_relevant(s), count > 0);
            prop_assert_eq!(estimate_relevance(&batch, s, &cfg, &at(1.0), 1.0).unwrap(), count > 0);
        }
    }

    #[test]
    fn estimation_is_deterministic(seed in any::<u64>()) {
        let bed = testbeds::random_with_irrelevant(seed, 5, 2, 1.0).unwrap();
        let batch = sample_batch(&bed.mdp, &bed.behavior, 25, seed, "behavior").unwrap();
        let cfg = WeightConfig::new(&bed.eval, &bed.behavior);
        let rcfg = RelevanceConfig::default();
        prop_assert_eq!(
            estimate_relevance_map(&batch, &cfg, &rcfg, 1.0).unwrap(),
            estimate_relevance_map(&batch, &cfg, &rcfg, 1.0).unwrap()
        );
    }
}

fn rejection_rate(bed: &Testbed, batch_size: usize, n_batches: usize, seed: u64) -> f64 {
    let cfg = WeightConfig::new(&bed.eval, &bed.behavior);
    let rcfg = RelevanceConfig::with_alpha(0.05);
    let rejections = (0..n_batches)
        .filter(|&i| {
            let batch = sample_batch(&bed.mdp, &bed.behavior, batch_size, mix(seed, i as u64), "behavior").unwrap();
            estimate_relevance(&batch, 0, &cfg, &rcfg, 1.0).unwrap()
        })
        .count();
    rejections as f64 / n_batches as f64
}

#[test]
fn type_one_error_is_controlled() {
    let bed = testbeds::null_relevance().unwrap();
    let rate = rejection_rate(&bed, 25, 1000, 41);
    assert!(rate <= 0.08, "rejection rate {rate}");
}

#[test]
fn power_grows_with_batch_size() {
    let bed = testbeds::unit_gap().unwrap();
    let rates: Vec<f64> = [10, 50, 250]
        .iter()
        .map(|&n| rejection_rate(&bed, n, 400, 43))
        .collect();
    assert!(rates[0] <= rates[1] && rates[1] <= rates[2], "rates {rates:?}");
    assert!(rates[2] > 0.95, "rates {rates:?}");
}
