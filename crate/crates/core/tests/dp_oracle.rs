use osiris_core::dp::{self, DEFAULT_RELEVANCE_TOL};
use osiris_core::estimators::stepwise_osiris_estimate;
use osiris_core::testbeds;
use osiris_core::trajectory::sample_batch;
use osiris_core::{MdpSpec, Policy, Relevance, TimedRelevance};
use proptest::prelude::*;

/// Four states: 0 branches to 1 or 2, both of which end in terminal 3.
/// Action rewards differ at 0 and 1; state 2 has identical actions.
fn diamond() -> (MdpSpec, Policy, Policy) {
    let (n, na) = (4, 2);
    let mut tr = vec![0.0; n * na * n];
    let mut set = |s: usize, a: usize, next: &[(usize, f64)]| {
        for &(sp, p) in next {
            tr[(s * na + a) * n + sp] = p;
        }
    };
    set(0, 0, &[(1, 0.7), (2, 0.3)]);
    set(0, 1, &[(1, 0.2), (2, 0.8)]);
    set(1, 0, &[(3, 1.0)]);
    set(1, 1, &[(3, 1.0)]);
    set(2, 0, &[(3, 1.0)]);
    set(2, 1, &[(3, 1.0)]);
    set(3, 0, &[(3, 1.0)]);
    set(3, 1, &[(3, 1.0)]);
    let reward = vec![0.5, 0.0, 4.0, -1.0, 2.0, 2.0, 0.0, 0.0];
    let mdp = MdpSpec::new(n, na, tr, reward, vec![1.0, 0.0, 0.0, 0.0], &[3], 0.9, 100).unwrap();
    let eval = Policy::from_rows(&[vec![0.6, 0.4], vec![0.25, 0.75], vec![0.9, 0.1], vec![0.5, 0.5]]).unwrap();
    let behavior = Policy::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5], vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
    (mdp, eval, behavior)
}

/// Visits every trajectory that starts with `(s, a)` and reports
/// `(probability, step, reward)` for each reward along it.
fn enumerate(mdp: &MdpSpec, pi: &Policy, s: usize, a: usize, prob: f64, step: usize, out: &mut Vec<(f64, usize, f64)>) {
    out.push((prob, step, mdp.reward(s, a)));
    for (sp, &p) in mdp.transition_row(s, a).iter().enumerate() {
        if p == 0.0 || mdp.is_terminal(sp) {
            continue;
        }
        for ap in 0..mdp.n_actions() {
            let q = pi.prob(sp, ap);
            if q > 0.0 {
                enumerate(mdp, pi, sp, ap, prob * p * q, step + 1, out);
            }
        }
    }
}

fn enumerated_q(mdp: &MdpSpec, pi: &Policy, s: usize, a: usize) -> f64 {
    let mut paths = Vec::new();
    enumerate(mdp, pi, s, a, 1.0, 0, &mut paths);
    paths.iter().map(|&(p, k, r)| p * mdp.gamma().powi(k as i32) * r).sum()
}

fn enumerated_reward_at(mdp: &MdpSpec, pi: &Policy, s: usize, a: usize, k: usize) -> f64 {
    let mut paths = Vec::new();
    enumerate(mdp, pi, s, a, 1.0, 0, &mut paths);
    paths.iter().filter(|p| p.1 == k).map(|&(p, _, r)| p * r).sum()
}

#[test]
fn action_values_match_path_enumeration() {
    let (mdp, eval, _) = diamond();
    let q = dp::exact_q(&mdp, &eval).unwrap();
    for (s, row) in q.iter().enumerate().take(3) {
        for (a, &value) in row.iter().enumerate() {
            let oracle = enumerated_q(&mdp, &eval, s, a);
            assert!((value - oracle).abs() < 1e-12, "Q({s}, {a}) = {value} vs {oracle}");
        }
    }
    // 0.6 (0.5 + 0.9 (0.7 V1 + 0.3 V2)) + 0.4 (0.9 (0.2 V1 + 0.8 V2)), V1 = 0.25, V2 = 2
    let expected = 0.6 * (0.5 + 0.9 * (0.7 * 0.25 + 0.3 * 2.0)) + 0.4 * (0.9 * (0.2 * 0.25 + 0.8 * 2.0));
    assert!((dp::exact_policy_value(&mdp, &eval).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn true_relevance_on_diamond() {
    let (mdp, eval, behavior) = diamond();
    let r = dp::true_relevance(&mdp, &eval, &behavior, DEFAULT_RELEVANCE_TOL).unwrap();
    assert_eq!(r.bits(), &[true, true, false, false]);
}

#[test]
fn timed_relevance_matches_enumeration() {
    let (mdp, eval, behavior) = diamond();
    let window = 3;
    let timed = dp::timed_relevance(&mdp, &eval, &behavior, window, DEFAULT_RELEVANCE_TOL).unwrap();
    for s in 0..3 {
        for k in 0..window {
            let values: Vec<f64> = (0..2).map(|a| enumerated_reward_at(&mdp, &eval, s, a, k)).collect();
            let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - values.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(
                timed.is_relevant(s, k as i64),
                spread > DEFAULT_RELEVANCE_TOL,
                "state {s}, offset {k}"
            );
        }
        assert!(!timed.is_relevant(s, -1));
        assert!(timed.is_relevant(s, window as i64 + 5));
    }
    // state 0: immediate reward and next reward both depend on the action
    assert!(timed.is_relevant(0, 0) && timed.is_relevant(0, 1));
    assert!(!timed.is_relevant(0, 2));
}

#[test]
fn stepwise_with_enumerated_relevance_is_unbiased() {
    let (mdp, eval, behavior) = diamond();
    let window = 3;
    let mut table = Vec::new();
    for s in 0..4 {
        for k in 0..window {
            let values: Vec<f64> = (0..2).map(|a| enumerated_reward_at(&mdp, &eval, s, a, k)).collect();
            table.push((values[0] - values[1]).abs() > DEFAULT_RELEVANCE_TOL);
        }
    }
    let timed = TimedRelevance::new(4, window, table, vec![true; 4], vec![false; 4]).unwrap();
    let batch = sample_batch(&mdp, &behavior, 100_000, 8, "behavior").unwrap();
    let report = stepwise_osiris_estimate(&batch, &eval, &behavior, &timed, mdp.gamma()).unwrap();
    let n = report.contributions.len() as f64;
    let m = report.contributions.iter().sum::<f64>() / n;
    let se = (report.contributions.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n / n).sqrt();
    let v = dp::exact_policy_value(&mdp, &eval).unwrap();
    assert!((m - v).abs() <= 4.0 * se, "{m} vs {v} (se {se})");
}

#[test]
fn on_policy_returns_agree_with_dp() {
    for seed in 0..3 {
        let bed = testbeds::random_with_irrelevant(seed, 5, 3, 1.0).unwrap();
        let batch = sample_batch(&bed.mdp, &bed.eval, 50_000, seed, "evaluation").unwrap();
        let g = batch.returns(1.0);
        let n = g.len() as f64;
        let m = g.iter().sum::<f64>() / n;
        let se = (g.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n / n).sqrt();
        let v = dp::exact_policy_value(&bed.mdp, &bed.eval).unwrap();
        assert!((m - v).abs() <= 4.0 * se, "seed {seed}: {m} vs {v} (se {se})");
    }
}

#[test]
fn self_loop_truncation_is_reported() {
    // stay with probability 0.99 under the only action
    let mdp = MdpSpec::new(
        2,
        1,
        vec![0.99, 0.01, 0.0, 1.0],
        vec![1.0, 0.0],
        vec![1.0, 0.0],
        &[1],
        1.0,
        50,
    )
    .unwrap();
    let pi = Policy::new(2, 1, vec![1.0, 1.0]).unwrap();
    let v = dp::evaluate(&mdp, &pi).unwrap();
    assert!(v.truncated());
    assert!((v.unabsorbed_mass - 0.99f64.powi(50)).abs() < 1e-12);
    // truncated geometric sum of 1 + 0.99 + ... over 50 steps
    assert!((v.value - (1.0 - 0.99f64.powi(50)) / 0.01).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bellman_consistency(seed in any::<u64>(), n_states in 2usize..7, n_actions in 1usize..4, gamma in 0.5f64..=1.0) {
        let bed = testbeds::random_with_irrelevant(seed, n_states, n_actions, gamma).unwrap();
        let v = dp::evaluate(&bed.mdp, &bed.eval).unwrap();
        for s in 0..n_states {
            let mean_q: f64 = (0..n_actions).map(|a| bed.eval.prob(s, a) * v.q(s, a)).sum();
            prop_assert!((v.state_values[s] - mean_q).abs() < 1e-9);
            if bed.mdp.is_terminal(s) {
                continue;
            }
            for a in 0..n_actions {
                let backup = bed.mdp.reward(s, a)
                    + gamma * bed.mdp.transition_row(s, a).iter().zip(&v.state_values).map(|(p, v)| p * v).sum::<f64>();
                prop_assert!((v.q(s, a) - backup).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn composite_policy_keeps_value(seed in any::<u64>(), n_actions in 2usize..4) {
        let bed = testbeds::random_with_irrelevant(seed, 5, n_actions, 1.0).unwrap();
        let truth = dp::true_relevance(&bed.mdp, &bed.eval, &bed.behavior, DEFAULT_RELEVANCE_TOL).unwrap();
        let composite = dp::composite_policy(&bed.eval, &bed.behavior, &truth).unwrap();
        let v = dp::exact_policy_value(&bed.mdp, &bed.eval).unwrap();
        let v_composite = dp::exact_policy_value(&bed.mdp, &composite).unwrap();
        prop_assert!((v - v_composite).abs() <= 1e-8);
    }

    #[test]
    fn keeping_every_state_reproduces_eval(seed in any::<u64>()) {
        let bed = testbeds::random_with_irrelevant(seed, 4, 2, 0.9).unwrap();
        let composite = dp::composite_policy(&bed.eval, &bed.behavior, &Relevance::all(4)).unwrap();
        prop_assert_eq!(composite, bed.eval);
    }

    #[test]
    fn composite_of_identical_policies_is_idempotent(seed in any::<u64>(), bits in any::<u8>()) {
        let bed = testbeds::random_with_irrelevant(seed, 5, 3, 0.9).unwrap();
        let theta = Relevance::new((0..5).map(|s| bits >> s & 1 == 1).collect());
        let composite = dp::composite_policy(&bed.eval, &bed.eval, &theta).unwrap();
        prop_assert_eq!(composite, bed.eval.clone());
        let none = dp::composite_policy(&bed.eval, &bed.behavior, &Relevance::none(5)).unwrap();
        prop_assert_eq!(none, bed.behavior);
    }
}
