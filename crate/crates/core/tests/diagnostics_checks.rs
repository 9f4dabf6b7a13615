use osiris_core::diagnostics::{
    check_bias_identity, check_length_propositions, check_omitted_mean, check_variance_identity, Tolerance,
};
use osiris_core::dp::{self, DEFAULT_RELEVANCE_TOL};
use osiris_core::testbeds;
use osiris_core::{Policy, Relevance};

#[test]
fn chain_identities_hold() {
    let bed = testbeds::three_state_chain().unwrap();
    let theta = dp::true_relevance(&bed.mdp, &bed.eval, &bed.behavior, DEFAULT_RELEVANCE_TOL).unwrap();
    assert_eq!(theta.bits(), &[true, false, false]);
    let tol = Tolerance::default();
    let omitted = check_omitted_mean(&bed.mdp, &bed.eval, &bed.behavior, &theta, 50_000, 1, &tol).unwrap();
    assert!(omitted.pass, "{omitted:?}");
    let variance = check_variance_identity(&bed.mdp, &bed.eval, &bed.behavior, &theta, 50_000, 2, &tol).unwrap();
    assert!(variance.pass, "{variance:?}");
    let bias = check_bias_identity(&bed.mdp, &bed.eval, &bed.behavior, &theta, 50_000, 3, &tol).unwrap();
    assert!(bias.pass, "{bias:?}");
}

#[test]
fn omitting_a_relevant_state_biases_osiris_but_not_the_identity() {
    let bed = testbeds::three_state_chain().unwrap();
    let theta = Relevance::none(3);
    let r = check_bias_identity(
        &bed.mdp,
        &bed.eval,
        &bed.behavior,
        &theta,
        100_000,
        7,
        &Tolerance::default(),
    )
    .unwrap();
    assert!(r.pass, "{r:?}");
    let mean = r.term("osiris_mean").unwrap();
    let se = r.term("osiris_mean_se").unwrap();
    assert!((mean - r.rhs).abs() > 4.0 * se, "{r:?}");
}

#[test]
fn nested_products_follow_both_propositions() {
    let eval = Policy::epsilon_greedy(4, &[Some(1)], &[0.1]).unwrap();
    let behavior = Policy::epsilon_greedy(4, &[Some(1)], &[0.5]).unwrap();
    let states = [0; 6];
    let subsets = vec![vec![0], vec![0, 1, 2], vec![0, 1, 2, 3, 4, 5]];
    let tol = Tolerance::default();
    let r = check_length_propositions(&eval, &behavior, &states, &subsets, 50_000, 12, &tol).unwrap();
    assert!(r.pass, "{r:?}");
    let swapped = check_length_propositions(&behavior, &eval, &states, &subsets, 50_000, 12, &tol).unwrap();
    assert!(swapped.log_mean_decreasing, "{swapped:?}");
}
