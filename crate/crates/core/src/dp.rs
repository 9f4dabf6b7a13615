//! Exact finite-horizon policy evaluation and relevance oracles.
//!
//! Values come from backward induction over `t_max` steps rather than a
//! linear solve, which stays exact for undiscounted episodic problems.

use alloc::vec;
use alloc::vec::Vec;

use crate::mdp::{MdpSpec, Policy, Relevance, TimedRelevance};
use crate::{Error, Result};

/// Absorption mass left after `t_max` steps above which a value is flagged.
pub const TRUNCATION_WARN_MASS: f64 = 1e-9;

/// Default tolerance on the action-value range for relevance.
pub const DEFAULT_RELEVANCE_TOL: f64 = 1e-9;

/// Result of exact policy evaluation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PolicyValue {
    /// `V^π = Σ_s P(s_1 = s) V^π(s)`.
    pub value: f64,
    pub state_values: Vec<f64>,
    /// Flattened `[s][a]` action values consistent with `state_values`.
    pub q_values: Vec<f64>,
    /// Probability of still being outside a terminal state after `t_max`
    /// steps from the initial distribution.
    pub unabsorbed_mass: f64,
    n_actions: usize,
}

impl PolicyValue {
    pub fn q(&self, s: usize, a: usize) -> f64 {
        self.q_values[s * self.n_actions + a]
    }

    /// The horizon cap cut off non-negligible probability mass.
    pub fn truncated(&self) -> bool {
        self.unabsorbed_mass > TRUNCATION_WARN_MASS
    }
}

fn backup(mdp: &MdpSpec, s: usize, a: usize, next: &[f64]) -> f64 {
    let row = mdp.transition_row(s, a);
    let mut acc = 0.0;
    for (sp, &p) in row.iter().enumerate() {
        if p != 0.0 {
            acc += p * next[sp];
        }
    }
    mdp.reward(s, a) + mdp.gamma() * acc
}

/// Evaluates `policy` exactly by backward induction over `t_max` steps.
pub fn evaluate(mdp: &MdpSpec, policy: &Policy) -> Result<PolicyValue> {
    policy.check_shape(mdp)?;
    let n = mdp.n_states();
    let na = mdp.n_actions();
    let mut v = vec![0.0; n];
    let mut q = vec![0.0; n * na];
    for _ in 0..mdp.t_max() {
        for s in 0..n {
            if mdp.is_terminal(s) {
                continue;
            }
            for a in 0..na {
                q[s * na + a] = backup(mdp, s, a, &v);
            }
        }
        let mut next = vec![0.0; n];
        for s in 0..n {
            if !mdp.is_terminal(s) {
                next[s] = policy
                    .row(s)
                    .iter()
                    .zip(&q[s * na..(s + 1) * na])
                    .map(|(p, q)| p * q)
                    .sum();
            }
        }
        v = next;
    }
    let value = mdp.initial_distribution().iter().zip(&v).map(|(p, v)| p * v).sum();
    Ok(PolicyValue {
        value,
        state_values: v,
        q_values: q,
        unabsorbed_mass: unabsorbed_mass(mdp, policy),
        n_actions: na,
    })
}

/// Probability of not having entered a terminal state within `t_max` steps.
pub fn unabsorbed_mass(mdp: &MdpSpec, policy: &Policy) -> f64 {
    let n = mdp.n_states();
    let mut dist: Vec<f64> = mdp.initial_distribution().to_vec();
    for _ in 0..mdp.t_max() {
        let mut next = vec![0.0; n];
        for (s, &mass) in dist.iter().enumerate() {
            if mdp.is_terminal(s) || mass == 0.0 {
                continue;
            }
            for a in 0..mdp.n_actions() {
                let pa = mass * policy.prob(s, a);
                if pa == 0.0 {
                    continue;
                }
                for (sp, &p) in mdp.transition_row(s, a).iter().enumerate() {
                    next[sp] += pa * p;
                }
            }
        }
        dist = next;
    }
    (0..n).filter(|&s| !mdp.is_terminal(s)).map(|s| dist[s]).sum()
}

/// Exact value of `policy` from the initial distribution.
pub fn exact_policy_value(mdp: &MdpSpec, policy: &Policy) -> Result<f64> {
    evaluate(mdp, policy).map(|v| v.value)
}

/// Exact action values `Q^π(s, a)` as rows per state.
pub fn exact_q(mdp: &MdpSpec, policy: &Policy) -> Result<Vec<Vec<f64>>> {
    let v = evaluate(mdp, policy)?;
    Ok(v.q_values.chunks(mdp.n_actions()).map(<[f64]>::to_vec).collect())
}

/// Follows `eval` where `relevance` is set and `behavior` elsewhere.
pub fn composite_policy(eval: &Policy, behavior: &Policy, relevance: &Relevance) -> Result<Policy> {
    if eval.n_states() != behavior.n_states()
        || eval.n_actions() != behavior.n_actions()
        || relevance.len() != eval.n_states()
    {
        return Err(Error::Shape("composite policy inputs disagree on shape".into()));
    }
    let mut table = Vec::with_capacity(eval.table().len());
    for s in 0..eval.n_states() {
        let src = if relevance.is_relevant(s) { eval } else { behavior };
        table.extend_from_slice(src.row(s));
    }
    Policy::new(eval.n_states(), eval.n_actions(), table)
}

fn supported_actions<'a>(eval: &'a Policy, behavior: &'a Policy, s: usize) -> impl Iterator<Item = usize> + 'a {
    (0..eval.n_actions()).filter(move |&a| eval.prob(s, a) > 0.0 || behavior.prob(s, a) > 0.0)
}

/// True state relevance: a state is relevant when `Q^{π_e}(s, ·)` varies by
/// more than `tol` over actions either policy can take. Terminal states are
/// irrelevant.
pub fn true_relevance(mdp: &MdpSpec, eval: &Policy, behavior: &Policy, tol: f64) -> Result<Relevance> {
    behavior.check_shape(mdp)?;
    let v = evaluate(mdp, eval)?;
    let mut bits = vec![false; mdp.n_states()];
    for (s, bit) in bits.iter_mut().enumerate() {
        if mdp.is_terminal(s) {
            continue;
        }
        let (lo, hi) = supported_actions(eval, behavior, s)
            .map(|a| v.q(s, a))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), q| (lo.min(q), hi.max(q)));
        *bit = hi - lo > tol;
    }
    Ok(Relevance::new(bits))
}

/// Expected reward `k` steps after leaving each state under `eval`:
/// `u_k(s) = E[r_{t+k} | s_t = s]`, with zero once terminated.
fn future_reward_profiles(mdp: &MdpSpec, eval: &Policy, depth: usize) -> Vec<Vec<f64>> {
    let n = mdp.n_states();
    let na = mdp.n_actions();
    let mut out = Vec::with_capacity(depth);
    let mut u: Vec<f64> = (0..n)
        .map(|s| {
            if mdp.is_terminal(s) {
                0.0
            } else {
                (0..na).map(|a| eval.prob(s, a) * mdp.reward(s, a)).sum()
            }
        })
        .collect();
    for _ in 0..depth {
        let mut next = vec![0.0; n];
        for (s, slot) in next.iter_mut().enumerate() {
            if mdp.is_terminal(s) {
                continue;
            }
            let mut acc = 0.0;
            for a in 0..na {
                let pa = eval.prob(s, a);
                if pa == 0.0 {
                    continue;
                }
                let row = mdp.transition_row(s, a);
                acc += pa * row.iter().zip(&u).map(|(p, u)| p * u).sum::<f64>();
            }
            *slot = acc;
        }
        out.push(core::mem::replace(&mut u, next));
    }
    out
}

/// Relevance to the reward `Δt` steps away for `0 <= Δt < window`.
///
/// A state is relevant at offset `Δt` when `E[r_{t+Δt} | s_t = s, a_t = a]`
/// under `eval` varies by more than `tol` across supported actions. Offsets
/// past the window keep every ratio (always unbiased) and negative offsets
/// drop them, since `a_t` cannot influence earlier rewards.
pub fn timed_relevance(
    mdp: &MdpSpec,
    eval: &Policy,
    behavior: &Policy,
    window: usize,
    tol: f64,
) -> Result<TimedRelevance> {
    eval.check_shape(mdp)?;
    behavior.check_shape(mdp)?;
    let n = mdp.n_states();
    let profiles = future_reward_profiles(mdp, eval, window);
    let mut table = vec![false; n * window];
    for s in (0..n).filter(|&s| !mdp.is_terminal(s)) {
        for dt in 0..window {
            let (lo, hi) = supported_actions(eval, behavior, s)
                .map(|a| {
                    if dt == 0 {
                        mdp.reward(s, a)
                    } else {
                        let row = mdp.transition_row(s, a);
                        row.iter().zip(&profiles[dt - 1]).map(|(p, u)| p * u).sum()
                    }
                })
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
            table[s * window + dt] = hi - lo > tol;
        }
    }
    let tail = (0..n).map(|s| !mdp.is_terminal(s)).collect();
    TimedRelevance::new(n, window, table, tail, vec![false; n])
}
