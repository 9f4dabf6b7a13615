//! Finite MDPs, stochastic policies and relevance mappings.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Tolerance on probability rows summing to one.
pub const PROB_TOL: f64 = 1e-12;

/// Default hard cap on trajectory length and on backward-induction depth.
pub const DEFAULT_T_MAX: usize = 1000;

fn check_distribution(what: &'static str, row: usize, probs: &[f64]) -> Result<()> {
    let mut total = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidRow {
                what,
                row,
                reason: format!("entry {i} is {p}"),
            });
        }
        total += p;
    }
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidRow {
            what,
            row,
            reason: format!("sums to {total}"),
        });
    }
    Ok(())
}

/// A finite episodic MDP with dense tables.
///
/// Rewards are attached to `(s, a)` and collected on the transition out of
/// `s`. Terminal states are absorbing; a trajectory stops when it enters one.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MdpSpec {
    n_states: usize,
    n_actions: usize,
    /// `[s][a][s']`, flattened.
    transition: Vec<f64>,
    /// `[s][a]`, flattened.
    reward: Vec<f64>,
    initial: Vec<f64>,
    terminal: Vec<bool>,
    gamma: f64,
    t_max: usize,
}

impl MdpSpec {
    /// Builds and validates an MDP.
    ///
    /// `transition` is indexed `[s][a][s']` and `reward` `[s][a]`, both
    /// flattened row-major.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        initial: Vec<f64>,
        terminal_states: &[usize],
        gamma: f64,
        t_max: usize,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Shape("MDP needs at least one state and one action".into()));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(Error::Shape(format!(
                "transition table has {} entries, expected {}",
                transition.len(),
                n_states * n_actions * n_states
            )));
        }
        if reward.len() != n_states * n_actions {
            return Err(Error::Shape(format!(
                "reward table has {} entries, expected {}",
                reward.len(),
                n_states * n_actions
            )));
        }
        if initial.len() != n_states {
            return Err(Error::Shape(format!(
                "initial distribution has {} entries, expected {n_states}",
                initial.len()
            )));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!("gamma {gamma} outside [0, 1]")));
        }
        if t_max == 0 {
            return Err(Error::InvalidArgument("t_max must be positive".into()));
        }
        let mut terminal = vec![false; n_states];
        for &s in terminal_states {
            if s >= n_states {
                return Err(Error::Shape(format!("terminal state {s} out of range")));
            }
            terminal[s] = true;
        }
        for (row, chunk) in transition.chunks(n_states).enumerate() {
            check_distribution("transition", row, chunk)?;
        }
        if let Some((i, r)) = reward.iter().enumerate().find(|(_, r)| !r.is_finite()) {
            return Err(Error::InvalidRow {
                what: "reward",
                row: i / n_actions,
                reason: format!("entry {} is {r}", i % n_actions),
            });
        }
        check_distribution("initial distribution", 0, &initial)?;
        if let Some(s) = (0..n_states).find(|&s| terminal[s] && initial[s] > 0.0) {
            return Err(Error::InvalidRow {
                what: "initial distribution",
                row: 0,
                reason: format!("puts mass on terminal state {s}"),
            });
        }
        Ok(Self {
            n_states,
            n_actions,
            transition,
            reward,
            initial,
            terminal,
            gamma,
            t_max,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    /// Same MDP with a different discount.
    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!("gamma {gamma} outside [0, 1]")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    /// Same MDP with a different horizon cap.
    pub fn with_t_max(mut self, t_max: usize) -> Result<Self> {
        if t_max == 0 {
            return Err(Error::InvalidArgument("t_max must be positive".into()));
        }
        self.t_max = t_max;
        Ok(self)
    }

    /// Successor distribution `P(· | s, a)`.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn initial_distribution(&self) -> &[f64] {
        &self.initial
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn terminal_states(&self) -> Vec<usize> {
        (0..self.n_states).filter(|&s| self.terminal[s]).collect()
    }

    /// Flattened `[s][a][s']` transition table.
    pub fn transition_table(&self) -> &[f64] {
        &self.transition
    }

    /// Flattened `[s][a]` reward table.
    pub fn reward_table(&self) -> &[f64] {
        &self.reward
    }
}

/// A stationary stochastic policy: one categorical distribution per state.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Policy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    /// Builds a policy from a flattened `[s][a]` table.
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 || probs.len() != n_states * n_actions {
            return Err(Error::Shape(format!(
                "policy table has {} entries for {n_states} states x {n_actions} actions",
                probs.len()
            )));
        }
        for (row, chunk) in probs.chunks(n_actions).enumerate() {
            check_distribution("policy", row, chunk)?;
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    /// Builds a policy from per-state rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_actions = rows.first().map_or(0, Vec::len);
        if let Some(row) = rows.iter().position(|r| r.len() != n_actions) {
            return Err(Error::InvalidRow {
                what: "policy",
                row,
                reason: format!("has {} actions, expected {n_actions}", rows[row].len()),
            });
        }
        Self::new(rows.len(), n_actions, rows.concat())
    }

    /// ε-greedy policy: the greedy action gets `1 - ε + ε/|A|`, every other
    /// action `ε/|A|`. States without a greedy action are uniform.
    pub fn epsilon_greedy(n_actions: usize, greedy: &[Option<usize>], epsilon: &[f64]) -> Result<Self> {
        if greedy.len() != epsilon.len() {
            return Err(Error::Shape("greedy actions and epsilons differ in length".into()));
        }
        let mut probs = Vec::with_capacity(greedy.len() * n_actions);
        for (s, (&g, &eps)) in greedy.iter().zip(epsilon).enumerate() {
            if !(0.0..=1.0).contains(&eps) {
                return Err(Error::InvalidRow {
                    what: "policy",
                    row: s,
                    reason: format!("epsilon {eps} outside [0, 1]"),
                });
            }
            let base = match g {
                Some(_) => eps / n_actions as f64,
                None => 1.0 / n_actions as f64,
            };
            for a in 0..n_actions {
                let extra = if g == Some(a) { 1.0 - eps } else { 0.0 };
                probs.push(base + extra);
            }
            if let Some(a) = g.filter(|&a| a >= n_actions) {
                return Err(Error::InvalidRow {
                    what: "policy",
                    row: s,
                    reason: format!("greedy action {a} out of range"),
                });
            }
        }
        Self::new(greedy.len(), n_actions, probs)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    /// Flattened `[s][a]` table.
    pub fn table(&self) -> &[f64] {
        &self.probs
    }

    /// Checks that the policy covers every state and action of `mdp`.
    pub fn check_shape(&self, mdp: &MdpSpec) -> Result<()> {
        if self.n_states != mdp.n_states() || self.n_actions != mdp.n_actions() {
            return Err(Error::Shape(format!(
                "policy is {}x{}, MDP is {}x{}",
                self.n_states,
                self.n_actions,
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }
}

/// Binary relevance bit per state. `true` keeps the state's likelihood ratio.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Relevance {
    bits: Vec<bool>,
}

impl Relevance {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn all(n_states: usize) -> Self {
        Self::new(vec![true; n_states])
    }

    pub fn none(n_states: usize) -> Self {
        Self::new(vec![false; n_states])
    }

    pub fn from_relevant(n_states: usize, relevant: &[usize]) -> Self {
        let mut bits = vec![false; n_states];
        for &s in relevant {
            bits[s] = true;
        }
        Self::new(bits)
    }

    pub fn is_relevant(&self, s: usize) -> bool {
        self.bits[s]
    }

    pub fn set(&mut self, s: usize, relevant: bool) {
        self.bits[s] = relevant;
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Indices of relevant states.
    pub fn relevant_states(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&s| self.bits[s]).collect()
    }
}

/// Relevance of a state to the reward `Δt` steps away.
///
/// Bits are stored for `0 <= Δt < window`. Beyond the window a per-state
/// `tail` bit applies; for negative `Δt` a per-state `past` bit applies.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimedRelevance {
    n_states: usize,
    window: usize,
    /// `[s][Δt]` for `0 <= Δt < window`.
    table: Vec<bool>,
    tail: Vec<bool>,
    past: Vec<bool>,
}

impl TimedRelevance {
    /// `table` is indexed `[s][Δt]` with `window` columns.
    pub fn new(n_states: usize, window: usize, table: Vec<bool>, tail: Vec<bool>, past: Vec<bool>) -> Result<Self> {
        if table.len() != n_states * window || tail.len() != n_states || past.len() != n_states {
            return Err(Error::Shape("timed relevance tables do not match state count".into()));
        }
        Ok(Self {
            n_states,
            window,
            table,
            tail,
            past,
        })
    }

    /// The same bit for every state and every offset.
    pub fn constant(n_states: usize, relevant: bool) -> Self {
        Self {
            n_states,
            window: 0,
            table: Vec::new(),
            tail: vec![relevant; n_states],
            past: vec![relevant; n_states],
        }
    }

    /// `1{Δt >= 0}`: recovers per-decision importance sampling.
    pub fn per_decision(n_states: usize) -> Self {
        Self {
            n_states,
            window: 0,
            table: Vec::new(),
            tail: vec![true; n_states],
            past: vec![false; n_states],
        }
    }

    /// Uses a time-independent mapping for `Δt >= 0` and zero for the past.
    pub fn from_relevance(relevance: &Relevance) -> Self {
        Self {
            n_states: relevance.len(),
            window: 0,
            table: Vec::new(),
            tail: relevance.bits().to_vec(),
            past: vec![false; relevance.len()],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn is_relevant(&self, s: usize, dt: i64) -> bool {
        if dt < 0 {
            self.past[s]
        } else if (dt as u64) < self.window as u64 {
            self.table[s * self.window + dt as usize]
        } else {
            self.tail[s]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> MdpSpec {
        // 0 -> 1 -> 2(terminal), single action
        MdpSpec::new(
            3,
            1,
            vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0],
            vec![1.0, 2.0, 0.0],
            vec![1.0, 0.0, 0.0],
            &[2],
            1.0,
            10,
        )
        .unwrap()
    }

    #[test]
    fn valid_mdp_round_trips_accessors() {
        let m = chain();
        assert_eq!(m.transition_row(0, 0), &[0.0, 1.0, 0.0]);
        assert_eq!(m.reward(1, 0), 2.0);
        assert!(m.is_terminal(2));
        assert_eq!(m.terminal_states(), vec![2]);
    }

    #[test]
    fn transition_row_not_summing_to_one_is_named() {
        let err = MdpSpec::new(
            2,
            1,
            vec![0.5, 0.4, 0.0, 1.0],
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            &[1],
            1.0,
            10,
        )
        .unwrap_err();
        match err {
            Error::InvalidRow { what, row, .. } => {
                assert_eq!(what, "transition");
                assert_eq!(row, 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn initial_mass_on_terminal_is_rejected() {
        let err = MdpSpec::new(
            2,
            1,
            vec![0.0, 1.0, 0.0, 1.0],
            vec![0.0; 2],
            vec![0.5, 0.5],
            &[1],
            1.0,
            5,
        );
        assert!(err.is_err());
    }

    #[test]
    fn negative_policy_entry_is_rejected() {
        assert!(Policy::new(1, 2, vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn epsilon_greedy_rows() {
        let p = Policy::epsilon_greedy(4, &[Some(1), None], &[0.1, 0.5]).unwrap();
        assert!((p.prob(0, 1) - 0.925).abs() < 1e-15);
        assert!((p.prob(0, 0) - 0.025).abs() < 1e-15);
        assert_eq!(p.row(1), &[0.25; 4]);
        let det = Policy::epsilon_greedy(4, &[Some(2)], &[0.0]).unwrap();
        assert_eq!(det.row(0), &[0.0, 0.0, 1.0, 0.0]);
        let uniform = Policy::epsilon_greedy(4, &[Some(2)], &[1.0]).unwrap();
        assert_eq!(uniform.row(0), &[0.25; 4]);
    }

    #[test]
    fn timed_relevance_default_rules() {
        let pdis = TimedRelevance::per_decision(2);
        assert!(pdis.is_relevant(0, 0));
        assert!(pdis.is_relevant(1, 7));
        assert!(!pdis.is_relevant(1, -1));

        let t = TimedRelevance::new(1, 2, vec![false, true], vec![false], vec![false]).unwrap();
        assert!(!t.is_relevant(0, 0));
        assert!(t.is_relevant(0, 1));
        assert!(!t.is_relevant(0, 2));
    }
}
