//! Trajectories, seeded simulation and discounted returns.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand_core::RngCore;

use crate::mdp::{MdpSpec, Policy};
use crate::{rng, Error, Result};

/// One episode `s_1, a_1, r_1, ..., s_T, a_T, r_T, s_{T+1}`.
///
/// Indices in this type are zero-based: `states[t]`, `actions[t]` and
/// `rewards[t]` describe step `t + 1`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    /// The horizon cap was hit before reaching a terminal state.
    pub truncated: bool,
}

impl Trajectory {
    /// Number of transitions `T`.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// `(s_t, a_t)` pairs for `t = 1..=T`.
    pub fn steps(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.states.iter().copied().zip(self.actions.iter().copied())
    }

    /// Discounted return `g(τ) = Σ_t γ^{t-1} r_t`.
    pub fn discounted_return(&self, gamma: f64) -> f64 {
        let mut g = 0.0;
        for &r in self.rewards.iter().rev() {
            g = r + gamma * g;
        }
        g
    }

    /// `g_{t1:t2} = Σ_{t=t1}^{t2} γ^{t-t1} r_t` with one-based, inclusive
    /// bounds. An empty window (`t2 < t1`) sums to zero.
    pub fn return_between(&self, t1: usize, t2: usize, gamma: f64) -> Result<f64> {
        if t1 == 0 || t1 > self.len() {
            return Err(Error::ReturnWindow { t1, len: self.len() });
        }
        if t2 < t1 {
            return Ok(0.0);
        }
        if t2 > self.len() {
            return Err(Error::InvalidArgument(format!(
                "return window ends at step {t2} but trajectory has {} steps",
                self.len()
            )));
        }
        let mut g = 0.0;
        for &r in self.rewards[t1 - 1..t2].iter().rev() {
            g = r + gamma * g;
        }
        Ok(g)
    }

    /// Discounted returns-to-go `g_{t:T}` for every step (zero-based).
    pub fn returns_to_go(&self, gamma: f64) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.len()];
        let mut g = 0.0;
        for t in (0..self.len()).rev() {
            g = self.rewards[t] + gamma * g;
            out[t] = g;
        }
        out
    }

    /// Checks the structural invariants against an MDP.
    pub fn validate(&self, mdp: &MdpSpec) -> Result<()> {
        let t = self.len();
        if self.states.len() != t + 1 || self.rewards.len() != t {
            return Err(Error::Shape("trajectory sequences have inconsistent lengths".into()));
        }
        if self.states.iter().any(|&s| s >= mdp.n_states()) || self.actions.iter().any(|&a| a >= mdp.n_actions()) {
            return Err(Error::Shape("trajectory indexes outside the MDP".into()));
        }
        let last = self.states[t];
        if !mdp.is_terminal(last) && t != mdp.t_max() {
            return Err(Error::Shape(format!(
                "trajectory ends in non-terminal state {last} after {t} steps"
            )));
        }
        Ok(())
    }
}

/// Rolls out one episode, drawing every random choice from `rng`.
pub fn sample_trajectory<R: RngCore + ?Sized>(mdp: &MdpSpec, policy: &Policy, rng: &mut R) -> Result<Trajectory> {
    policy.check_shape(mdp)?;
    let mut s = rng::categorical(rng, mdp.initial_distribution());
    let mut traj = Trajectory {
        states: alloc::vec![s],
        actions: Vec::new(),
        rewards: Vec::new(),
        truncated: false,
    };
    while !mdp.is_terminal(s) {
        if traj.len() == mdp.t_max() {
            traj.truncated = true;
            break;
        }
        let a = rng::categorical(rng, policy.row(s));
        let r = mdp.reward(s, a);
        s = rng::categorical(rng, mdp.transition_row(s, a));
        traj.actions.push(a);
        traj.rewards.push(r);
        traj.states.push(s);
    }
    Ok(traj)
}

/// A set of i.i.d. trajectories with the seed that produced them.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectoryBatch {
    pub trajectories: Vec<Trajectory>,
    pub seed: u64,
    pub source_policy: String,
}

impl TrajectoryBatch {
    pub fn new(trajectories: Vec<Trajectory>, seed: u64, source_policy: impl Into<String>) -> Self {
        Self {
            trajectories,
            seed,
            source_policy: source_policy.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Trajectory> {
        self.trajectories.iter()
    }

    /// Full discounted returns `g(τ)`.
    pub fn returns(&self, gamma: f64) -> Vec<f64> {
        self.iter().map(|t| t.discounted_return(gamma)).collect()
    }

    /// Number of trajectories that hit the horizon cap.
    pub fn truncated_count(&self) -> usize {
        self.iter().filter(|t| t.truncated).count()
    }

    /// Per-state count of decision visits (`s_t` for `t <= T`).
    pub fn visit_counts(&self, n_states: usize) -> Vec<usize> {
        let mut counts = alloc::vec![0; n_states];
        for traj in self.iter() {
            for (s, _) in traj.steps() {
                counts[s] += 1;
            }
        }
        counts
    }
}

/// Samples `n` trajectories; trajectory `i` uses stream `(seed, i)`.
pub fn sample_batch(mdp: &MdpSpec, policy: &Policy, n: usize, seed: u64, label: &str) -> Result<TrajectoryBatch> {
    if n == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    let trajectories = (0..n)
        .map(|i| sample_trajectory(mdp, policy, &mut rng::stream(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryBatch::new(trajectories, seed, label))
}

/// Discount factor raised to a step offset.
pub(crate) fn discount(gamma: f64, steps: usize) -> f64 {
    gamma.powi(steps as i32)
}
