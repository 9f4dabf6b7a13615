//! Small synthetic MDPs with known relevance structure.

use alloc::vec;
use alloc::vec::Vec;

use crate::mdp::{MdpSpec, Policy, DEFAULT_T_MAX};
use crate::rng;
use crate::Result;

/// An MDP with an evaluation and a behavior policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Testbed {
    pub mdp: MdpSpec,
    pub eval: Policy,
    pub behavior: Policy,
    /// Non-terminal states whose actions are interchangeable by construction.
    pub irrelevant: Vec<usize>,
}

/// Dense tables under construction; every row starts empty.
struct Tables {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
}

impl Tables {
    fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            transition: vec![0.0; n_states * n_actions * n_states],
            reward: vec![0.0; n_states * n_actions],
        }
    }

    fn set(&mut self, s: usize, a: usize, reward: f64, next: &[(usize, f64)]) {
        let base = (s * self.n_actions + a) * self.n_states;
        self.transition[base..base + self.n_states].fill(0.0);
        for &(sp, p) in next {
            self.transition[base + sp] += p;
        }
        self.reward[s * self.n_actions + a] = reward;
    }

    fn absorbing(&mut self, s: usize) {
        for a in 0..self.n_actions {
            self.set(s, a, 0.0, &[(s, 1.0)]);
        }
    }

    fn build(self, start: usize, terminals: &[usize], gamma: f64) -> Result<MdpSpec> {
        let mut initial = vec![0.0; self.n_states];
        initial[start] = 1.0;
        MdpSpec::new(
            self.n_states,
            self.n_actions,
            self.transition,
            self.reward,
            initial,
            terminals,
            gamma,
            DEFAULT_T_MAX,
        )
    }
}

/// Three states in a line. Actions at state 0 pay 1 or 0; both actions at
/// state 1 pay 2, so state 1 is irrelevant. State 2 is terminal.
pub fn three_state_chain() -> Result<Testbed> {
    let mut t = Tables::new(3, 2);
    t.set(0, 0, 1.0, &[(1, 1.0)]);
    t.set(0, 1, 0.0, &[(1, 1.0)]);
    t.set(1, 0, 2.0, &[(2, 1.0)]);
    t.set(1, 1, 2.0, &[(2, 1.0)]);
    t.absorbing(2);
    Ok(Testbed {
        mdp: t.build(0, &[2], 1.0)?,
        eval: Policy::from_rows(&[vec![0.8, 0.2], vec![0.3, 0.7], vec![0.5, 0.5]])?,
        behavior: Policy::from_rows(&[vec![0.5, 0.5], vec![0.6, 0.4], vec![0.5, 0.5]])?,
        irrelevant: vec![1],
    })
}

/// A coin flip after a two-action state whose actions lead to the same
/// place: the return is ±1 with equal chance whatever happens, so the
/// action values at state 0 are both exactly zero.
///
/// States: 0 decision, 1 coin, 2 and 3 payout cells, 4 terminal.
pub fn null_relevance() -> Result<Testbed> {
    let mut t = Tables::new(5, 2);
    for a in 0..2 {
        t.set(0, a, 0.0, &[(1, 1.0)]);
        t.set(1, a, 0.0, &[(2, 0.5), (3, 0.5)]);
        t.set(2, a, 1.0, &[(4, 1.0)]);
        t.set(3, a, -1.0, &[(4, 1.0)]);
    }
    t.absorbing(4);
    let uniform = vec![0.5, 0.5];
    Ok(Testbed {
        mdp: t.build(0, &[4], 1.0)?,
        eval: Policy::from_rows(&[
            vec![0.7, 0.3],
            uniform.clone(),
            uniform.clone(),
            uniform.clone(),
            uniform.clone(),
        ])?,
        behavior: Policy::from_rows(&[
            vec![0.5, 0.5],
            uniform.clone(),
            uniform.clone(),
            uniform.clone(),
            uniform,
        ])?,
        irrelevant: vec![0, 1, 2, 3],
    })
}

/// Like [`null_relevance`] but action 0 at state 0 pays 1 and action 1
/// pays 0, a unit gap in action value.
pub fn unit_gap() -> Result<Testbed> {
    let mut bed = null_relevance()?;
    let mut t = Tables::new(5, 2);
    t.transition = bed.mdp.transition_table().to_vec();
    t.reward = bed.mdp.reward_table().to_vec();
    t.set(0, 0, 1.0, &[(1, 1.0)]);
    bed.mdp = t.build(0, &[4], 1.0)?;
    bed.irrelevant = vec![1, 2, 3];
    Ok(bed)
}

fn random_row(stream: &mut rand_chacha::ChaCha8Rng, len: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| floor + rng::uniform(stream)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Random MDP with `n_states - 1` non-terminal states and the last state
/// terminal. Every transition ends the trajectory with probability at least
/// `1/4`; rewards are uniform on `[-1, 2)`. Each non-terminal state is made
/// irrelevant with probability `1/2` by giving all of its actions the same
/// transition row and reward. Both policies give every action probability at
/// least `0.05`.
pub fn random_with_irrelevant(seed: u64, n_states: usize, n_actions: usize, gamma: f64) -> Result<Testbed> {
    let mut stream = rng::stream(seed, 0);
    let terminal = n_states - 1;
    let mut t = Tables::new(n_states, n_actions);
    let mut irrelevant = Vec::new();
    for s in 0..terminal {
        let shared = rng::uniform(&mut stream) < 0.5;
        if shared {
            irrelevant.push(s);
        }
        let mut row = Vec::new();
        let mut reward = 0.0;
        for a in 0..n_actions {
            if a == 0 || !shared {
                let mut next: Vec<(usize, f64)> = random_row(&mut stream, terminal, 0.1)
                    .into_iter()
                    .enumerate()
                    .map(|(sp, p)| (sp, 0.75 * p))
                    .collect();
                next.push((terminal, 0.25));
                row = next;
                reward = 3.0 * rng::uniform(&mut stream) - 1.0;
            }
            t.set(s, a, reward, &row);
        }
    }
    t.absorbing(terminal);
    let policy = |stream: &mut rand_chacha::ChaCha8Rng| -> Result<Policy> {
        let rows: Vec<Vec<f64>> = (0..n_states)
            .map(|_| {
                let row = random_row(stream, n_actions, 0.0);
                let floor = 0.05;
                let scale = 1.0 - floor * n_actions as f64;
                row.into_iter().map(|p| floor + scale * p).collect()
            })
            .collect();
        Policy::from_rows(&rows)
    };
    let eval = policy(&mut stream)?;
    let behavior = policy(&mut stream)?;
    Ok(Testbed {
        mdp: t.build(0, &[terminal], gamma)?,
        eval,
        behavior,
        irrelevant,
    })
}
