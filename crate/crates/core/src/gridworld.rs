//! ε-greedy Gridworlds.
//!
//! Movement is deterministic: an action moves one cell north, east, south or
//! west, and bumping into a wall or the boundary leaves the agent in place
//! while the step still counts. Entering a terminal cell pays its reward and
//! ends the trajectory. All randomness comes from the policies.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(any(feature = "serde", test))]
use crate::mdp::DEFAULT_T_MAX;
use crate::mdp::{MdpSpec, Policy};
use crate::{Error, Result};

pub const NORTH: usize = 0;
pub const EAST: usize = 1;
pub const SOUTH: usize = 2;
pub const WEST: usize = 3;
pub const N_ACTIONS: usize = 4;

/// Grid coordinate `(row, col)`; row 0 is the top row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Cell(pub usize, pub usize);

impl Cell {
    pub fn row(self) -> usize {
        self.0
    }

    pub fn col(self) -> usize {
        self.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Arrow {
    pub cell: Cell,
    pub action: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Terminal {
    pub cell: Cell,
    pub reward: f64,
}

#[cfg(feature = "serde")]
fn default_gamma() -> f64 {
    1.0
}

#[cfg(feature = "serde")]
fn default_t_max() -> usize {
    DEFAULT_T_MAX
}

/// Layout and policy parameters of a Gridworld.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct GridworldConfig {
    #[cfg_attr(feature = "serde", serde(default))]
    pub name: String,
    pub width: usize,
    pub height: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub walls: Vec<Cell>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub corridor: Vec<Cell>,
    pub arrows: Vec<Arrow>,
    pub terminals: Vec<Terminal>,
    pub start: Cell,
    pub eps_eval: f64,
    pub eps_behavior: f64,
    /// Behavior ε inside corridor cells; `eps_behavior` when absent.
    #[cfg_attr(feature = "serde", serde(default))]
    pub eps_behavior_corridor: Option<f64>,
    #[cfg_attr(feature = "serde", serde(default = "default_gamma"))]
    pub gamma: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_t_max"))]
    pub t_max: usize,
    /// Decision cell reported alongside the corridor in summaries.
    #[cfg_attr(feature = "serde", serde(default))]
    pub branch: Option<Cell>,
}

/// A built Gridworld with its policy pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Gridworld {
    pub config: GridworldConfig,
    pub mdp: MdpSpec,
    pub eval: Policy,
    pub behavior: Policy,
    /// Cell of every state index.
    pub cells: Vec<Cell>,
    index: Vec<Option<usize>>,
}

impl Gridworld {
    /// State index of a non-wall cell.
    pub fn state_of(&self, cell: Cell) -> Option<usize> {
        if cell.0 >= self.config.height || cell.1 >= self.config.width {
            return None;
        }
        self.index[cell.0 * self.config.width + cell.1]
    }

    pub fn corridor_states(&self) -> Vec<usize> {
        self.config.corridor.iter().filter_map(|&c| self.state_of(c)).collect()
    }

    pub fn branch_state(&self) -> Option<usize> {
        self.config.branch.and_then(|c| self.state_of(c))
    }

    pub fn start_state(&self) -> usize {
        self.state_of(self.config.start).expect("start validated at build time")
    }
}

fn invalid(msg: String) -> Error {
    Error::InvalidArgument(msg)
}

/// Builds the MDP and the evaluation and behavior policies.
pub fn build_gridworld(config: &GridworldConfig) -> Result<Gridworld> {
    let (w, h) = (config.width, config.height);
    if w == 0 || h == 0 {
        return Err(invalid("grid needs positive width and height".into()));
    }
    let in_grid = |c: Cell| c.0 < h && c.1 < w;
    let flat = |c: Cell| c.0 * w + c.1;
    let mut wall = vec![false; w * h];
    for &c in &config.walls {
        if !in_grid(c) {
            return Err(invalid(format!("wall {c:?} outside the grid")));
        }
        wall[flat(c)] = true;
    }
    let mut terminal_reward: Vec<Option<f64>> = vec![None; w * h];
    for t in &config.terminals {
        if !in_grid(t.cell) || wall[flat(t.cell)] {
            return Err(invalid(format!("terminal {:?} is outside the grid or a wall", t.cell)));
        }
        if !t.reward.is_finite() {
            return Err(invalid(format!("terminal {:?} has reward {}", t.cell, t.reward)));
        }
        terminal_reward[flat(t.cell)] = Some(t.reward);
    }
    let mut arrow: Vec<Option<usize>> = vec![None; w * h];
    for a in &config.arrows {
        if !in_grid(a.cell) || wall[flat(a.cell)] || terminal_reward[flat(a.cell)].is_some() {
            return Err(invalid(format!("arrow at {:?} is not on an open cell", a.cell)));
        }
        if a.action >= N_ACTIONS {
            return Err(invalid(format!("arrow at {:?} has action {}", a.cell, a.action)));
        }
        arrow[flat(a.cell)] = Some(a.action);
    }
    let mut corridor = vec![false; w * h];
    for &c in &config.corridor {
        if !in_grid(c) || wall[flat(c)] || terminal_reward[flat(c)].is_some() {
            return Err(invalid(format!("corridor cell {c:?} is not an open non-terminal cell")));
        }
        corridor[flat(c)] = true;
    }
    if !in_grid(config.start) || wall[flat(config.start)] || terminal_reward[flat(config.start)].is_some() {
        return Err(invalid(format!(
            "start {:?} is not an open non-terminal cell",
            config.start
        )));
    }
    if let Some(b) = config.branch {
        if !in_grid(b) || wall[flat(b)] {
            return Err(invalid(format!("branch {b:?} is not an open cell")));
        }
    }
    for eps in [
        Some(config.eps_eval),
        Some(config.eps_behavior),
        config.eps_behavior_corridor,
    ]
    .into_iter()
    .flatten()
    {
        if !(0.0..=1.0).contains(&eps) {
            return Err(invalid(format!("epsilon {eps} outside [0, 1]")));
        }
    }

    let mut index = vec![None; w * h];
    let mut cells = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if !wall[r * w + c] {
                index[r * w + c] = Some(cells.len());
                cells.push(Cell(r, c));
            }
        }
    }
    for &cell in &cells {
        if terminal_reward[flat(cell)].is_none() && arrow[flat(cell)].is_none() {
            return Err(invalid(format!("open cell {cell:?} has no arrow")));
        }
    }

    let n = cells.len();
    let mut transition = vec![0.0; n * N_ACTIONS * n];
    let mut reward = vec![0.0; n * N_ACTIONS];
    let mut terminals = Vec::new();
    for (s, &cell) in cells.iter().enumerate() {
        let is_terminal = terminal_reward[flat(cell)].is_some();
        if is_terminal {
            terminals.push(s);
        }
        for a in 0..N_ACTIONS {
            let next = if is_terminal { cell } else { step(cell, a, w, h, &wall) };
            let s_next = index[flat(next)].expect("moves only reach open cells");
            transition[(s * N_ACTIONS + a) * n + s_next] = 1.0;
            if !is_terminal && next != cell {
                reward[s * N_ACTIONS + a] = terminal_reward[flat(next)].unwrap_or(0.0);
            }
        }
    }
    let mut initial = vec![0.0; n];
    initial[index[flat(config.start)].expect("start is open")] = 1.0;
    let mdp = MdpSpec::new(
        n,
        N_ACTIONS,
        transition,
        reward,
        initial,
        &terminals,
        config.gamma,
        config.t_max,
    )?;

    let greedy: Vec<Option<usize>> = cells.iter().map(|&c| arrow[flat(c)]).collect();
    let eps_eval = vec![config.eps_eval; n];
    let eps_behavior: Vec<f64> = cells
        .iter()
        .map(|&c| match config.eps_behavior_corridor {
            Some(eps) if corridor[flat(c)] => eps,
            _ => config.eps_behavior,
        })
        .collect();
    let eval = Policy::epsilon_greedy(N_ACTIONS, &greedy, &eps_eval)?;
    let behavior = Policy::epsilon_greedy(N_ACTIONS, &greedy, &eps_behavior)?;
    Ok(Gridworld {
        config: config.clone(),
        mdp,
        eval,
        behavior,
        cells,
        index,
    })
}

fn step(cell: Cell, action: usize, w: usize, h: usize, wall: &[bool]) -> Cell {
    let Cell(r, c) = cell;
    let next = match action {
        NORTH if r > 0 => Cell(r - 1, c),
        EAST if c + 1 < w => Cell(r, c + 1),
        SOUTH if r + 1 < h => Cell(r + 1, c),
        WEST if c > 0 => Cell(r, c - 1),
        _ => cell,
    };
    if wall[next.0 * w + next.1] {
        cell
    } else {
        next
    }
}
