//! Tabular off-policy evaluation with likelihood-ratio omission.
//!
//! The crate evaluates an evaluation policy from trajectories logged under a
//! behavior policy. Besides the classic Monte Carlo, importance sampling (IS),
//! weighted IS and per-decision IS estimators it implements OSIRIS, which sets
//! the likelihood ratios of *irrelevant* states to one. A state is irrelevant
//! when the expected return-to-go under the evaluation policy does not depend
//! on the action taken there.
//!
//! Pieces:
//!
//! * [`mdp`] and [`trajectory`]: finite MDPs, policies and seeded simulation.
//! * [`dp`]: exact finite-horizon policy evaluation, composite policies and
//!   the true relevance oracle.
//! * [`estimators`]: the estimator family with per-trajectory diagnostics.
//! * [`relevance`] and [`stats`]: relevance estimation from data with Welch
//!   and Smirnov two-sample tests.
//! * [`diagnostics`]: Monte Carlo checks of the variance and bias identities.
//! * [`gridworld`]: the ε-greedy Gridworld builder.
//! * [`testbeds`]: small synthetic MDPs with known relevance structure.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod diagnostics;
pub mod dp;
mod error;
pub mod estimators;
pub mod gridworld;
pub mod mdp;
mod numeric;
pub mod relevance;
pub mod rng;
pub mod stats;
pub mod testbeds;
pub mod trajectory;

pub use error::{Error, Result};
pub use mdp::{MdpSpec, Policy, Relevance, TimedRelevance};
pub use trajectory::{Trajectory, TrajectoryBatch};
