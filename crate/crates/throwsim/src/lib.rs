//! Desk-scale simulation of a delta robot that learns to *throw* objects into
//! bins instead of placing them.
//!
//! The crate models the full loop: trapezoidal point-to-point motion, a
//! parallel-jaw gripper with a finite opening delay, drag-free ballistic
//! flight with grasp-dependent release noise, a contextual-bandit environment
//! wrapping all of it, three one-step RL algorithms (TD3, SAC, PPO) built on a
//! small hand-rolled MLP autodiff kernel, a learned pick-and-place time
//! baseline that shapes the reward, an analytic ballistic competitor, random
//! hyperparameter search with median pruning, and paired evaluation tooling.
//!
//! Everything is deterministic given a seed: episodes are keyed by their
//! index, so results do not depend on scheduling or worker count.

pub mod agents;
pub mod baseline;
pub mod cli;
pub mod config;
pub mod env;
pub mod error;
pub mod eval;
pub mod geom;
pub mod motion;
pub mod nn;
pub mod persist;
pub mod physics;
pub mod tuning;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
