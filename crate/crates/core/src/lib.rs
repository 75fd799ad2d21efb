//! Learning reward-maximizing decision-tree policies from an expensive
//! simulator while calling it as rarely as possible.
//!
//! PAC action elimination ([`bandits`]) decides which actions still need to be
//! simulated in each state; an optimal sparse decision tree ([`tree`]) is
//! retrained on the growing sparse reward dataset and defines which states
//! share statistics. [`itrs`] runs the loop and its baselines.

pub mod bandits;
pub mod cli;
pub mod env;
pub mod features;
pub mod itrs;
pub mod seeding;
pub mod tree;
