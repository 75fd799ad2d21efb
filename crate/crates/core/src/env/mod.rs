//! The expensive-oracle contract and the concrete environments behind it.
//!
//! [`Environment::simulate`] is a pure function of `(state, action, rng)`, so
//! "resetting the simulator to a configuration" is just reusing a state
//! value. [`Simulator`] wraps an environment with the call counter that every
//! run is budgeted in.

pub mod boxworld;
pub mod synthetic;

use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bandits::{clamp_reward, empirical_best, ArmStats};
use crate::features::RawFeatureVector;
use crate::seeding::SimRng;

pub use boxworld::{ActionSpec, BoxWorld, BoxWorldConfig, BoxWorldState};
pub use synthetic::{
    make_synthetic_world, GroundTruthTable, RewardNoise, SyntheticState, SyntheticWorld,
    SyntheticWorldConfig,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("action {action} out of range for {n_actions} actions")]
    InvalidAction { action: usize, n_actions: usize },
    #[error("invalid environment parameter: {0}")]
    Config(String),
}

/// Reward in `[0,1]` and successor of one simulated action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome<S> {
    pub reward: f64,
    pub next_state: S,
}

pub trait Environment {
    type State: Clone + fmt::Debug + Serialize + DeserializeOwned;

    fn n_actions(&self) -> usize;

    /// Draws a state from the initial-state distribution.
    fn initial_state(&self, rng: &mut SimRng) -> Self::State;

    fn simulate(
        &self,
        state: &Self::State,
        action: usize,
        rng: &mut SimRng,
    ) -> Result<SimOutcome<Self::State>, EnvError>;

    /// Observable continuous features of a state.
    fn observe(&self, state: &Self::State) -> RawFeatureVector;

    /// Expected reward of every action in `state`. Test oracle only.
    fn true_means(&self, state: &Self::State) -> Vec<f64>;

    fn is_terminal(&self, _state: &Self::State) -> bool {
        false
    }

    /// Fresh initial state after an episode ends in `after`.
    fn restart(&self, after: &Self::State, rng: &mut SimRng) -> Self::State;
}

/// Total simulate invocations; only [`Simulator`] can advance it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounter {
    total: u64,
}

impl CallCounter {
    pub fn starting_at(total: u64) -> Self {
        Self { total }
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("simulation budget of {budget} calls exhausted")]
    BudgetExhausted { budget: u64 },
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// An environment plus its call counter and optional call budget.
pub struct Simulator<'e, E> {
    env: &'e E,
    counter: CallCounter,
    budget: Option<u64>,
}

impl<'e, E: Environment> Simulator<'e, E> {
    pub fn new(env: &'e E, budget: Option<u64>) -> Self {
        Self::resume(env, budget, CallCounter::default())
    }

    pub fn resume(env: &'e E, budget: Option<u64>, counter: CallCounter) -> Self {
        Self {
            env,
            counter,
            budget,
        }
    }

    pub fn env(&self) -> &'e E {
        self.env
    }

    pub fn calls(&self) -> u64 {
        self.counter.total
    }

    pub fn counter(&self) -> CallCounter {
        self.counter
    }

    pub fn remaining(&self) -> Option<u64> {
        self.budget.map(|b| b.saturating_sub(self.counter.total))
    }

    pub fn simulate(
        &mut self,
        state: &E::State,
        action: usize,
        rng: &mut SimRng,
    ) -> Result<SimOutcome<E::State>, SimError> {
        let n = self.env.n_actions();
        if action >= n {
            return Err(EnvError::InvalidAction {
                action,
                n_actions: n,
            }
            .into());
        }
        if let Some(budget) = self.budget {
            if self.counter.total >= budget {
                return Err(SimError::BudgetExhausted { budget });
            }
        }
        let mut out = self.env.simulate(state, action, rng)?;
        self.counter.total += 1;
        out.reward = clamp_reward(out.reward);
        Ok(out)
    }
}

/// The action executed on the current state and where it led.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub next_state: S,
    pub action: usize,
    pub reward: f64,
    /// True when the successor came from an already-simulated outcome.
    pub reused: bool,
    /// True when the episode ended and a fresh initial state was drawn.
    pub restarted: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransitionError {
    #[error("no simulated successor and no resolved action to execute")]
    NoAction,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Picks the action to apply to `state` and produces the next state.
///
/// With simulated successors available, the empirical best of them under
/// `leaf_stats` (restricted to `survivors`) is executed by reusing its
/// outcome, at no extra call. Otherwise `resolved_action` is simulated once.
/// A terminal successor is replaced by a fresh initial state.
#[allow(clippy::too_many_arguments)]
pub fn transition_state<E: Environment>(
    sim: &mut Simulator<'_, E>,
    successors: &[(usize, SimOutcome<E::State>)],
    survivors: &[usize],
    leaf_stats: &[ArmStats],
    resolved_action: Option<usize>,
    state: &E::State,
    sim_rng: &mut SimRng,
    restart_rng: &mut SimRng,
) -> Result<Transition<E::State>, TransitionError> {
    let (action, outcome, reused) = if successors.is_empty() {
        let action = resolved_action.ok_or(TransitionError::NoAction)?;
        (action, sim.simulate(state, action, sim_rng)?, false)
    } else {
        let mut pool: Vec<usize> = successors
            .iter()
            .map(|(a, _)| *a)
            .filter(|a| survivors.contains(a))
            .collect();
        if pool.is_empty() {
            pool = successors.iter().map(|(a, _)| *a).collect();
        }
        pool.sort_unstable();
        let action = empirical_best(leaf_stats, &pool).unwrap_or(pool[0]);
        let outcome = successors
            .iter()
            .find(|(a, _)| *a == action)
            .map(|(_, o)| o.clone())
            .expect("action drawn from successors");
        (action, outcome, true)
    };
    let env = sim.env();
    let restarted = env.is_terminal(&outcome.next_state);
    let next_state = if restarted {
        env.restart(&outcome.next_state, restart_rng)
    } else {
        outcome.next_state
    };
    Ok(Transition {
        next_state,
        action,
        reward: outcome.reward,
        reused,
        restarted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::substream;

    /// Deterministic environment: reward = table[action], state = step counter.
    struct Table(Vec<f64>);

    impl Environment for Table {
        type State = u64;
        fn n_actions(&self) -> usize {
            self.0.len()
        }
        fn initial_state(&self, _rng: &mut SimRng) -> u64 {
            0
        }
        fn simulate(&self, s: &u64, a: usize, _rng: &mut SimRng) -> Result<SimOutcome<u64>, EnvError> {
            Ok(SimOutcome {
                reward: self.0[a],
                next_state: s + 1 + a as u64 * 100,
            })
        }
        fn observe(&self, _s: &u64) -> RawFeatureVector {
            RawFeatureVector::new(vec![0.0])
        }
        fn true_means(&self, _s: &u64) -> Vec<f64> {
            self.0.clone()
        }
        fn restart(&self, after: &u64, _rng: &mut SimRng) -> u64 {
            *after
        }
    }

    #[test]
    fn counter_tracks_every_call_and_enforces_budget() {
        let env = Table(vec![0.5, 2.0]);
        let mut sim = Simulator::new(&env, Some(3));
        let mut rng = substream(1, "t", &[]);
        assert_eq!(sim.simulate(&0, 1, &mut rng).unwrap().reward, 1.0);
        assert!(matches!(
            sim.simulate(&0, 5, &mut rng),
            Err(SimError::Env(EnvError::InvalidAction { .. }))
        ));
        sim.simulate(&0, 0, &mut rng).unwrap();
        sim.simulate(&0, 0, &mut rng).unwrap();
        assert_eq!(sim.calls(), 3);
        assert_eq!(
            sim.simulate(&0, 0, &mut rng),
            Err(SimError::BudgetExhausted { budget: 3 })
        );
        assert_eq!(sim.calls(), 3);
    }

    #[test]
    fn transition_reuses_best_successor() {
        let env = Table(vec![0.2, 0.7]);
        let mut sim = Simulator::new(&env, None);
        let mut rng = substream(1, "t", &[]);
        let succ = vec![
            (0, SimOutcome { reward: 0.2, next_state: 11 }),
            (1, SimOutcome { reward: 0.7, next_state: 12 }),
        ];
        let stats = [ArmStats::new(2, 0.4), ArmStats::new(2, 1.4)];
        let tr = transition_state(&mut sim, &succ, &[0, 1], &stats, None, &10, &mut rng.clone(), &mut rng)
            .unwrap();
        assert_eq!((tr.action, tr.next_state, tr.reward, tr.reused), (1, 12, 0.7, true));
        assert_eq!(sim.calls(), 0);
    }

    #[test]
    fn rejection_path_costs_one_call() {
        let env = Table(vec![0.2, 0.7]);
        let mut sim = Simulator::new(&env, None);
        let mut rng = substream(1, "t", &[]);
        let tr = transition_state(&mut sim, &[], &[0, 1], &[ArmStats::default(); 2], Some(0), &5, &mut rng.clone(), &mut rng)
            .unwrap();
        assert_eq!((tr.action, tr.next_state, tr.reused), (0, 6, false));
        assert_eq!(sim.calls(), 1);

        let err = transition_state(&mut sim, &[], &[0, 1], &[ArmStats::default(); 2], None, &5, &mut rng.clone(), &mut rng);
        assert_eq!(err, Err(TransitionError::NoAction));
    }
}
