//! Iterative training with rejection sampling, and the two baselines it is
//! compared against.
//!
//! Every iteration retrains the tree on the dataset, routes the current state
//! to a leaf and eliminates actions on that leaf's statistics. Only actions
//! of an unresolved leaf are simulated; a resolved leaf costs a single call
//! for the action actually executed. The dataset, the log and a
//! [`Checkpoint`] are enough to resume a run exactly where it stopped.

mod eval;

use std::ops::ControlFlow;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bandits::{empirical_best, naive_sample_size, select_all, PacConfig};
use crate::env::{transition_state, CallCounter, Environment, SimError, Simulator, TransitionError};
use crate::features::{binarize, FeatureError};
use crate::seeding::SeedStream;
use crate::tree::{
    leaf_information_all, remaining_leaves, train_osdt, DatasetError, DecisionTree, Record, SparseRewardDataset,
    TrainConfig, TrainError, TreeError,
};


pub use eval::{calls_to_sustained_accuracy, EvalError, EvalReport, TestSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Itrs,
    /// Simulates every action of every visited state.
    Naive,
    /// Simulates a random `max(1, floor(n·(1 − reject_fraction)))` actions per state.
    RandomRejector { reject_fraction: f64 },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Itrs => "itrs",
            Method::Naive => "naive",
            Method::RandomRejector { .. } => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub pac: PacConfig,
    pub tree: TrainConfig,
    /// Maximum number of loop iterations.
    pub max_iterations: u64,
    /// Cap on simulate calls, bootstrap included.
    pub budget: Option<u64>,
    pub seed: u64,
    /// Categories per raw feature dimension; a power of two.
    pub categories: usize,
    pub bootstrap_states: usize,
    pub retrain_every: u64,
    pub eval_every: u64,
    pub eval_states: usize,
}

impl RunConfig {
    pub fn new(pac: PacConfig) -> Self {
        Self {
            pac,
            tree: TrainConfig::default(),
            max_iterations: 1000,
            budget: None,
            seed: 0,
            categories: 2,
            bootstrap_states: 4,
            retrain_every: 1,
            eval_every: 10,
            eval_states: 500,
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: &str| Err(RunError::Config(m.to_string()));
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if self.bootstrap_states == 0 {
            return bad("bootstrap_states must be at least 1");
        }
        if self.retrain_every == 0 || self.eval_every == 0 {
            return bad("retrain_every and eval_every must be at least 1");
        }
        if self.eval_states == 0 {
            return bad("eval_states must be at least 1");
        }
        if let Some(b) = self.budget {
            if b < (self.bootstrap_states * self.pac.n()) as u64 {
                return bad("budget must cover one simulation of every action in each bootstrap state");
            }
        }
        Ok(())
    }

    /// Radius iteration counter at the first loop iteration: `|D|/n` after bootstrap.
    pub fn initial_t(&self) -> u64 {
        self.bootstrap_states.max(1) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Every leaf of the current tree is resolved.
    Converged,
    MaxIterations,
    BudgetExhausted,
    /// The observer asked the run to pause.
    Interrupted,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::MaxIterations => "max_iterations",
            StopReason::BudgetExhausted => "budget_exhausted",
            StopReason::Interrupted => "interrupted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: u64,
    pub t: u64,
    /// Cumulative simulate calls after this iteration, bootstrap included.
    pub sim_calls: u64,
    /// Actions simulated on the current state before the transition.
    pub simulated: usize,
    /// Actions of the current state that were never simulated.
    pub rejected: usize,
    pub remaining_leaves: usize,
    pub tree_leaves: usize,
    pub dataset_size: usize,
    pub eval: Option<EvalReport>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub bootstrap_calls: u64,
    pub iterations: Vec<IterationLog>,
}

pub const LOG_HEADER: &str =
    "iteration,t,sim_calls,simulated,rejected,remaining_leaves,tree_leaves,dataset_size,accuracy,reward_capture";

impl RunLog {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{LOG_HEADER}\n");
        for it in &self.iterations {
            let (acc, cap) = match it.eval {
                Some(e) => (e.accuracy.to_string(), e.reward_capture.to_string()),
                None => (String::new(), String::new()),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                it.iteration,
                it.t,
                it.sim_calls,
                it.simulated,
                it.rejected,
                it.remaining_leaves,
                it.tree_leaves,
                it.dataset_size,
                acc,
                cap
            ));
        }
        out
    }

    /// `(sim_calls, accuracy)` of every evaluated iteration.
    pub fn snapshots(&self) -> Vec<(u64, f64)> {
        self.iterations
            .iter()
            .filter_map(|it| it.eval.map(|e| (it.sim_calls, e.accuracy)))
            .collect()
    }

    pub fn sim_calls(&self) -> u64 {
        self.iterations.last().map_or(self.bootstrap_calls, |it| it.sim_calls)
    }
}

/// Everything besides the dataset and log needed to continue a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<S> {
    /// Index of the next loop iteration, starting from 0.
    pub next_iteration: u64,
    pub state: S,
    pub next_state_id: u64,
    pub calls: CallCounter,
    /// Tree of the last iteration in text form.
    pub tree: Option<String>,
    pub stop: Option<StopReason>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("simulation budget exhausted during bootstrap after {calls} calls")]
    BootstrapBudget { calls: u64 },
    #[error("resumed dataset has {got} records, log expects {expected}")]
    ResumeMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Transition(TransitionError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("saved tree is unreadable: {0}")]
    SavedTree(String),
}

/// What an observer sees after each iteration.
pub struct Progress<'a, S> {
    pub dataset: &'a SparseRewardDataset,
    pub log: &'a RunLog,
    pub checkpoint: &'a Checkpoint<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput<S> {
    /// Tree of the last iteration, with leaf resolution marked.
    pub tree: DecisionTree,
    pub dataset: SparseRewardDataset,
    pub log: RunLog,
    pub stop: StopReason,
    pub final_eval: EvalReport,
    pub checkpoint: Checkpoint<S>,
}

impl<S> RunOutput<S> {
    /// Simulate calls needed before accuracy stayed at `threshold` for
    /// `window` snapshots. A converged run's final tree is treated as fixed.
    pub fn calls_to_sustained(&self, threshold: f64, window: usize) -> Option<u64> {
        let mut snaps = self.log.snapshots();
        let frozen = self.stop == StopReason::Converged;
        if frozen {
            snaps.push((self.log.sim_calls(), self.final_eval.accuracy));
        }
        calls_to_sustained_accuracy(&snaps, threshold, window, frozen)
    }
}

/// Simulates every action once on `n_states` fresh initial states.
///
/// State `i` comes from the `("bootstrap-state", [i])` substream and its
/// action `a` is simulated with `("bootstrap-sim", [i, a])`. State ids are
/// `0..n_states`.
pub fn bootstrap_dataset<E: Environment>(
    sim: &mut Simulator<'_, E>,
    seeds: &SeedStream,
    n_states: usize,
    categories: usize,
) -> Result<SparseRewardDataset, RunError> {
    let env = sim.env();
    let n = env.n_actions();
    let mut ds: Option<SparseRewardDataset> = None;
    for i in 0..n_states as u64 {
        let state = env.initial_state(&mut seeds.rng("bootstrap-state", &[i]));
        let x = binarize(&env.observe(&state), categories)?;
        let ds = ds.get_or_insert_with(|| SparseRewardDataset::new(n, x.len()));
        for a in 0..n {
            let out = match sim.simulate(&state, a, &mut seeds.rng("bootstrap-sim", &[i, a as u64])) {
                Ok(o) => o,
                Err(SimError::BudgetExhausted { .. }) => return Err(RunError::BootstrapBudget { calls: sim.calls() }),
                Err(e) => return Err(e.into()),
            };
            ds.push(Record {
                state_id: i,
                features: x.clone(),
                action: a,
                reward: out.reward,
            })?;
        }
    }
    ds.ok_or_else(|| RunError::Config("bootstrap needs at least one state".into()))
}

struct Runner<'e, E: Environment> {
    env: &'e E,
    cfg: RunConfig,
    method: Method,
    seeds: SeedStream,
    dataset: SparseRewardDataset,
    log: RunLog,
    test: TestSet,
    checkpoint: Checkpoint<E::State>,
    tree: Option<DecisionTree>,
}

impl<'e, E: Environment> Runner<'e, E> {
    fn start(env: &'e E, cfg: &RunConfig, method: Method) -> Result<Self, RunError> {
        cfg.validate()?;
        let seeds = SeedStream::new(cfg.seed);
        let mut sim = Simulator::new(env, cfg.budget);
        let dataset = bootstrap_dataset(&mut sim, &seeds, cfg.bootstrap_states, cfg.categories)?;
        let state = env.initial_state(&mut seeds.rng("start", &[]));
        let checkpoint = Checkpoint {
            next_iteration: 0,
            state,
            next_state_id: cfg.bootstrap_states as u64,
            calls: sim.counter(),
            tree: None,
            stop: None,
        };
        let log = RunLog {
            bootstrap_calls: sim.calls(),
            iterations: Vec::new(),
        };
        Self::assemble(env, cfg, method, dataset, log, checkpoint)
    }

    fn assemble(
        env: &'e E,
        cfg: &RunConfig,
        method: Method,
        dataset: SparseRewardDataset,
        log: RunLog,
        checkpoint: Checkpoint<E::State>,
    ) -> Result<Self, RunError> {
        cfg.validate()?;
        let seeds = SeedStream::new(cfg.seed);
        let test = TestSet::sample(env, &seeds, cfg.eval_states, cfg.categories)?;
        let tree = match &checkpoint.tree {
            Some(text) => Some(text.parse().map_err(|e: crate::tree::ParseTreeError| RunError::SavedTree(e.to_string()))?),
            None => None,
        };
        Ok(Self {
            env,
            cfg: cfg.clone(),
            method,
            seeds,
            dataset,
            log,
            test,
            checkpoint,
            tree,
        })
    }

    /// Actions to simulate on the current state before the transition.
    fn actions_to_simulate(&self, k: u64, survivors: &[usize], stats: &[crate::bandits::ArmStats]) -> Vec<usize> {
        let n = self.env.n_actions();
        match self.method {
            Method::Naive => (0..n).collect(),
            Method::RandomRejector { reject_fraction } => {
                let keep = ((n as f64 * (1.0 - reject_fraction)).floor() as usize).clamp(1, n);
                let mut picked = index::sample(&mut self.seeds.rng("reject", &[k]), n, keep).into_vec();
                picked.sort_unstable();
                picked
            }
            Method::Itrs => {
                let need = naive_sample_size(&self.cfg.pac);
                let min_tau = survivors.iter().map(|&a| stats[a].count).min().unwrap_or(0);
                if survivors.len() > 1 && min_tau < need {
                    survivors.to_vec()
                } else {
                    Vec::new()
                }
            }
        }
    }

    fn step(&mut self) -> Result<Option<StopReason>, RunError> {
        let k = self.checkpoint.next_iteration;
        let t = self.cfg.initial_t() + k;
        if self.tree.is_none() || k.is_multiple_of(self.cfg.retrain_every) {
            self.tree = Some(train_osdt(&self.dataset, &self.cfg.tree)?);
        }
        let tree = self.tree.as_ref().expect("trained above");
        let env = self.env;
        let state = self.checkpoint.state.clone();
        let x = binarize(&env.observe(&state), self.cfg.categories)?;
        let leaf = tree.leaf_index(&x)?;
        let mut stats = leaf_information_all(tree, &self.dataset)?.swap_remove(leaf);
        let survivors = select_all(&stats, t, &self.cfg.pac);
        let to_simulate = self.actions_to_simulate(k, &survivors, &stats);

        let id = self.checkpoint.next_state_id;
        let mut sim = Simulator::resume(env, self.cfg.budget, self.checkpoint.calls);
        let mut successors = Vec::with_capacity(to_simulate.len());
        let mut stop = None;
        for &a in &to_simulate {
            match sim.simulate(&state, a, &mut self.seeds.rng("sim", &[k, a as u64])) {
                Ok(out) => {
                    self.dataset.push(Record {
                        state_id: id,
                        features: x.clone(),
                        action: a,
                        reward: out.reward,
                    })?;
                    stats[a].record(out.reward);
                    successors.push((a, out));
                }
                Err(SimError::BudgetExhausted { .. }) => {
                    stop = Some(StopReason::BudgetExhausted);
                    break;
                }
                Err(e) => return Err(e.into()),
            }
        }
        let simulated = successors.len();

        if stop.is_none() {
            let pool = if self.method == Method::Itrs { survivors.clone() } else { to_simulate.clone() };
            let resolved = empirical_best(&stats, &survivors).or(survivors.first().copied());
            let sim_action = if successors.is_empty() { resolved.unwrap_or(0) } else { 0 };
            let result = transition_state(
                &mut sim,
                &successors,
                &pool,
                &stats,
                resolved,
                &state,
                &mut self.seeds.rng("sim", &[k, sim_action as u64]),
                &mut self.seeds.rng("restart", &[k]),
            );
            match result {
                Ok(tr) => {
                    // Transition outcomes enter the dataset as in the loop's
                    // literal form; the baselines already hold every simulated reward.
                    if !tr.reused || self.method == Method::Itrs {
                        self.dataset.push(Record {
                            state_id: id,
                            features: x.clone(),
                            action: tr.action,
                            reward: tr.reward,
                        })?;
                    }
                    self.checkpoint.state = tr.next_state;
                }
                Err(TransitionError::Sim(SimError::BudgetExhausted { .. })) => stop = Some(StopReason::BudgetExhausted),
                Err(e) => return Err(RunError::Transition(e)),
            }
        }
        self.checkpoint.calls = sim.counter();
        self.checkpoint.next_state_id += 1;
        self.checkpoint.next_iteration = k + 1;

        let remaining = remaining_leaves(tree, &self.dataset, &self.cfg.pac, t + 1)?;
        let eval = if (k + 1).is_multiple_of(self.cfg.eval_every) {
            Some(self.test.evaluate(tree)?)
        } else {
            None
        };
        self.log.iterations.push(IterationLog {
            iteration: k + 1,
            t,
            sim_calls: self.checkpoint.calls.total(),
            simulated,
            rejected: env.n_actions() - simulated,
            remaining_leaves: remaining,
            tree_leaves: tree.n_leaves(),
            dataset_size: self.dataset.len(),
            eval,
        });
        self.checkpoint.tree = Some(tree.to_string());

        if stop.is_some() {
            return Ok(stop);
        }
        if self.method == Method::Itrs && remaining == 0 {
            return Ok(Some(StopReason::Converged));
        }
        if k + 1 >= self.cfg.max_iterations {
            return Ok(Some(StopReason::MaxIterations));
        }
        if self.cfg.budget.is_some_and(|b| self.checkpoint.calls.total() >= b) {
            return Ok(Some(StopReason::BudgetExhausted));
        }
        Ok(None)
    }

    fn run(
        mut self,
        observer: &mut dyn FnMut(&Progress<'_, E::State>) -> ControlFlow<()>,
    ) -> Result<RunOutput<E::State>, RunError> {
        let stop = loop {
            if let Some(stop) = self.checkpoint.stop {
                break stop;
            }
            let stop = self.step()?;
            self.checkpoint.stop = stop;
            let progress = Progress {
                dataset: &self.dataset,
                log: &self.log,
                checkpoint: &self.checkpoint,
            };
            if observer(&progress).is_break() && stop.is_none() {
                break StopReason::Interrupted;
            }
        };
        let mut tree = match self.tree.take() {
            Some(t) => t,
            None => train_osdt(&self.dataset, &self.cfg.tree)?,
        };
        let last_t = self.cfg.initial_t() + self.checkpoint.next_iteration.saturating_sub(1);
        tree.mark_resolution(&self.cfg.pac, last_t);
        let final_eval = self.test.evaluate(&tree)?;
        Ok(RunOutput {
            tree,
            dataset: self.dataset,
            log: self.log,
            stop,
            final_eval,
            checkpoint: self.checkpoint,
        })
    }
}

/// Runs `method` from a fresh bootstrap until it stops.
pub fn run_method<E: Environment>(
    env: &E,
    cfg: &RunConfig,
    method: Method,
    observer: &mut dyn FnMut(&Progress<'_, E::State>) -> ControlFlow<()>,
) -> Result<RunOutput<E::State>, RunError> {
    Runner::start(env, cfg, method)?.run(observer)
}

/// Continues a run from its saved dataset, log and checkpoint.
pub fn resume_method<E: Environment>(
    env: &E,
    cfg: &RunConfig,
    method: Method,
    dataset: SparseRewardDataset,
    log: RunLog,
    checkpoint: Checkpoint<E::State>,
    observer: &mut dyn FnMut(&Progress<'_, E::State>) -> ControlFlow<()>,
) -> Result<RunOutput<E::State>, RunError> {
    let expected = log.iterations.last().map(|it| it.dataset_size).unwrap_or(dataset.len());
    if expected != dataset.len() {
        return Err(RunError::ResumeMismatch {
            expected,
            got: dataset.len(),
        });
    }
    Runner::assemble(env, cfg, method, dataset, log, checkpoint)?.run(observer)
}

fn no_observer<S>(_: &Progress<'_, S>) -> ControlFlow<()> {
    ControlFlow::Continue(())
}

pub fn itrs_run<E: Environment>(env: &E, cfg: &RunConfig) -> Result<RunOutput<E::State>, RunError> {
    run_method(env, cfg, Method::Itrs, &mut no_observer)
}

pub fn naive_baseline_run<E: Environment>(env: &E, cfg: &RunConfig) -> Result<RunOutput<E::State>, RunError> {
    run_method(env, cfg, Method::Naive, &mut no_observer)
}

pub fn random_rejector_run<E: Environment>(
    env: &E,
    cfg: &RunConfig,
    reject_fraction: f64,
) -> Result<RunOutput<E::State>, RunError> {
    run_method(env, cfg, Method::RandomRejector { reject_fraction }, &mut no_observer)
}
