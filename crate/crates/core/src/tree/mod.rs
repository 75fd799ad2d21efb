//! Axis-aligned decision trees over binary features, trained to optimality on
//! sparse reward datasets.
//!
//! The reward-sensitive objective of a tree is
//! `1 − Σ_l w_l·r̂_{l,a_l} + λ·#leaves`, where `w_l` is the share of distinct
//! states captured by leaf `l` and `r̂_{l,a_l}` the empirical mean of the
//! leaf's chosen action. Since the weights sum to one this equals
//! `Σ_l [w_l·(1 − r̂_{l,a_l}) + λ]`, the per-leaf form the search uses.

mod dataset;
mod search;
mod text;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bandits::{empirical_best, naive_sample_size, select_all, ArmStats, PacConfig};
use crate::features::BinaryVector;

pub use dataset::{DatasetError, Record, SparseRewardDataset};
pub use search::{exhaustive_optimal_tree, train_osdt, TrainConfig, TrainError};
pub use text::ParseTreeError;

pub(crate) use dataset::{group_records, Group};

/// Per-action statistics of the records captured by one leaf.
pub type LeafStats = Vec<ArmStats>;

/// Which per-leaf loss the tree is trained against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafLoss {
    /// `w_l·(1 − r̂)` for the leaf's empirically best action.
    #[default]
    Reward,
    /// Share of states whose best observed action differs from the leaf's
    /// majority label. Ignores reward magnitudes.
    Misclassification,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub action: usize,
    pub stats: LeafStats,
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        zero: Box<Node>,
        one: Box<Node>,
    },
    Leaf(Leaf),
}

impl Node {
    fn leaf_count(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::Split { zero, one, .. } => zero.leaf_count() + one.leaf_count(),
        }
    }

    fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Split { zero, one, .. } => 1 + zero.depth().max(one.depth()),
        }
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Leaf>) {
        match self {
            Node::Leaf(l) => out.push(l),
            Node::Split { zero, one, .. } => {
                zero.collect_leaves(out);
                one.collect_leaves(out);
            }
        }
    }

    fn collect_leaves_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Leaf>) {
        match self {
            Node::Leaf(l) => out.push(l),
            Node::Split { zero, one, .. } => {
                zero.collect_leaves_mut(out);
                one.collect_leaves_mut(out);
            }
        }
    }

    fn splits_preorder(&self, out: &mut Vec<usize>) {
        if let Node::Split { feature, zero, one } = self {
            out.push(*feature);
            zero.splits_preorder(out);
            one.splits_preorder(out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("feature vector has {got} bits, tree expects {expected}")]
    FeatureDim { expected: usize, got: usize },
    #[error("dataset has {got} actions and {got_dim} features, tree has {expected} and {expected_dim}")]
    Shape {
        expected: usize,
        got: usize,
        expected_dim: usize,
        got_dim: usize,
    },
    #[error("leaf penalty must be non-negative, got {0}")]
    Lambda(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    feature_dim: usize,
    n_actions: usize,
    root: Node,
}

impl DecisionTree {
    pub fn new(feature_dim: usize, n_actions: usize, root: Node) -> Self {
        Self {
            feature_dim,
            n_actions,
            root,
        }
    }

    /// A single leaf choosing `action`, with no statistics.
    pub fn constant(feature_dim: usize, n_actions: usize, action: usize) -> Self {
        Self::new(
            feature_dim,
            n_actions,
            Node::Leaf(Leaf {
                action,
                stats: vec![ArmStats::default(); n_actions],
                resolved: false,
            }),
        )
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn n_leaves(&self) -> usize {
        self.root.leaf_count()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Leaves in preorder, zero branch first. Leaf indices refer to this order.
    pub fn leaves(&self) -> Vec<&Leaf> {
        let mut out = Vec::new();
        self.root.collect_leaves(&mut out);
        out
    }

    /// Split features in preorder.
    pub fn splits(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.root.splits_preorder(&mut out);
        out
    }

    fn check_dim(&self, x: &BinaryVector) -> Result<(), TreeError> {
        if x.len() != self.feature_dim {
            return Err(TreeError::FeatureDim {
                expected: self.feature_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn route(&self, x: &BinaryVector) -> (usize, &Leaf) {
        let mut node = &self.root;
        let mut skipped = 0;
        loop {
            match node {
                Node::Leaf(l) => return (skipped, l),
                Node::Split { feature, zero, one } => {
                    if x.get(*feature) {
                        skipped += zero.leaf_count();
                        node = one;
                    } else {
                        node = zero;
                    }
                }
            }
        }
    }

    pub fn leaf_index(&self, x: &BinaryVector) -> Result<usize, TreeError> {
        self.check_dim(x)?;
        Ok(self.route(x).0)
    }

    pub fn leaf_for(&self, x: &BinaryVector) -> Result<&Leaf, TreeError> {
        self.check_dim(x)?;
        Ok(self.route(x).1)
    }

    pub fn predict(&self, x: &BinaryVector) -> Result<usize, TreeError> {
        Ok(self.leaf_for(x)?.action)
    }

    /// Recomputes every leaf's stats and chosen action from `dataset`; leaves
    /// with no records keep their previous action.
    pub fn refresh_stats(&mut self, dataset: &SparseRewardDataset) -> Result<(), TreeError> {
        let stats = leaf_information_all(self, dataset)?;
        let mut leaves = Vec::new();
        self.root.collect_leaves_mut(&mut leaves);
        for (leaf, s) in leaves.into_iter().zip(stats) {
            let all: Vec<usize> = (0..s.len()).collect();
            if let Some(a) = empirical_best(&s, &all) {
                leaf.action = a;
            }
            leaf.stats = s;
        }
        Ok(())
    }

    /// Sets each leaf's resolved flag from its current stats.
    pub fn mark_resolution(&mut self, cfg: &PacConfig, t: u64) {
        let mut leaves = Vec::new();
        self.root.collect_leaves_mut(&mut leaves);
        for leaf in leaves {
            leaf.resolved = leaf_is_resolved(&leaf.stats, cfg, t);
        }
    }
}

fn check_shape(tree: &DecisionTree, dataset: &SparseRewardDataset) -> Result<(), TreeError> {
    if dataset.n_actions() != tree.n_actions || dataset.feature_dim() != tree.feature_dim {
        return Err(TreeError::Shape {
            expected: tree.n_actions,
            got: dataset.n_actions(),
            expected_dim: tree.feature_dim,
            got_dim: dataset.feature_dim(),
        });
    }
    Ok(())
}

/// Stats of the records routed to each leaf, in leaf order.
pub fn leaf_information_all(
    tree: &DecisionTree,
    dataset: &SparseRewardDataset,
) -> Result<Vec<LeafStats>, TreeError> {
    check_shape(tree, dataset)?;
    let mut out = vec![vec![ArmStats::default(); tree.n_actions]; tree.n_leaves()];
    for g in group_records(dataset) {
        let (i, _) = tree.route(&g.features);
        for (acc, s) in out[i].iter_mut().zip(&g.arms) {
            acc.merge(s);
        }
    }
    Ok(out)
}

/// Stats of the records that `tree` routes to leaf `leaf`.
pub fn leaf_information(
    tree: &DecisionTree,
    leaf: usize,
    dataset: &SparseRewardDataset,
) -> Result<LeafStats, TreeError> {
    let mut all = leaf_information_all(tree, dataset)?;
    assert!(leaf < all.len(), "leaf {leaf} out of range for {} leaves", all.len());
    Ok(all.swap_remove(leaf))
}

/// A leaf is resolved when elimination left one action, or every surviving
/// action already has the naive per-arm sample count.
pub fn leaf_is_resolved(stats: &[ArmStats], cfg: &PacConfig, t: u64) -> bool {
    let survivors = select_all(stats, t, cfg);
    let need = naive_sample_size(cfg);
    survivors.len() <= 1 || survivors.iter().all(|&a| stats[a].count >= need)
}

/// Number of leaves whose near-best action is still undetermined.
pub fn remaining_leaves(
    tree: &DecisionTree,
    dataset: &SparseRewardDataset,
    cfg: &PacConfig,
    t: u64,
) -> Result<usize, TreeError> {
    Ok(leaf_information_all(tree, dataset)?
        .iter()
        .filter(|s| !leaf_is_resolved(s, cfg, t))
        .count())
}

/// Per-leaf aggregate used by both the objective and the search.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Summary {
    pub arms: Vec<ArmStats>,
    pub labels: Vec<u64>,
    pub states: u64,
    /// Best mean of any (group, action) pair; bounds every leaf's mean from above.
    pub best_group_mean: f64,
    /// States mislabeled even by a per-group majority vote.
    pub minority: u64,
}

impl Summary {
    pub fn empty(n_actions: usize) -> Self {
        Self {
            arms: vec![ArmStats::default(); n_actions],
            labels: vec![0; n_actions],
            states: 0,
            best_group_mean: 0.0,
            minority: 0,
        }
    }

    pub fn add(&mut self, g: &Group) {
        for (acc, s) in self.arms.iter_mut().zip(&g.arms) {
            acc.merge(s);
        }
        for (acc, l) in self.labels.iter_mut().zip(&g.labels) {
            *acc += l;
        }
        self.states += g.states;
        self.best_group_mean = self.best_group_mean.max(g.best_mean);
        self.minority += g.minority;
    }

    fn weight(&self, total_states: u64) -> f64 {
        self.states as f64 / total_states as f64
    }

    /// Chosen action under `loss`, if the leaf has any record.
    pub fn action(&self, loss: LeafLoss) -> Option<usize> {
        match loss {
            LeafLoss::Reward => {
                let all: Vec<usize> = (0..self.arms.len()).collect();
                empirical_best(&self.arms, &all)
            }
            LeafLoss::Misclassification => {
                if self.states == 0 {
                    return None;
                }
                let mut best = 0;
                for (a, &c) in self.labels.iter().enumerate() {
                    if c > self.labels[best] {
                        best = a;
                    }
                }
                Some(best)
            }
        }
    }

    /// Loss of this leaf choosing `action`, without the leaf penalty.
    pub fn loss_of(&self, action: usize, loss: LeafLoss, total_states: u64) -> f64 {
        match loss {
            LeafLoss::Reward => match self.arms[action].mean() {
                Some(m) => self.weight(total_states) * (1.0 - m),
                None => f64::INFINITY,
            },
            LeafLoss::Misclassification => {
                if self.states == 0 {
                    return f64::INFINITY;
                }
                (self.states - self.labels[action]) as f64 / total_states as f64
            }
        }
    }

    /// Lower bound on the loss of any subtree over these records, excluding penalties.
    pub fn loss_floor(&self, loss: LeafLoss, total_states: u64) -> f64 {
        match loss {
            LeafLoss::Reward => self.weight(total_states) * (1.0 - self.best_group_mean),
            LeafLoss::Misclassification => self.minority as f64 / total_states as f64,
        }
    }
}

/// Canonical sum of per-leaf costs: sorted, so trees with the same leaf
/// partition get bit-identical objectives.
pub(crate) fn sum_leaf_costs(mut costs: Vec<f64>) -> f64 {
    costs.sort_by(f64::total_cmp);
    costs.iter().sum()
}

/// Objective of a tree under a fixed grouping of one dataset.
pub(crate) fn objective_from_groups(
    tree: &DecisionTree,
    groups: &[Group],
    total_states: u64,
    lambda: f64,
    loss: LeafLoss,
) -> f64 {
    let mut sums = vec![Summary::empty(tree.n_actions); tree.n_leaves()];
    for g in groups {
        sums[tree.route(&g.features).0].add(g);
    }
    let leaves = tree.leaves();
    let costs = sums
        .iter()
        .zip(leaves)
        .map(|(s, l)| {
            if s.states == 0 {
                f64::INFINITY
            } else {
                s.loss_of(l.action, loss, total_states) + lambda
            }
        })
        .collect();
    sum_leaf_costs(costs)
}

fn check_lambda(lambda: f64) -> Result<(), TreeError> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(TreeError::Lambda(lambda.to_string()));
    }
    Ok(())
}

/// Reward-sensitive objective of `tree` on `dataset`, using each leaf's stored
/// action. Infinite if a leaf captures no records or its action is unsampled.
pub fn tree_objective(tree: &DecisionTree, dataset: &SparseRewardDataset, lambda: f64) -> Result<f64, TreeError> {
    tree_objective_with(tree, dataset, lambda, LeafLoss::Reward)
}

pub fn tree_objective_with(
    tree: &DecisionTree,
    dataset: &SparseRewardDataset,
    lambda: f64,
    loss: LeafLoss,
) -> Result<f64, TreeError> {
    check_lambda(lambda)?;
    check_shape(tree, dataset)?;
    let groups = group_records(dataset);
    let total: u64 = groups.iter().map(|g| g.states).sum();
    if total == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(objective_from_groups(tree, &groups, total, lambda, loss))
}
