use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Environment;
use crate::features::{binarize, BinaryVector, FeatureError};
use crate::seeding::SeedStream;
use crate::tree::{DecisionTree, TreeError};

/// Accuracy and reward capture of a policy on a test set, both in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub reward_capture: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("test set is empty")]
    Empty,
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Features(#[from] FeatureError),
}

/// Binarized test states with their true action means.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub features: Vec<BinaryVector>,
    pub means: Vec<Vec<f64>>,
}

impl TestSet {
    /// Draws `size` states from the environment's initial-state distribution,
    /// one `("eval", [i])` substream each.
    pub fn sample<E: Environment>(
        env: &E,
        seeds: &SeedStream,
        size: usize,
        categories: usize,
    ) -> Result<Self, FeatureError> {
        let mut features = Vec::with_capacity(size);
        let mut means = Vec::with_capacity(size);
        for i in 0..size {
            let s = env.initial_state(&mut seeds.rng("eval", &[i as u64]));
            features.push(binarize(&env.observe(&s), categories)?);
            means.push(env.true_means(&s));
        }
        Ok(Self { features, means })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Scores any policy given as a function from features to an action.
    /// Choosing any action tied for the best mean counts as correct.
    pub fn evaluate_with(&self, mut policy: impl FnMut(&BinaryVector) -> Result<usize, TreeError>) -> Result<EvalReport, EvalError> {
        if self.is_empty() {
            return Err(EvalError::Empty);
        }
        let mut correct = 0usize;
        let mut achieved = 0.0;
        let mut oracle = 0.0;
        for (x, means) in self.features.iter().zip(&self.means) {
            let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let got = means[policy(x)?];
            if got >= best {
                correct += 1;
            }
            achieved += got;
            oracle += best;
        }
        Ok(EvalReport {
            accuracy: correct as f64 / self.len() as f64,
            reward_capture: if oracle > 0.0 { (achieved / oracle).min(1.0) } else { 1.0 },
        })
    }

    pub fn evaluate(&self, tree: &DecisionTree) -> Result<EvalReport, EvalError> {
        self.evaluate_with(|x| tree.predict(x))
    }
}

/// Simulate calls at which accuracy first stays at or above `threshold` for
/// `window` consecutive snapshots, read at the last snapshot of the window.
///
/// `snapshots` are `(sim_calls, accuracy)` in run order. When `frozen` is set
/// the run stopped because its policy can no longer change, so a qualifying
/// streak that reaches the final snapshot counts as sustained.
pub fn calls_to_sustained_accuracy(
    snapshots: &[(u64, f64)],
    threshold: f64,
    window: usize,
    frozen: bool,
) -> Option<u64> {
    let mut streak = 0;
    for &(calls, acc) in snapshots {
        if acc >= threshold {
            streak += 1;
            if streak >= window {
                return Some(calls);
            }
        } else {
            streak = 0;
        }
    }
    if frozen && streak > 0 {
        return snapshots.last().map(|&(c, _)| c);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{DecisionTree, Leaf, Node};
    use crate::bandits::ArmStats;

    fn two_partition_set() -> TestSet {
        // feature 0 decides the partition; action 0 is best on zeros, 1 on ones
        let mut features = Vec::new();
        let mut means = Vec::new();
        for i in 0..10 {
            features.push(BinaryVector::from_bits(&[i % 2 == 1]));
            means.push(if i % 2 == 1 { vec![0.5, 0.9] } else { vec![0.9, 0.5] });
        }
        TestSet { features, means }
    }

    #[test]
    fn oracle_tree_scores_one() {
        let leaf = |a| {
            Box::new(Node::Leaf(Leaf {
                action: a,
                stats: vec![ArmStats::default(); 2],
                resolved: true,
            }))
        };
        let tree = DecisionTree::new(1, 2, Node::Split { feature: 0, zero: leaf(0), one: leaf(1) });
        let r = two_partition_set().evaluate(&tree).unwrap();
        assert_eq!((r.accuracy, r.reward_capture), (1.0, 1.0));
    }

    #[test]
    fn constant_tree_scores_half() {
        let r = two_partition_set().evaluate(&DecisionTree::constant(1, 2, 0)).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert!((r.reward_capture - 1.4 / 1.8).abs() < 1e-12);
        assert!(r.reward_capture <= 1.0);
    }

    #[test]
    fn ties_count_as_correct_and_empty_is_rejected() {
        let set = TestSet {
            features: vec![BinaryVector::zeros(1)],
            means: vec![vec![0.7, 0.7]],
        };
        assert_eq!(set.evaluate(&DecisionTree::constant(1, 2, 1)).unwrap().accuracy, 1.0);
        let empty = TestSet { features: vec![], means: vec![] };
        assert_eq!(empty.evaluate(&DecisionTree::constant(1, 2, 1)), Err(EvalError::Empty));
    }

    #[test]
    fn sustained_accuracy_window() {
        let snaps = [(10, 0.95), (20, 0.5), (30, 0.9), (40, 0.92), (50, 0.91), (60, 0.3)];
        assert_eq!(calls_to_sustained_accuracy(&snaps, 0.9, 3, false), Some(50));
        assert_eq!(calls_to_sustained_accuracy(&snaps, 0.9, 4, false), None);
        let frozen = [(10, 0.5), (20, 0.95), (25, 0.97)];
        assert_eq!(calls_to_sustained_accuracy(&frozen, 0.9, 10, true), Some(25));
        assert_eq!(calls_to_sustained_accuracy(&frozen, 0.9, 10, false), None);
    }
}
