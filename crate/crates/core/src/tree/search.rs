//! Exact tree search.
//!
//! [`train_osdt`] is a memoized branch-and-bound over record subsets: the best
//! subtree for a set of feature groups at a given depth budget does not
//! depend on how the set was reached. Any subtree over a subset costs at
//! least one leaf penalty plus [`Summary::loss_floor`], and any split costs at
//! least two penalties plus the same floor, which prunes both whole splits
//! and the second child of a split.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    check_lambda, group_records, objective_from_groups, DecisionTree, Group, Leaf, LeafLoss, Node,
    SparseRewardDataset, Summary, TreeError,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lambda: f64,
    pub max_depth: usize,
    pub loss: LeafLoss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            max_depth: 4,
            loss: LeafLoss::Reward,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrainError {
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("exhaustive search supports at most 8 features and depth 3, got {features} and {depth}")]
    TooLarge { features: usize, depth: usize },
}

#[derive(Clone)]
struct Solved {
    cost: f64,
    node: Node,
}

struct Search<'a> {
    groups: &'a [Group],
    total_states: u64,
    n_actions: usize,
    feature_dim: usize,
    lambda: f64,
    loss: LeafLoss,
    memo: HashMap<(Vec<u32>, usize), Solved>,
}

impl Search<'_> {
    fn summarize(&self, subset: &[u32]) -> Summary {
        let mut s = Summary::empty(self.n_actions);
        for &g in subset {
            s.add(&self.groups[g as usize]);
        }
        s
    }

    fn leaf(&self, s: &Summary) -> Solved {
        let action = s.action(self.loss).expect("subset is non-empty");
        Solved {
            cost: s.loss_of(action, self.loss, self.total_states) + self.lambda,
            node: Node::Leaf(Leaf {
                action,
                stats: s.arms.clone(),
                resolved: false,
            }),
        }
    }

    fn floor(&self, s: &Summary) -> f64 {
        s.loss_floor(self.loss, self.total_states)
    }

    fn partition(&self, subset: &[u32], feature: usize) -> (Vec<u32>, Vec<u32>) {
        subset
            .iter()
            .partition(|&&g| !self.groups[g as usize].features.get(feature))
    }

    fn solve(&mut self, subset: Vec<u32>, summary: Summary, depth: usize) -> Solved {
        let mut best = self.leaf(&summary);
        if depth == 0 || subset.len() <= 1 || best.cost <= 2.0 * self.lambda + self.floor(&summary) {
            return best;
        }
        let key = (subset, depth);
        if let Some(s) = self.memo.get(&key) {
            return s.clone();
        }
        let (subset, depth) = key;
        for feature in 0..self.feature_dim {
            let (zero, one) = self.partition(&subset, feature);
            if zero.is_empty() || one.is_empty() {
                continue;
            }
            let (sz, so) = (self.summarize(&zero), self.summarize(&one));
            let lb_zero = self.lambda + self.floor(&sz);
            let lb_one = self.lambda + self.floor(&so);
            if lb_zero + lb_one >= best.cost {
                continue;
            }
            let z = self.solve(zero, sz, depth - 1);
            if z.cost + lb_one >= best.cost {
                continue;
            }
            let o = self.solve(one, so, depth - 1);
            if z.cost + o.cost < best.cost {
                best = Solved {
                    cost: z.cost + o.cost,
                    node: Node::Split {
                        feature,
                        zero: Box::new(z.node),
                        one: Box::new(o.node),
                    },
                };
            }
        }
        self.memo.insert((subset, depth), best.clone());
        best
    }
}

/// Tree of depth at most `cfg.max_depth` minimizing the objective under
/// `cfg.loss`. Ties prefer a leaf over a split and lower split features.
pub fn train_osdt(dataset: &SparseRewardDataset, cfg: &TrainConfig) -> Result<DecisionTree, TrainError> {
    check_lambda(cfg.lambda)?;
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let groups = group_records(dataset);
    let mut search = Search {
        total_states: groups.iter().map(|g| g.states).sum(),
        groups: &groups,
        n_actions: dataset.n_actions(),
        feature_dim: dataset.feature_dim(),
        lambda: cfg.lambda,
        loss: cfg.loss,
        memo: HashMap::new(),
    };
    let all: Vec<u32> = (0..groups.len() as u32).collect();
    let summary = search.summarize(&all);
    let solved = search.solve(all, summary, cfg.max_depth);
    Ok(DecisionTree::new(dataset.feature_dim(), dataset.n_actions(), solved.node))
}

/// Every tree of depth at most `depth` over `subset` with no empty leaf.
fn enumerate(groups: &[Group], subset: &[u32], depth: usize, feature_dim: usize, n_actions: usize, loss: LeafLoss) -> Vec<Node> {
    let mut s = Summary::empty(n_actions);
    for &g in subset {
        s.add(&groups[g as usize]);
    }
    let mut out = vec![Node::Leaf(Leaf {
        action: s.action(loss).expect("subset is non-empty"),
        stats: s.arms.clone(),
        resolved: false,
    })];
    if depth == 0 {
        return out;
    }
    for feature in 0..feature_dim {
        let (zero, one): (Vec<u32>, Vec<u32>) = subset.iter().partition(|&&g| !groups[g as usize].features.get(feature));
        if zero.is_empty() || one.is_empty() {
            continue;
        }
        let zs = enumerate(groups, &zero, depth - 1, feature_dim, n_actions, loss);
        let os = enumerate(groups, &one, depth - 1, feature_dim, n_actions, loss);
        for z in &zs {
            for o in &os {
                out.push(Node::Split {
                    feature,
                    zero: Box::new(z.clone()),
                    one: Box::new(o.clone()),
                });
            }
        }
    }
    out
}

/// Brute-force minimizer of the objective over all trees of depth at most
/// `max_depth`. Ties go to fewer leaves, then lexicographically smaller
/// preorder split features. Limited to 8 features and depth 3.
pub fn exhaustive_optimal_tree(
    dataset: &SparseRewardDataset,
    lambda: f64,
    max_depth: usize,
    loss: LeafLoss,
) -> Result<DecisionTree, TrainError> {
    check_lambda(lambda)?;
    if dataset.feature_dim() > 8 || max_depth > 3 {
        return Err(TrainError::TooLarge {
            features: dataset.feature_dim(),
            depth: max_depth,
        });
    }
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let groups = group_records(dataset);
    let total: u64 = groups.iter().map(|g| g.states).sum();
    let all: Vec<u32> = (0..groups.len() as u32).collect();
    let mut best: Option<(f64, usize, Vec<usize>, DecisionTree)> = None;
    for node in enumerate(&groups, &all, max_depth, dataset.feature_dim(), dataset.n_actions(), loss) {
        let tree = DecisionTree::new(dataset.feature_dim(), dataset.n_actions(), node);
        let obj = objective_from_groups(&tree, &groups, total, lambda, loss);
        let key = (obj, tree.n_leaves(), tree.splits());
        let better = match &best {
            None => true,
            Some((bo, bl, bs, _)) => (key.0, key.1, &key.2) < (*bo, *bl, bs),
        };
        if better {
            best = Some((key.0, key.1, key.2, tree));
        }
    }
    Ok(best.expect("a root leaf always exists").3)
}
