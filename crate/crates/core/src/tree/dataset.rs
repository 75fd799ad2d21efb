use std::collections::BTreeMap;

use thiserror::Error;

use crate::bandits::ArmStats;
use crate::features::BinaryVector;

/// One simulated (or reused) outcome: state, action taken, reward observed.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub state_id: u64,
    pub features: BinaryVector,
    pub action: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("action {action} out of range for {n_actions} actions")]
    Action { action: usize, n_actions: usize },
    #[error("reward {0} outside [0, 1]")]
    Reward(f64),
    #[error("feature vector has {got} bits, dataset expects {expected}")]
    FeatureDim { expected: usize, got: usize },
    #[error("state {0} already recorded with different features")]
    StateFeatures(u64),
}

/// Records of `(state, action, reward)`; states need not have every action.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRewardDataset {
    n_actions: usize,
    feature_dim: usize,
    records: Vec<Record>,
    state_features: BTreeMap<u64, BinaryVector>,
}

impl SparseRewardDataset {
    pub fn new(n_actions: usize, feature_dim: usize) -> Self {
        Self {
            n_actions,
            feature_dim,
            records: Vec::new(),
            state_features: BTreeMap::new(),
        }
    }

    pub fn from_records(
        n_actions: usize,
        feature_dim: usize,
        records: impl IntoIterator<Item = Record>,
    ) -> Result<Self, DatasetError> {
        let mut ds = Self::new(n_actions, feature_dim);
        for r in records {
            ds.push(r)?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, record: Record) -> Result<(), DatasetError> {
        if record.action >= self.n_actions {
            return Err(DatasetError::Action {
                action: record.action,
                n_actions: self.n_actions,
            });
        }
        if !(0.0..=1.0).contains(&record.reward) {
            return Err(DatasetError::Reward(record.reward));
        }
        if record.features.len() != self.feature_dim {
            return Err(DatasetError::FeatureDim {
                expected: self.feature_dim,
                got: record.features.len(),
            });
        }
        match self.state_features.get(&record.state_id) {
            Some(f) if *f != record.features => return Err(DatasetError::StateFeatures(record.state_id)),
            Some(_) => {}
            None => {
                self.state_features.insert(record.state_id, record.features.clone());
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.state_features.len()
    }
}

/// All records sharing one feature vector, reduced to sufficient statistics.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Group {
    pub features: BinaryVector,
    pub arms: Vec<ArmStats>,
    pub states: u64,
    /// Number of states whose best observed action is each action.
    pub labels: Vec<u64>,
    /// Highest empirical arm mean within the group.
    pub best_mean: f64,
    /// States whose label differs from the group's majority label.
    pub minority: u64,
}

fn sorted_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

/// Groups in ascending feature-vector order. Reward totals are summed in
/// sorted order, so the result does not depend on record order.
pub(crate) fn group_records(ds: &SparseRewardDataset) -> Vec<Group> {
    let n = ds.n_actions;
    let mut per_state: BTreeMap<u64, Vec<Vec<f64>>> = BTreeMap::new();
    for r in &ds.records {
        per_state.entry(r.state_id).or_insert_with(|| vec![Vec::new(); n])[r.action].push(r.reward);
    }
    let mut groups: BTreeMap<&BinaryVector, (Vec<Vec<f64>>, u64, Vec<u64>)> = BTreeMap::new();
    for (id, rewards) in per_state {
        let features = &ds.state_features[&id];
        let entry = groups
            .entry(features)
            .or_insert_with(|| (vec![Vec::new(); n], 0, vec![0; n]));
        let mut label: Option<(usize, f64)> = None;
        for (a, rs) in rewards.into_iter().enumerate() {
            if rs.is_empty() {
                continue;
            }
            let mean = sorted_sum(rs.clone()) / rs.len() as f64;
            if label.is_none_or(|(_, m)| mean > m) {
                label = Some((a, mean));
            }
            entry.0[a].extend(rs);
        }
        entry.1 += 1;
        entry.2[label.expect("state has a record").0] += 1;
    }
    groups
        .into_iter()
        .map(|(features, (rewards, states, labels))| {
            let arms: Vec<ArmStats> = rewards
                .into_iter()
                .map(|rs| ArmStats::new(rs.len() as u64, sorted_sum(rs)))
                .collect();
            Group {
                features: features.clone(),
                best_mean: arms.iter().filter_map(ArmStats::mean).fold(0.0, f64::max),
                minority: states - labels.iter().max().copied().unwrap_or(0),
                arms,
                states,
                labels,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: u64, bits: &str, action: usize, reward: f64) -> Record {
        Record {
            state_id: id,
            features: bits.parse().unwrap(),
            action,
            reward,
        }
    }

    #[test]
    fn push_validates() {
        let mut ds = SparseRewardDataset::new(2, 3);
        assert!(matches!(ds.push(rec(0, "010", 2, 0.5)), Err(DatasetError::Action { .. })));
        assert_eq!(ds.push(rec(0, "010", 0, 1.5)), Err(DatasetError::Reward(1.5)));
        assert!(matches!(ds.push(rec(0, "01", 0, 0.5)), Err(DatasetError::FeatureDim { .. })));
        ds.push(rec(0, "010", 0, 0.5)).unwrap();
        ds.push(rec(0, "010", 0, 0.7)).unwrap();
        assert_eq!(ds.push(rec(0, "011", 1, 0.5)), Err(DatasetError::StateFeatures(0)));
        assert_eq!((ds.len(), ds.n_states()), (2, 1));
    }

    #[test]
    fn groups_merge_states_with_equal_features() {
        let ds = SparseRewardDataset::from_records(
            2,
            2,
            [
                rec(0, "01", 0, 0.2),
                rec(0, "01", 1, 0.9),
                rec(1, "01", 0, 0.6),
                rec(2, "10", 1, 0.3),
            ],
        )
        .unwrap();
        let g = group_records(&ds);
        assert_eq!(g.len(), 2);
        let shared = g.iter().find(|g| g.features.to_string() == "01").unwrap();
        assert_eq!(shared.states, 2);
        assert_eq!(shared.arms[0], ArmStats::new(2, 0.2 + 0.6));
        assert_eq!(shared.labels, vec![1, 1]);
        let other = g.iter().find(|g| g.features.to_string() == "10").unwrap();
        assert_eq!(other.labels, vec![0, 1]);
    }
}
