//! Synthetic bandit world with known per-partition mean rewards.
//!
//! A state is a vector of uniform raw features in `[0,1]`. A few of them (the
//! relevant features) decide the state's partition: feature `relevant[i]`
//! contributes bit `i` when it is at least 0.5, and the partition is that code
//! modulo the partition count. Every partition has one best action with mean
//! `best_mean`; the others have `best_mean - gap`.
//!
//! The raw vector may carry more dimensions than the learner observes; a
//! relevant feature outside the observed prefix makes partitions that look
//! identical to the learner.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{EnvError, Environment, SimOutcome};
use crate::features::RawFeatureVector;
use crate::seeding::{substream, substream_seed, SimRng};

/// Noise model around a partition/action mean. Both keep the mean exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardNoise {
    /// Gaussian noise truncated symmetrically to `[μ−w, μ+w]`, `w = min(μ, 1−μ)`.
    TruncatedGaussian { sigma: f64 },
    /// Reward 1 with probability μ, else 0.
    Bernoulli,
}

impl RewardNoise {
    fn sample(&self, mean: f64, rng: &mut SimRng) -> f64 {
        match *self {
            RewardNoise::Bernoulli => {
                if rng.random::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
            RewardNoise::TruncatedGaussian { sigma } => {
                let half = mean.min(1.0 - mean);
                if sigma <= 0.0 || half <= 0.0 {
                    return mean;
                }
                let normal = Normal::new(0.0, sigma).expect("sigma > 0");
                for _ in 0..10_000 {
                    let z: f64 = normal.sample(rng);
                    if z.abs() <= half {
                        return mean + z;
                    }
                }
                mean
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticWorldConfig {
    pub n_features: usize,
    pub n_partitions: usize,
    pub n_actions: usize,
    pub best_mean: f64,
    pub gap: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticWorldConfig {
    fn default() -> Self {
        Self {
            n_features: 50,
            n_partitions: 4,
            n_actions: 3,
            best_mean: 0.9,
            gap: 0.4,
            sigma: 0.1,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticState {
    /// All raw dimensions, observed or not.
    pub features: RawFeatureVector,
    pub partition: usize,
    pub step: u64,
    /// Seed of the state stream this state belongs to.
    pub stream: u64,
}

/// `(partition_id, action, true_mean)` rows, exported for test oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthTable {
    pub means: Vec<Vec<f64>>,
}

impl GroundTruthTable {
    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.means
            .iter()
            .enumerate()
            .flat_map(|(p, row)| row.iter().enumerate().map(move |(a, &m)| (p, a, m)))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("partition_id,action,true_mean\n");
        for (p, a, m) in self.rows() {
            out.push_str(&format!("{p},{a},{m}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    n_features: usize,
    observed: usize,
    relevant: Vec<usize>,
    means: Vec<Vec<f64>>,
    noise: RewardNoise,
}

/// Builds the world described by `cfg` and its ground-truth table.
///
/// Relevant features and each partition's best action are drawn from `cfg.seed`.
/// Best actions cycle through a shuffled action order so that distinct
/// partitions disagree whenever there are enough actions.
pub fn make_synthetic_world(
    cfg: &SyntheticWorldConfig,
) -> Result<(SyntheticWorld, GroundTruthTable), EnvError> {
    if cfg.n_partitions == 0 || cfg.n_actions == 0 {
        return Err(EnvError::Config("need at least one partition and one action".into()));
    }
    if !(0.0..=1.0).contains(&cfg.best_mean) || cfg.gap < 0.0 || cfg.best_mean - cfg.gap < 0.0 {
        return Err(EnvError::Config(format!(
            "need 0 <= best_mean - gap and best_mean <= 1, got best_mean={} gap={}",
            cfg.best_mean, cfg.gap
        )));
    }
    if cfg.sigma < 0.0 {
        return Err(EnvError::Config(format!("sigma must be >= 0, got {}", cfg.sigma)));
    }
    let n_bits = bits_for(cfg.n_partitions);
    if n_bits > cfg.n_features {
        return Err(EnvError::Config(format!(
            "{} partitions need {} features, only {} available",
            cfg.n_partitions, n_bits, cfg.n_features
        )));
    }
    let mut rng = substream(cfg.seed, "synthetic-world", &[]);
    let mut features: Vec<usize> = (0..cfg.n_features).collect();
    features.shuffle(&mut rng);
    let mut relevant = features[..n_bits].to_vec();
    relevant.sort_unstable();
    let mut order: Vec<usize> = (0..cfg.n_actions).collect();
    order.shuffle(&mut rng);
    let means: Vec<Vec<f64>> = (0..cfg.n_partitions)
        .map(|p| {
            let best = order[p % cfg.n_actions];
            (0..cfg.n_actions)
                .map(|a| if a == best { cfg.best_mean } else { cfg.best_mean - cfg.gap })
                .collect()
        })
        .collect();
    let world = SyntheticWorld::from_table(
        cfg.n_features,
        cfg.n_features,
        relevant,
        means,
        RewardNoise::TruncatedGaussian { sigma: cfg.sigma },
    )?;
    let truth = world.ground_truth();
    Ok((world, truth))
}

fn bits_for(partitions: usize) -> usize {
    if partitions <= 1 {
        0
    } else {
        (usize::BITS - (partitions - 1).leading_zeros()) as usize
    }
}

impl SyntheticWorld {
    /// World with an explicit mean table `means[partition][action]`.
    ///
    /// `observed` is the number of leading raw features the learner sees.
    pub fn from_table(
        n_features: usize,
        observed: usize,
        relevant: Vec<usize>,
        means: Vec<Vec<f64>>,
        noise: RewardNoise,
    ) -> Result<Self, EnvError> {
        if observed > n_features {
            return Err(EnvError::Config("observed features exceed raw features".into()));
        }
        if relevant.iter().any(|&f| f >= n_features) {
            return Err(EnvError::Config("relevant feature index out of range".into()));
        }
        let n_actions = means.first().map_or(0, Vec::len);
        if n_actions == 0 || means.iter().any(|row| row.len() != n_actions) {
            return Err(EnvError::Config("mean table must be rectangular and non-empty".into()));
        }
        if means.iter().flatten().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(EnvError::Config("means must lie in [0, 1]".into()));
        }
        if relevant.len() < bits_for(means.len()) {
            return Err(EnvError::Config("too few relevant features for the partition count".into()));
        }
        Ok(Self {
            n_features,
            observed,
            relevant,
            means,
            noise,
        })
    }

    pub fn ground_truth(&self) -> GroundTruthTable {
        GroundTruthTable {
            means: self.means.clone(),
        }
    }

    pub fn n_partitions(&self) -> usize {
        self.means.len()
    }

    pub fn relevant_features(&self) -> &[usize] {
        &self.relevant
    }

    pub fn noise(&self) -> RewardNoise {
        self.noise
    }

    /// Partition of a raw feature vector.
    pub fn partition_of(&self, raw: &RawFeatureVector) -> usize {
        let code = self
            .relevant
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, &f)| acc | (usize::from(raw.values()[f] >= 0.5) << i));
        code % self.means.len()
    }

    fn draw_state(&self, rng: &mut SimRng, step: u64, stream: u64) -> SyntheticState {
        let features = RawFeatureVector::new((0..self.n_features).map(|_| rng.random::<f64>()).collect());
        let partition = self.partition_of(&features);
        SyntheticState {
            features,
            partition,
            step,
            stream,
        }
    }

    /// The `step`-th state of a stream. Streams are fixed i.i.d. sequences, so
    /// the successor of a state does not depend on the action taken.
    pub fn state_at(&self, stream: u64, step: u64) -> SyntheticState {
        let mut rng = SimRng::seed_from_u64(substream_seed(stream, "synthetic-state", &[step]));
        self.draw_state(&mut rng, step, stream)
    }

    /// Rejection-samples an initial state whose partition is `partition`.
    pub fn initial_state_in(&self, partition: usize, rng: &mut SimRng) -> Option<SyntheticState> {
        (0..100_000)
            .map(|_| self.initial_state(rng))
            .find(|s| s.partition == partition)
    }
}

impl Environment for SyntheticWorld {
    type State = SyntheticState;

    fn n_actions(&self) -> usize {
        self.means[0].len()
    }

    fn initial_state(&self, rng: &mut SimRng) -> SyntheticState {
        let stream = rng.random::<u64>();
        self.state_at(stream, 0)
    }

    fn simulate(
        &self,
        state: &SyntheticState,
        action: usize,
        rng: &mut SimRng,
    ) -> Result<SimOutcome<SyntheticState>, EnvError> {
        let n = self.n_actions();
        if action >= n {
            return Err(EnvError::InvalidAction { action, n_actions: n });
        }
        let mean = self.means[state.partition][action];
        Ok(SimOutcome {
            reward: self.noise.sample(mean, rng),
            next_state: self.state_at(state.stream, state.step + 1),
        })
    }

    fn observe(&self, state: &SyntheticState) -> RawFeatureVector {
        RawFeatureVector::new(state.features.values()[..self.observed].to_vec())
    }

    fn true_means(&self, state: &SyntheticState) -> Vec<f64> {
        self.means[state.partition].clone()
    }

    fn restart(&self, after: &SyntheticState, _rng: &mut SimRng) -> SyntheticState {
        self.state_at(after.stream, after.step + 1)
    }
}
