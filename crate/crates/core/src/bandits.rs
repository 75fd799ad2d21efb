//! PAC best-arm identification over abstract reward oracles.
//!
//! Three elimination procedures share the same sufficient statistics
//! ([`ArmStats`]): the naive fixed-budget algorithm, uniform successive
//! elimination, and non-uniform successive elimination (NUSE), which stays
//! valid when arms were sampled unequal numbers of times. All logarithms are
//! natural; per-arm sample thresholds are rounded up before multiplying by
//! the arm count. Every argmax breaks ties towards the lowest arm index.

use std::error::Error as StdError;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Error type returned by reward oracles.
pub type SampleError = Box<dyn StdError + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PacConfigError {
    #[error("arm count must be at least 1")]
    NoArms,
    #[error("epsilon must lie in (0, 1], got {0}")]
    Epsilon(f64),
    #[error("delta must lie in (0, 1), got {0}")]
    Delta(f64),
}

/// Arm count `n`, sub-optimality tolerance `epsilon` and failure probability `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacConfig {
    n: usize,
    epsilon: f64,
    delta: f64,
}

impl PacConfig {
    pub fn new(n: usize, epsilon: f64, delta: f64) -> Result<Self, PacConfigError> {
        if n == 0 {
            return Err(PacConfigError::NoArms);
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(PacConfigError::Epsilon(epsilon));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(PacConfigError::Delta(delta));
        }
        Ok(Self { n, epsilon, delta })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Per-arm sample count and reward total.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ArmStats {
    pub count: u64,
    pub sum: f64,
}

impl ArmStats {
    pub fn new(count: u64, sum: f64) -> Self {
        Self { count, sum }
    }

    /// Adds one reward, clamped to `[0, 1]`. Returns the value actually recorded.
    pub fn record(&mut self, reward: f64) -> f64 {
        let r = clamp_reward(reward);
        self.count += 1;
        self.sum += r;
        r
    }

    pub fn merge(&mut self, other: &ArmStats) {
        self.count += other.count;
        self.sum += other.sum;
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

/// Clamps a reward into `[0, 1]`, logging a warning when it was outside.
pub fn clamp_reward(reward: f64) -> f64 {
    if reward.is_nan() {
        log::warn!("reward was NaN; recording 0");
        return 0.0;
    }
    if !(0.0..=1.0).contains(&reward) {
        log::warn!("reward {reward} outside [0, 1]; clamping");
    }
    reward.clamp(0.0, 1.0)
}

/// Per-arm sample count of the naive algorithm: `ceil((4/ε²)·ln(2n/δ))`.
pub fn naive_sample_size(cfg: &PacConfig) -> u64 {
    let n = cfg.n as f64;
    let raw = (4.0 / (cfg.epsilon * cfg.epsilon)) * (2.0 * n / cfg.delta).ln();
    raw.ceil() as u64
}

/// Hoeffding radius `sqrt((2/τ)·ln(4t²n/δ))`; infinite for an unsampled arm.
///
/// Panics if `t == 0`.
pub fn confidence_radius(tau: u64, t: u64, n: usize, delta: f64) -> f64 {
    assert!(t >= 1, "iteration counter starts at 1");
    if tau == 0 {
        return f64::INFINITY;
    }
    let t = t as f64;
    let inner = 4.0 * t * t * n as f64 / delta;
    ((2.0 / tau as f64) * inner.ln()).sqrt()
}

/// Index of the highest empirical mean among `among`, skipping unsampled arms.
pub fn empirical_best(stats: &[ArmStats], among: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &i in among {
        if let Some(m) = stats[i].mean() {
            match best {
                Some((_, bm)) if m <= bm => {}
                _ => best = Some((i, m)),
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Non-uniform elimination step over the candidate set `candidates`.
///
/// An arm is dropped when the leader's empirical mean exceeds its own by more
/// than twice the largest radius among the candidates. If any candidate is
/// unsampled that radius is infinite and the whole set survives.
pub fn select_actions(
    stats: &[ArmStats],
    candidates: &[usize],
    t: u64,
    cfg: &PacConfig,
) -> Vec<usize> {
    if candidates.len() <= 1 || candidates.iter().any(|&i| stats[i].count == 0) {
        return candidates.to_vec();
    }
    let leader = candidates
        .iter()
        .filter_map(|&i| stats[i].mean())
        .fold(f64::NEG_INFINITY, f64::max);
    let max_radius = candidates
        .iter()
        .map(|&i| confidence_radius(stats[i].count, t, cfg.n, cfg.delta))
        .fold(0.0, f64::max);
    let threshold = 2.0 * max_radius;
    candidates
        .iter()
        .copied()
        .filter(|&i| {
            let m = stats[i].mean().expect("sampled");
            !(leader - m > threshold)
        })
        .collect()
}

/// [`select_actions`] over every arm `0..n`.
pub fn select_all(stats: &[ArmStats], t: u64, cfg: &PacConfig) -> Vec<usize> {
    let all: Vec<usize> = (0..stats.len()).collect();
    select_actions(stats, &all, t, cfg)
}

/// Stop rule for the successive-elimination variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Run until a single arm survives.
    ZeroDelta,
    /// Also stop once every survivor reached the naive per-arm sample count.
    EpsDelta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Identified,
    BudgetExhausted,
}

/// Result of an elimination run. `best` is the empirical best survivor,
/// also when the run was cut off by its sample cap.
#[derive(Debug, Clone, PartialEq)]
pub struct EliminationOutcome {
    pub best: usize,
    pub termination: Termination,
    pub stats: Vec<ArmStats>,
    pub samples_used: u64,
    pub survivors: Vec<usize>,
    /// Value of the iteration counter when the run ended.
    pub iteration: u64,
}

impl EliminationOutcome {
    pub fn budget_exhausted(&self) -> bool {
        self.termination == Termination::BudgetExhausted
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("sampler failed on arm {arm}")]
    Sampler {
        arm: usize,
        /// Statistics gathered before the failure.
        stats: Vec<ArmStats>,
        #[source]
        source: SampleError,
    },
    #[error("successive elimination needs equal initial counts, got {0:?}")]
    NonUniformCounts(Vec<u64>),
    #[error("expected {expected} arm statistics, got {got}")]
    ArmCount { expected: usize, got: usize },
}

/// Anything that can draw one reward for an arm.
pub trait RewardOracle {
    fn sample(&mut self, arm: usize) -> Result<f64, SampleError>;
}

impl<F> RewardOracle for F
where
    F: FnMut(usize) -> Result<f64, SampleError>,
{
    fn sample(&mut self, arm: usize) -> Result<f64, SampleError> {
        self(arm)
    }
}

struct Budgeted<'a, O: ?Sized> {
    oracle: &'a mut O,
    cap: Option<u64>,
    used: u64,
}

impl<O: RewardOracle + ?Sized> Budgeted<'_, O> {
    fn exhausted(&self) -> bool {
        self.cap.is_some_and(|c| self.used >= c)
    }

    fn draw(&mut self, arm: usize, stats: &mut [ArmStats]) -> Result<(), RunError> {
        match self.oracle.sample(arm) {
            Ok(r) => {
                stats[arm].record(r);
                self.used += 1;
                Ok(())
            }
            Err(source) => Err(RunError::Sampler {
                arm,
                stats: stats.to_vec(),
                source,
            }),
        }
    }
}

fn best_or_first(stats: &[ArmStats], among: &[usize]) -> usize {
    empirical_best(stats, among).unwrap_or(among[0])
}

/// Naive (ε,δ)-PAC: sample every arm the naive per-arm count, return the argmax.
///
/// Sampling is round-robin so that a capped run spreads evenly over the arms.
pub fn naive_pac_run<O: RewardOracle + ?Sized>(
    cfg: &PacConfig,
    oracle: &mut O,
    max_samples: Option<u64>,
) -> Result<EliminationOutcome, RunError> {
    let per_arm = naive_sample_size(cfg);
    let mut stats = vec![ArmStats::default(); cfg.n];
    let mut b = Budgeted {
        oracle,
        cap: max_samples,
        used: 0,
    };
    let all: Vec<usize> = (0..cfg.n).collect();
    for round in 0..per_arm {
        for arm in 0..cfg.n {
            if b.exhausted() {
                return Ok(EliminationOutcome {
                    best: best_or_first(&stats, &all),
                    termination: Termination::BudgetExhausted,
                    stats,
                    samples_used: b.used,
                    survivors: all,
                    iteration: round + 1,
                });
            }
            b.draw(arm, &mut stats)?;
        }
    }
    Ok(EliminationOutcome {
        best: best_or_first(&stats, &all),
        termination: Termination::Identified,
        stats,
        samples_used: b.used,
        survivors: all,
        iteration: per_arm.max(1),
    })
}

/// Uniform successive elimination with the common radius `ε_τ`.
///
/// `initial` must give every arm the same count; an all-zero start samples
/// each arm once before the first elimination test.
pub fn successive_elimination_run<O: RewardOracle + ?Sized>(
    cfg: &PacConfig,
    oracle: &mut O,
    initial: Vec<ArmStats>,
    mode: Mode,
    max_samples: Option<u64>,
) -> Result<EliminationOutcome, RunError> {
    if initial.len() != cfg.n {
        return Err(RunError::ArmCount {
            expected: cfg.n,
            got: initial.len(),
        });
    }
    let counts: Vec<u64> = initial.iter().map(|s| s.count).collect();
    if counts.windows(2).any(|w| w[0] != w[1]) {
        return Err(RunError::NonUniformCounts(counts));
    }
    let threshold = naive_sample_size(cfg);
    let mut stats = initial;
    let mut tau = counts[0];
    let mut survivors: Vec<usize> = (0..cfg.n).collect();
    let mut b = Budgeted {
        oracle,
        cap: max_samples,
        used: 0,
    };

    let finish = |stats: Vec<ArmStats>, survivors: Vec<usize>, used, tau, termination| {
        EliminationOutcome {
            best: best_or_first(&stats, &survivors),
            termination,
            stats,
            samples_used: used,
            survivors,
            iteration: tau,
        }
    };

    loop {
        if survivors.len() == 1 {
            return Ok(finish(stats, survivors, b.used, tau, Termination::Identified));
        }
        if tau > 0 {
            if mode == Mode::EpsDelta && tau >= threshold {
                return Ok(finish(stats, survivors, b.used, tau, Termination::Identified));
            }
            let radius = confidence_radius(tau, tau, cfg.n, cfg.delta);
            let leader = survivors
                .iter()
                .map(|&i| stats[i].mean().expect("sampled"))
                .fold(f64::NEG_INFINITY, f64::max);
            survivors.retain(|&i| !(leader - stats[i].mean().expect("sampled") > 2.0 * radius));
            if survivors.len() == 1 {
                continue;
            }
        }
        for &arm in &survivors {
            if b.exhausted() {
                return Ok(finish(stats, survivors, b.used, tau, Termination::BudgetExhausted));
            }
            b.draw(arm, &mut stats)?;
        }
        tau += 1;
    }
}

/// One NUSE round as seen by an observer, before its samples are drawn.
#[derive(Debug, Clone, Copy)]
pub struct NuseRound<'a> {
    pub t: u64,
    pub stats: &'a [ArmStats],
    pub candidates: &'a [usize],
    pub survivors: &'a [usize],
    pub n: usize,
    pub delta: f64,
}

impl NuseRound<'_> {
    /// Highest empirical mean among the survivors.
    pub fn leader_mean(&self) -> Option<f64> {
        self.survivors
            .iter()
            .filter_map(|&i| self.stats[i].mean())
            .reduce(f64::max)
    }

    /// Largest confidence radius among the candidates (the elimination radius).
    pub fn max_radius(&self) -> f64 {
        self.candidates
            .iter()
            .map(|&i| confidence_radius(self.stats[i].count, self.t, self.n, self.delta))
            .fold(0.0, f64::max)
    }

    /// Whether `value` lies inside `[leader - max_radius, leader + max_radius]`.
    pub fn interval_contains(&self, value: f64) -> bool {
        let r = self.max_radius();
        match self.leader_mean() {
            Some(m) => (m - value).abs() <= r,
            None => true,
        }
    }
}

impl fmt::Display for NuseRound<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "t={} survivors={:?} leader={:?} radius={}",
            self.t,
            self.survivors,
            self.leader_mean(),
            self.max_radius()
        )
    }
}

/// Non-uniform successive elimination starting from arbitrary per-arm counts.
///
/// Each round computes the survivors of the current candidate set, then
/// samples every survivor once, lowest count first. In eps-delta mode a
/// survivor that already reached the naive per-arm count is not sampled again,
/// and the run stops once all survivors have. `observe` sees every round.
pub fn nuse_run<O, F>(
    cfg: &PacConfig,
    oracle: &mut O,
    initial: Vec<ArmStats>,
    t0: u64,
    mode: Mode,
    max_samples: Option<u64>,
    mut observe: F,
) -> Result<EliminationOutcome, RunError>
where
    O: RewardOracle + ?Sized,
    F: FnMut(&NuseRound<'_>),
{
    if initial.len() != cfg.n {
        return Err(RunError::ArmCount {
            expected: cfg.n,
            got: initial.len(),
        });
    }
    let threshold = naive_sample_size(cfg);
    let mut stats = initial;
    let mut candidates: Vec<usize> = (0..cfg.n).collect();
    let mut t = t0.max(1);
    let mut b = Budgeted {
        oracle,
        cap: max_samples,
        used: 0,
    };

    loop {
        let survivors = select_actions(&stats, &candidates, t, cfg);
        observe(&NuseRound {
            t,
            stats: &stats,
            candidates: &candidates,
            survivors: &survivors,
            n: cfg.n,
            delta: cfg.delta,
        });
        let done = survivors.len() == 1
            || (mode == Mode::EpsDelta && survivors.iter().all(|&i| stats[i].count >= threshold));
        if done {
            return Ok(EliminationOutcome {
                best: best_or_first(&stats, &survivors),
                termination: Termination::Identified,
                stats,
                samples_used: b.used,
                survivors,
                iteration: t,
            });
        }
        let mut order: Vec<usize> = survivors
            .iter()
            .copied()
            .filter(|&i| mode == Mode::ZeroDelta || stats[i].count < threshold)
            .collect();
        order.sort_by_key(|&i| (stats[i].count, i));
        for arm in order {
            if b.exhausted() {
                return Ok(EliminationOutcome {
                    best: best_or_first(&stats, &survivors),
                    termination: Termination::BudgetExhausted,
                    stats,
                    samples_used: b.used,
                    survivors,
                    iteration: t,
                });
            }
            b.draw(arm, &mut stats)?;
        }
        candidates = survivors;
        t += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::substream;
    use proptest::prelude::*;
    use rand::Rng;

    fn cfg(n: usize, eps: f64, delta: f64) -> PacConfig {
        PacConfig::new(n, eps, delta).unwrap()
    }

    fn deterministic(rewards: Vec<f64>) -> impl FnMut(usize) -> Result<f64, SampleError> {
        move |arm| Ok(rewards[arm])
    }

    fn bernoulli(means: Vec<f64>, seed: u64) -> impl FnMut(usize) -> Result<f64, SampleError> {
        let mut rng = substream(seed, "bernoulli-test", &[]);
        move |arm| Ok(if rng.random::<f64>() < means[arm] { 1.0 } else { 0.0 })
    }

    #[test]
    fn config_validation() {
        assert_eq!(PacConfig::new(0, 0.1, 0.1), Err(PacConfigError::NoArms));
        assert!(matches!(PacConfig::new(2, 0.0, 0.1), Err(PacConfigError::Epsilon(_))));
        assert!(matches!(PacConfig::new(2, 1.5, 0.1), Err(PacConfigError::Epsilon(_))));
        assert!(PacConfig::new(2, 1.0, 0.1).is_ok());
        assert!(matches!(PacConfig::new(2, 0.5, 1.0), Err(PacConfigError::Delta(_))));
        assert!(matches!(PacConfig::new(2, 0.5, 0.0), Err(PacConfigError::Delta(_))));
    }

    #[test]
    fn naive_sample_size_examples() {
        assert_eq!(naive_sample_size(&cfg(7, 0.1, 0.05)), 2254);
        assert_eq!(7 * naive_sample_size(&cfg(7, 0.1, 0.05)), 15778);
        assert_eq!(naive_sample_size(&cfg(2, 1.0, 0.5)), 9);
        assert_eq!(naive_sample_size(&cfg(2, 0.5, 0.1)), 60);
    }

    #[test]
    fn radius_examples() {
        assert!(confidence_radius(0, 5, 3, 0.1).is_infinite());
        assert!((confidence_radius(1000, 1000, 2, 0.05) - 0.19437).abs() < 5e-5);
        assert!((confidence_radius(8, 2, 3, 0.1) - 1.2424).abs() < 5e-5);
    }

    #[test]
    #[should_panic]
    fn radius_rejects_t_zero() {
        confidence_radius(3, 0, 2, 0.1);
    }

    #[test]
    fn select_actions_examples() {
        let c = cfg(1, 0.1, 0.05);
        assert_eq!(select_all(&[ArmStats::new(3, 1.0)], 4, &c), vec![0]);

        let c = cfg(2, 0.1, 0.05);
        let stats = [ArmStats::new(1000, 900.0), ArmStats::new(1000, 100.0)];
        assert_eq!(select_all(&stats, 1000, &c), vec![0]);

        let c = cfg(3, 0.1, 0.05);
        let stats = [ArmStats::new(50, 25.0); 3];
        assert_eq!(select_all(&stats, 50, &c), vec![0, 1, 2]);

        // one unsampled arm blocks every elimination
        let stats = [ArmStats::new(1000, 1000.0), ArmStats::new(1000, 0.0), ArmStats::default()];
        assert_eq!(select_all(&stats, 1000, &c), vec![0, 1, 2]);
        assert_eq!(select_all(&[ArmStats::default(); 3], 1, &c), vec![0, 1, 2]);
    }

    #[test]
    fn naive_run_deterministic() {
        let c = cfg(2, 0.5, 0.1);
        let out = naive_pac_run(&c, &mut deterministic(vec![1.0, 0.0]), None).unwrap();
        assert_eq!(out.best, 0);
        assert_eq!(out.samples_used, 120);
        assert_eq!(out.stats[0].count, 60);
        assert_eq!(out.stats[1].count, 60);

        let out = naive_pac_run(&c, &mut deterministic(vec![0.4; 2]), None).unwrap();
        assert_eq!(out.best, 0);
    }

    #[test]
    fn naive_run_bernoulli_success_rate() {
        let c = cfg(2, 0.1, 0.05);
        let wins = (0..1000)
            .filter(|&s| {
                naive_pac_run(&c, &mut bernoulli(vec![0.9, 0.2], s), None)
                    .unwrap()
                    .best
                    == 0
            })
            .count();
        assert!(wins >= 950, "wins = {wins}");
    }

    #[test]
    fn naive_run_exposes_partial_stats_on_failure() {
        let c = cfg(2, 0.5, 0.1);
        let mut calls = 0;
        let mut failing = |arm: usize| -> Result<f64, SampleError> {
            calls += 1;
            if calls > 5 {
                Err("simulator crashed".into())
            } else {
                Ok(arm as f64)
            }
        };
        match naive_pac_run(&c, &mut failing, None) {
            Err(RunError::Sampler { stats, .. }) => {
                assert_eq!(stats.iter().map(|s| s.count).sum::<u64>(), 5);
            }
            other => panic!("expected sampler failure, got {other:?}"),
        }
    }

    #[test]
    fn naive_run_budget_cap() {
        let c = cfg(3, 0.5, 0.1);
        let out = naive_pac_run(&c, &mut deterministic(vec![0.2, 0.8, 0.5]), Some(10)).unwrap();
        assert!(out.budget_exhausted());
        assert_eq!(out.samples_used, 10);
        assert_eq!(out.best, 1);
    }

    #[test]
    fn se_single_arm_returns_immediately() {
        let c = cfg(1, 0.5, 0.1);
        let out = successive_elimination_run(
            &c,
            &mut deterministic(vec![0.3]),
            vec![ArmStats::default()],
            Mode::ZeroDelta,
            None,
        )
        .unwrap();
        assert_eq!(out.best, 0);
        assert_eq!(out.samples_used, 0);
    }

    #[test]
    fn se_deterministic_gap_eliminates_at_first_qualifying_tau() {
        let delta = 0.05;
        // independent search: first τ with 2·sqrt((2/τ)·ln(4τ²·2/δ)) < 1
        let first = (1u64..)
            .find(|&tau| {
                let t = tau as f64;
                2.0 * ((2.0 / t) * (4.0 * t * t * 2.0 / delta).ln()).sqrt() < 1.0
            })
            .unwrap();
        let c = cfg(2, 0.1, delta);
        let out = successive_elimination_run(
            &c,
            &mut deterministic(vec![1.0, 0.0]),
            vec![ArmStats::default(); 2],
            Mode::ZeroDelta,
            None,
        )
        .unwrap();
        assert_eq!(out.best, 0);
        assert_eq!(out.survivors, vec![0]);
        assert_eq!(out.iteration, first);
        assert_eq!(out.samples_used, 2 * first);
    }

    #[test]
    fn se_eps_delta_respects_naive_budget() {
        let c = cfg(3, 1.0, 0.1);
        let cap = naive_sample_size(&c);
        let out = successive_elimination_run(
            &c,
            &mut deterministic(vec![0.5; 3]),
            vec![ArmStats::default(); 3],
            Mode::EpsDelta,
            None,
        )
        .unwrap();
        assert_eq!(out.termination, Termination::Identified);
        assert!(out.stats.iter().all(|s| s.count <= cap));
    }

    #[test]
    fn se_rejects_non_uniform_counts() {
        let c = cfg(2, 0.5, 0.1);
        let err = successive_elimination_run(
            &c,
            &mut deterministic(vec![0.5; 2]),
            vec![ArmStats::new(2, 1.0), ArmStats::new(3, 1.0)],
            Mode::ZeroDelta,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, RunError::NonUniformCounts(_)));
    }

    #[test]
    fn nuse_returns_immediately_when_resolved_on_entry() {
        let c = cfg(3, 0.5, 0.1);
        let thr = naive_sample_size(&c);
        let stats = vec![
            ArmStats::new(thr + 10, (thr + 10) as f64),
            ArmStats::new(thr + 10, 0.0),
            ArmStats::new(thr + 10, 0.0),
        ];
        let out = nuse_run(&c, &mut deterministic(vec![1.0, 0.0, 0.0]), stats, 5, Mode::ZeroDelta, None, |_| {})
            .unwrap();
        assert_eq!(out.best, 0);
        assert_eq!(out.samples_used, 0);
    }

    #[test]
    fn nuse_tied_arms_exhaust_budget() {
        let c = cfg(3, 0.1, 0.05);
        let out = nuse_run(
            &c,
            &mut deterministic(vec![0.9, 0.9, 0.0]),
            vec![ArmStats::default(); 3],
            1,
            Mode::ZeroDelta,
            Some(5000),
            |_| {},
        )
        .unwrap();
        assert!(out.budget_exhausted());
        assert_eq!(out.samples_used, 5000);
        assert_eq!(out.survivors, vec![0, 1]);
    }

    #[test]
    fn nuse_handles_non_uniform_start() {
        let c = cfg(3, 0.2, 0.1);
        let stats = vec![ArmStats::new(40, 36.0), ArmStats::new(3, 0.0), ArmStats::new(0, 0.0)];
        let mut seen_sample_order = Vec::new();
        let mut oracle = |arm: usize| -> Result<f64, SampleError> {
            seen_sample_order.push(arm);
            Ok([0.9, 0.1, 0.2][arm])
        };
        let out = nuse_run(&c, &mut oracle, stats, 15, Mode::ZeroDelta, Some(100_000), |_| {}).unwrap();
        assert_eq!(out.best, 0);
        assert_eq!(out.termination, Termination::Identified);
        // lowest count first in the first round
        assert_eq!(&seen_sample_order[..3], &[2, 1, 0]);
    }

    #[test]
    fn nuse_eps_delta_never_exceeds_naive_count() {
        let c = cfg(3, 0.3, 0.1);
        let thr = naive_sample_size(&c);
        for seed in 0..20 {
            let out = nuse_run(
                &c,
                &mut bernoulli(vec![0.6, 0.55, 0.5], seed),
                vec![ArmStats::default(); 3],
                1,
                Mode::EpsDelta,
                None,
                |_| {},
            )
            .unwrap();
            assert!(out.stats.iter().all(|s| s.count <= thr), "{:?}", out.stats);
        }
    }

    #[test]
    fn pac_soundness_small() {
        // same shape as the full acceptance check with fewer trials
        let c = cfg(3, 0.1, 0.1);
        let trials = 300;
        let eliminated = (0..trials)
            .filter(|&s| {
                let mut lost = false;
                nuse_run(
                    &c,
                    &mut bernoulli(vec![0.9, 0.5, 0.2], 10_000 + s),
                    vec![ArmStats::default(); 3],
                    1,
                    Mode::ZeroDelta,
                    Some(4000),
                    |r| lost |= !r.survivors.contains(&0),
                )
                .unwrap();
                lost
            })
            .count();
        let bound = 0.1 + 3.0 * (0.1f64 * 0.9 / trials as f64).sqrt();
        assert!((eliminated as f64 / trials as f64) <= bound);
    }

    proptest! {
        #[test]
        fn radius_monotone(tau in 1u64..10_000, t in 1u64..10_000, n in 1usize..20, delta in 0.001f64..0.999) {
            let r = confidence_radius(tau, t, n, delta);
            prop_assert!(confidence_radius(tau + 1, t, n, delta) < r);
            prop_assert!(confidence_radius(tau, t + 1, n, delta) > r);
            prop_assert!(confidence_radius(tau, t, n + 1, delta) > r);
        }

        #[test]
        fn leader_always_survives(
            arms in prop::collection::vec((1u64..500, 0.0f64..1.0), 1..8),
            t in 1u64..1000,
        ) {
            let stats: Vec<ArmStats> = arms.iter().map(|&(c, m)| ArmStats::new(c, m * c as f64)).collect();
            let c = cfg(stats.len(), 0.1, 0.05);
            let all: Vec<usize> = (0..stats.len()).collect();
            let leader = empirical_best(&stats, &all).unwrap();
            let surv = select_all(&stats, t, &c);
            prop_assert!(surv.contains(&leader));
        }

        #[test]
        fn worsening_an_eliminated_arm_keeps_it_eliminated(
            arms in prop::collection::vec((1u64..500, 0.0f64..1.0), 2..6),
            t in 1u64..1000,
            extra in 1u64..50,
        ) {
            let mut stats: Vec<ArmStats> = arms.iter().map(|&(c, m)| ArmStats::new(c, m * c as f64)).collect();
            let c = cfg(stats.len(), 0.1, 0.05);
            let all: Vec<usize> = (0..stats.len()).collect();
            let before = select_all(&stats, t, &c);
            if let Some(&victim) = all.iter().find(|i| !before.contains(i)) {
                // zero-reward samples lower its mean and shrink its radius
                stats[victim].count += extra;
                let after = select_all(&stats, t, &c);
                prop_assert!(!after.contains(&victim));
            }
        }

        #[test]
        fn naive_budget_identity(n in 1usize..6, eps in 0.3f64..1.0, delta in 0.05f64..0.9) {
            let c = cfg(n, eps, delta);
            let mut oracle = |arm: usize| -> Result<f64, SampleError> { Ok(arm as f64 / n as f64) };
            let out = naive_pac_run(&c, &mut oracle, None).unwrap();
            prop_assert_eq!(out.samples_used, n as u64 * naive_sample_size(&c));
        }
    }
}
