//! Toy pick/sweep box world.
//!
//! Boxes sit in a `columns × rows` grid under gravity. `Pick(c)` grabs the top
//! box of column `c` together with the top box of each neighbour standing at
//! the same height. `Sweep` pulls the floor box out of every column no taller
//! than `sweep_max_height`; what was stacked above falls down one row. Each
//! targeted box independently stays put with probability `fail_prob`.
//!
//! Rewards are boxes removed divided by `columns`, the most boxes any single
//! action can remove.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EnvError, Environment, SimOutcome};
use crate::features::{depth_profile, pick_gain_estimate, RawFeatureVector};
use crate::seeding::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoxWorldConfig {
    pub columns: usize,
    pub rows: usize,
    pub fail_prob: f64,
    pub sweep_max_height: usize,
}

impl Default for BoxWorldConfig {
    fn default() -> Self {
        Self {
            columns: 4,
            rows: 4,
            fail_prob: 0.1,
            sweep_max_height: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionSpec {
    Pick(usize),
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxWorldState {
    columns: usize,
    rows: usize,
    /// Row-major occupancy, row 0 is the floor.
    cells: Vec<bool>,
    pub step: u64,
    /// Boxes unloaded so far in this episode.
    pub unloaded: usize,
    /// Boxes present when the episode started.
    pub initial_boxes: usize,
}

impl BoxWorldState {
    pub fn from_heights(rows: usize, heights: &[usize]) -> Self {
        let columns = heights.len();
        let mut cells = vec![false; columns * rows];
        for (c, &h) in heights.iter().enumerate() {
            for r in 0..h.min(rows) {
                cells[r * columns + c] = true;
            }
        }
        let mut s = Self {
            columns,
            rows,
            cells,
            step: 0,
            unloaded: 0,
            initial_boxes: 0,
        };
        s.initial_boxes = s.total_boxes();
        s
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn occupied(&self, column: usize, row: usize) -> bool {
        self.cells[row * self.columns + column]
    }

    pub fn height(&self, column: usize) -> usize {
        (0..self.rows).rev().find(|&r| self.occupied(column, r)).map_or(0, |r| r + 1)
    }

    pub fn heights(&self) -> Vec<usize> {
        (0..self.columns).map(|c| self.height(c)).collect()
    }

    pub fn total_boxes(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }

    /// True when no box has an empty cell directly below it.
    pub fn obeys_gravity(&self) -> bool {
        (0..self.columns).all(|c| {
            (1..self.rows).all(|r| !self.occupied(c, r) || self.occupied(c, r - 1))
        })
    }

    /// Columns whose top box a pick at `column` would grab.
    pub fn pick_targets(&self, column: usize) -> Vec<usize> {
        let h = self.height(column);
        if h == 0 {
            return Vec::new();
        }
        let lo = column.saturating_sub(1);
        let hi = (column + 1).min(self.columns - 1);
        (lo..=hi)
            .filter(|&c| c == column || self.height(c) == h)
            .collect()
    }

    /// Columns whose floor box a sweep would pull out.
    pub fn sweep_targets(&self, max_height: usize) -> Vec<usize> {
        (0..self.columns)
            .filter(|&c| {
                let h = self.height(c);
                h >= 1 && h <= max_height
            })
            .collect()
    }

    fn remove_top(&mut self, column: usize) {
        let h = self.height(column);
        if h > 0 {
            self.cells[(h - 1) * self.columns + column] = false;
        }
    }

    fn remove_floor(&mut self, column: usize) {
        for r in 1..self.rows {
            let above = self.occupied(column, r);
            self.cells[(r - 1) * self.columns + column] = above;
        }
        self.cells[(self.rows - 1) * self.columns + column] = false;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxWorld {
    cfg: BoxWorldConfig,
}

impl BoxWorld {
    pub fn new(cfg: BoxWorldConfig) -> Result<Self, EnvError> {
        if cfg.columns == 0 || cfg.rows == 0 {
            return Err(EnvError::Config("box world needs at least one column and one row".into()));
        }
        if !(0.0..=1.0).contains(&cfg.fail_prob) {
            return Err(EnvError::Config(format!("fail_prob must lie in [0, 1], got {}", cfg.fail_prob)));
        }
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &BoxWorldConfig {
        &self.cfg
    }

    pub fn action(&self, index: usize) -> Option<ActionSpec> {
        match index {
            i if i < self.cfg.columns => Some(ActionSpec::Pick(i)),
            i if i == self.cfg.columns => Some(ActionSpec::Sweep),
            _ => None,
        }
    }

    pub fn action_index(&self, spec: ActionSpec) -> usize {
        match spec {
            ActionSpec::Pick(c) => c,
            ActionSpec::Sweep => self.cfg.columns,
        }
    }

    pub fn normalizer(&self) -> f64 {
        self.cfg.columns as f64
    }

    fn targets(&self, state: &BoxWorldState, spec: ActionSpec) -> Vec<usize> {
        match spec {
            ActionSpec::Pick(c) => state.pick_targets(c),
            ActionSpec::Sweep => state.sweep_targets(self.cfg.sweep_max_height),
        }
    }

    fn random_state(&self, rng: &mut SimRng, step: u64) -> BoxWorldState {
        loop {
            let heights: Vec<usize> = (0..self.cfg.columns)
                .map(|_| rng.random_range(0..=self.cfg.rows))
                .collect();
            if heights.iter().any(|&h| h > 0) {
                let mut s = BoxWorldState::from_heights(self.cfg.rows, &heights);
                s.step = step;
                return s;
            }
        }
    }
}

impl Environment for BoxWorld {
    type State = BoxWorldState;

    fn n_actions(&self) -> usize {
        self.cfg.columns + 1
    }

    fn initial_state(&self, rng: &mut SimRng) -> BoxWorldState {
        self.random_state(rng, 0)
    }

    fn simulate(
        &self,
        state: &BoxWorldState,
        action: usize,
        rng: &mut SimRng,
    ) -> Result<SimOutcome<BoxWorldState>, EnvError> {
        let spec = self.action(action).ok_or(EnvError::InvalidAction {
            action,
            n_actions: self.n_actions(),
        })?;
        let mut next = state.clone();
        let mut removed = 0;
        for c in self.targets(state, spec) {
            if rng.random::<f64>() < self.cfg.fail_prob {
                continue;
            }
            match spec {
                ActionSpec::Pick(_) => next.remove_top(c),
                ActionSpec::Sweep => next.remove_floor(c),
            }
            removed += 1;
        }
        next.step = state.step + 1;
        next.unloaded += removed;
        Ok(SimOutcome {
            reward: (removed as f64 / self.normalizer()).min(1.0),
            next_state: next,
        })
    }

    fn observe(&self, state: &BoxWorldState) -> RawFeatureVector {
        let gains = (0..self.cfg.columns).map(|c| pick_gain_estimate(state, c)).collect();
        depth_profile(state).concat(RawFeatureVector::new(gains))
    }

    fn true_means(&self, state: &BoxWorldState) -> Vec<f64> {
        (0..self.n_actions())
            .map(|a| {
                let spec = self.action(a).expect("in range");
                (1.0 - self.cfg.fail_prob) * self.targets(state, spec).len() as f64 / self.normalizer()
            })
            .collect()
    }

    fn is_terminal(&self, state: &BoxWorldState) -> bool {
        state.total_boxes() == 0
    }

    fn restart(&self, after: &BoxWorldState, rng: &mut SimRng) -> BoxWorldState {
        self.random_state(rng, after.step + 1)
    }
}
