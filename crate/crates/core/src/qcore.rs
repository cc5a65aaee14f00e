//! Tabular Q-learning primitives.
//!
//! All randomness flows through [`SimRng`], a ChaCha8 stream seeded from a
//! single `u64`. Within one iteration each learner consumes its exploration
//! coin first and then, only when exploring, one uniform action draw.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The generator used for every run. Seeded with [`rng_from_seed`].
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense `n_states x n_actions` table of action values.
///
/// The table also caches the greedy action of every state so that the run
/// loops do not rescan a row on every iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
    #[serde(skip)]
    greedy: Vec<usize>,
}

impl QTable {
    pub fn from_values(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(n_states, n_actions)?;
        if values.len() != n_states * n_actions {
            return Err(Error::InvalidArgument(format!(
                "expected {} values for a {n_states}x{n_actions} table, got {}",
                n_states * n_actions,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite Q-value {bad}")));
        }
        let greedy = values
            .chunks_exact(n_actions)
            .map(scan_argmax)
            .collect();
        Ok(Self {
            n_states,
            n_actions,
            values,
            greedy,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.n_actions..(state + 1) * self.n_actions]
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.n_actions + action]
    }

    /// Lowest-index maximizer of `row(state)`.
    pub fn greedy(&self, state: usize) -> usize {
        self.greedy[state]
    }

    /// `Q(s,a) <- (1-alpha) Q(s,a) + alpha (r + delta max_a' Q(s',a'))`.
    ///
    /// Every other cell is left untouched.
    pub fn update(
        &mut self,
        state: usize,
        action: usize,
        reward: f64,
        next_state: usize,
        params: &LearningParams,
    ) -> Result<()> {
        if state >= self.n_states || next_state >= self.n_states {
            return Err(Error::InvalidArgument(format!(
                "state index out of range (state={state}, next_state={next_state}, n_states={})",
                self.n_states
            )));
        }
        if action >= self.n_actions {
            return Err(Error::InvalidArgument(format!(
                "action index {action} out of range (n_actions={})",
                self.n_actions
            )));
        }
        if !reward.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite reward {reward}")));
        }

        let continuation = if params.delta == 0.0 {
            0.0
        } else {
            params.delta * self.get(next_state, self.greedy[next_state])
        };
        let idx = state * self.n_actions + action;
        let old = self.values[idx];
        let new = (1.0 - params.alpha) * old + params.alpha * (reward + continuation);
        self.values[idx] = new;

        let best = self.greedy[state];
        if action == best {
            if new < old {
                self.greedy[state] = scan_argmax(self.row(state));
            }
        } else {
            let best_value = self.values[state * self.n_actions + best];
            if new > best_value || (new == best_value && action < best) {
                self.greedy[state] = action;
            }
        }
        Ok(())
    }
}

fn check_dims(n_states: usize, n_actions: usize) -> Result<()> {
    if n_states == 0 || n_actions == 0 {
        return Err(Error::InvalidArgument(format!(
            "Q-table dimensions must be positive, got {n_states}x{n_actions}"
        )));
    }
    Ok(())
}

fn scan_argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Table with every cell drawn independently from `U[0,1)`, row-major order.
pub fn init_qtable(n_states: usize, n_actions: usize, rng: &mut SimRng) -> Result<QTable> {
    check_dims(n_states, n_actions)?;
    let values = (0..n_states * n_actions)
        .map(|_| rng.gen::<f64>())
        .collect();
    QTable::from_values(n_states, n_actions, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningParams {
    pub alpha: f64,
    pub delta: f64,
}

impl LearningParams {
    pub fn new(alpha: f64, delta: f64) -> Result<Self> {
        let params = Self { alpha, delta };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config("alpha", format!("must lie in [0,1], got {}", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::config("delta", format!("must lie in [0,1), got {}", self.delta)));
        }
        Ok(())
    }
}

impl Default for LearningParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            delta: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExplorationSchedule {
    /// Constant exploration rate.
    Fixed(f64),
    /// `epsilon_t = exp(-k t)`.
    ExpDecay(f64),
}

impl ExplorationSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ExplorationSchedule::Fixed(eps) if !(0.0..=1.0).contains(&eps) => Err(Error::config(
                "epsilon",
                format!("must lie in [0,1], got {eps}"),
            )),
            ExplorationSchedule::ExpDecay(k) if !(k > 0.0 && k.is_finite()) => Err(Error::config(
                "k",
                format!("decay rate must be positive and finite, got {k}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn epsilon_at(&self, t: u64) -> f64 {
        match *self {
            ExplorationSchedule::Fixed(eps) => eps,
            ExplorationSchedule::ExpDecay(k) => (-k * t as f64).exp(),
        }
    }
}

pub fn epsilon_at(schedule: &ExplorationSchedule, t: u64) -> f64 {
    schedule.epsilon_at(t)
}

/// Draws the exploration coin and, on success, a uniform action.
///
/// Returns `None` when the learner should act greedily. This is the single
/// place where a learner touches the RNG during a run.
#[inline]
pub fn explore(n_actions: usize, eps: f64, rng: &mut SimRng) -> Option<usize> {
    if rng.gen::<f64>() < eps {
        Some(rng.gen_range(0..n_actions))
    } else {
        None
    }
}

/// Epsilon-greedy choice over one row.
pub fn select_action(qrow: &[f64], eps: f64, rng: &mut SimRng) -> Result<usize> {
    if qrow.is_empty() {
        return Err(Error::InvalidArgument("empty action-value row".into()));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!("epsilon {eps} outside [0,1]")));
    }
    Ok(explore(qrow.len(), eps, rng).unwrap_or_else(|| scan_argmax(qrow)))
}

/// Lowest index attaining the row maximum.
pub fn greedy_action(qrow: &[f64]) -> Result<usize> {
    if qrow.is_empty() {
        return Err(Error::InvalidArgument("empty action-value row".into()));
    }
    Ok(scan_argmax(qrow))
}
