//! Tabular reinforcement learning: Q-table storage, ε-greedy action
//! selection, the SARSA on-policy update and a Q-learning off-policy update
//! kept as a baseline.
//!
//! Nothing in this module knows about queues or bandwidth; states and
//! actions are plain indices so the learner can be reused and tested
//! against small synthetic decision processes.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RlError {
    #[error("state index {state} out of range (state count {state_count})")]
    StateOutOfRange { state: usize, state_count: usize },
    #[error("action index {action} out of range (action count {action_count})")]
    ActionOutOfRange { action: usize, action_count: usize },
    #[error("reward {0} is not finite")]
    NonFiniteReward(f64),
    #[error("parameter {name} = {value} outside [0, 1]")]
    ParamOutOfRange { name: &'static str, value: f64 },
}

/// Learning rate, discount factor and exploration probability, each
/// bounded in [0, 1]. Validated at construction so the update rules can
/// trust them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRlParams")]
pub struct RlParams {
    alpha: f64,
    gamma: f64,
    epsilon: f64,
}

#[derive(Deserialize)]
struct RawRlParams {
    alpha: f64,
    gamma: f64,
    epsilon: f64,
}

impl TryFrom<RawRlParams> for RlParams {
    type Error = RlError;
    fn try_from(raw: RawRlParams) -> Result<Self, RlError> {
        RlParams::new(raw.alpha, raw.gamma, raw.epsilon)
    }
}

impl RlParams {
    pub fn new(alpha: f64, gamma: f64, epsilon: f64) -> Result<Self, RlError> {
        for (name, value) in [("alpha", alpha), ("gamma", gamma), ("epsilon", epsilon)] {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(RlError::ParamOutOfRange { name, value });
            }
        }
        Ok(Self {
            alpha,
            gamma,
            epsilon,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Same parameters with exploration switched off, for greedy evaluation.
    pub fn exploit_only(&self) -> Self {
        Self {
            epsilon: 0.0,
            ..*self
        }
    }
}

/// ε = 2%, α = 0.2, γ = 0.8.
impl Default for RlParams {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            gamma: 0.8,
            epsilon: 0.02,
        }
    }
}

/// One experience tuple: state, action, reward, next state, next action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    pub next_action: usize,
}

/// Dense table of action-value estimates, initialized to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    values: Vec<f64>,
    state_count: usize,
    action_count: usize,
}

impl QTable {
    pub fn new(state_count: usize, action_count: usize) -> Self {
        assert!(state_count > 0 && action_count > 0);
        Self {
            values: vec![0.0; state_count * action_count],
            state_count,
            action_count,
        }
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    /// Total number of addressable (state, action) entries.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, state: usize, action: usize) -> Result<f64, RlError> {
        Ok(self.values[self.offset(state, action)?])
    }

    fn offset(&self, state: usize, action: usize) -> Result<usize, RlError> {
        if state >= self.state_count {
            return Err(RlError::StateOutOfRange {
                state,
                state_count: self.state_count,
            });
        }
        if action >= self.action_count {
            return Err(RlError::ActionOutOfRange {
                action,
                action_count: self.action_count,
            });
        }
        Ok(state * self.action_count + action)
    }

    fn row(&self, state: usize) -> &[f64] {
        let start = state * self.action_count;
        &self.values[start..start + self.action_count]
    }

    /// Argmax over the actions of one state, ties broken toward the lowest
    /// action index.
    pub fn greedy_action(&self, state: usize) -> Result<usize, RlError> {
        if state >= self.state_count {
            return Err(RlError::StateOutOfRange {
                state,
                state_count: self.state_count,
            });
        }
        let row = self.row(state);
        let mut best = 0;
        for (i, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = i;
            }
        }
        Ok(best)
    }

    /// Per-state greedy action, lowest-index tie-break.
    pub fn greedy_policy(&self) -> Vec<usize> {
        (0..self.state_count)
            .map(|s| self.greedy_action(s).expect("state in range"))
            .collect()
    }

    /// ε-greedy selection: with probability ε a uniformly random action,
    /// otherwise the greedy one. Consumes one random draw for the
    /// exploration coin and, only when exploring, a second for the action,
    /// so the sequence is reproducible from the seed.
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        state: usize,
        params: &RlParams,
        rng: &mut R,
    ) -> Result<usize, RlError> {
        if state >= self.state_count {
            return Err(RlError::StateOutOfRange {
                state,
                state_count: self.state_count,
            });
        }
        if rng.gen::<f64>() < params.epsilon {
            Ok(rng.gen_range(0..self.action_count))
        } else {
            self.greedy_action(state)
        }
    }

    /// On-policy temporal-difference update:
    /// Q(s,a) += α·(r + γ·Q(s',a') − Q(s,a)). Only the (s,a) entry changes.
    pub fn sarsa_update(&mut self, t: Transition, params: &RlParams) -> Result<(), RlError> {
        if !t.reward.is_finite() {
            return Err(RlError::NonFiniteReward(t.reward));
        }
        let next_q = self.get(t.next_state, t.next_action)?;
        let idx = self.offset(t.state, t.action)?;
        let old = self.values[idx];
        let updated = old + params.alpha * (t.reward + params.gamma * next_q - old);
        debug_assert!(updated.is_finite());
        self.values[idx] = updated;
        Ok(())
    }

    /// Off-policy baseline update toward r + γ·max_a' Q(s', a').
    pub fn q_learning_update(
        &mut self,
        state: usize,
        action: usize,
        reward: f64,
        next_state: usize,
        params: &RlParams,
    ) -> Result<(), RlError> {
        if !reward.is_finite() {
            return Err(RlError::NonFiniteReward(reward));
        }
        let best_next = self.greedy_action(next_state)?;
        let max_next_q = self.get(next_state, best_next)?;
        let idx = self.offset(state, action)?;
        let old = self.values[idx];
        self.values[idx] = old + params.alpha * (reward + params.gamma * max_next_q - old);
        Ok(())
    }
}
