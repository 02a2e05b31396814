//! The allocation brains: a fixed-rule baseline and the SARSA-driven
//! episode loop, both acting on an aggregator environment.
//!
//! An episode starts from a triggering buffer state and ends when one of
//! three conditions fires: the proposed allocation would exceed the link
//! capacity, the rates satisfy the priority order with every queue back
//! below the threshold, or the attempt budget runs out.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{
    self, apply_action, compute_reward, constraint_check, encode_state, simulate_ticks, Action,
    AggregatorState, EnvState, RewardWeights, TrafficProfile, ACTION_COUNT, QUEUE_COUNT,
    STATE_COUNT,
};
use crate::rl::{QTable, RlError, RlParams, Transition};

#[derive(Debug, Error, PartialEq)]
pub enum OrchestratorError {
    #[error("factor {0} must be positive")]
    NonPositiveFactor(f64),
    #[error("factor {factor} is infeasible: T1 would be {t1}, above the link capacity")]
    InfeasibleFactor { factor: f64, t1: f64 },
    #[error("initial rates sum to {0}, above the link capacity")]
    InfeasibleInitialRates(f64),
    #[error("Q-table sized {states}x{actions}, expected {expected_states}x{expected_actions}")]
    QTableShape {
        states: usize,
        actions: usize,
        expected_states: usize,
        expected_actions: usize,
    },
    #[error(transparent)]
    Rl(#[from] RlError),
}

/// Why an episode ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReason {
    /// The next allocation would exceed the link capacity.
    ConstraintLimit,
    /// T1 > T2 > T3 with every queue back below the threshold.
    PrioritySatisfied,
    /// The attempt budget ran out.
    MaxAttempts,
}

/// Parameters of one allocation episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub max_attempts: u32,
    pub threshold: f64,
    pub step_fraction: f64,
    pub rl: RlParams,
    pub reward: RewardWeights,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            max_attempts: 400,
            threshold: 50.0,
            step_fraction: 0.10,
            rl: RlParams::default(),
            reward: RewardWeights::default(),
        }
    }
}

/// One executed step: the state the agent saw, what it did, what it got.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u32,
    /// Agent state index before the action.
    pub state_index: usize,
    pub action_index: usize,
    pub reward: f64,
    /// Rates persisted after the step (the old ones if it was rejected).
    pub rates: [f64; QUEUE_COUNT],
    pub occupancies: [f64; QUEUE_COUNT],
    /// Volume delivered during this step's ticks.
    pub drained: [f64; QUEUE_COUNT],
    /// Cumulative loss after the step.
    pub loss: [f64; QUEUE_COUNT],
    /// False when the allocation violated the constraint and was rejected.
    pub accepted: bool,
}

/// Outcome of one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub final_state: AggregatorState,
    pub steps_taken: u32,
    pub terminal_reason: TerminalReason,
    pub trace: Vec<StepRecord>,
}

/// The fixed-rule allocation: T1 is the initial rate scaled by `factor`
/// (rounded half up to an integer); the remainder splits evenly between T2
/// and T3 with the spare point going to the higher-priority queue. The
/// result always sums to exactly the link capacity.
pub fn fixed_rule_allocate(
    initial_rates: [f64; QUEUE_COUNT],
    factor: f64,
) -> Result<[f64; QUEUE_COUNT], OrchestratorError> {
    if factor <= 0.0 || !factor.is_finite() {
        return Err(OrchestratorError::NonPositiveFactor(factor));
    }
    let sum: f64 = initial_rates.iter().sum();
    if sum > env::LINK_CAPACITY + env::CAPACITY_TOLERANCE {
        return Err(OrchestratorError::InfeasibleInitialRates(sum));
    }
    let t1 = (initial_rates[0] * factor).round();
    if t1 > env::LINK_CAPACITY {
        return Err(OrchestratorError::InfeasibleFactor { factor, t1 });
    }
    let remaining = env::LINK_CAPACITY - t1;
    let t2 = (remaining / 2.0).ceil();
    let t3 = (remaining / 2.0).floor();
    Ok([t1, t2, t3])
}

/// Check the three terminal conditions against a state and its encoded
/// flags. Callers pass the *proposed* state when probing a pending
/// allocation, so an infeasible rate sum reports `ConstraintLimit` here.
pub fn check_terminal(
    state: &AggregatorState,
    env_state: &EnvState,
    steps: u32,
    cfg: &EpisodeConfig,
) -> Option<TerminalReason> {
    if !constraint_check(state) {
        Some(TerminalReason::ConstraintLimit)
    } else if env_state.all_below() && env::rates_strictly_ordered(&state.rates) {
        Some(TerminalReason::PrioritySatisfied)
    } else if steps >= cfg.max_attempts {
        Some(TerminalReason::MaxAttempts)
    } else {
        None
    }
}

/// Run one SARSA allocation episode. The loop reads the buffer state,
/// selects an action ε-greedily, applies it, advances the traffic
/// dynamics, computes the reward, selects the follow-up action and updates
/// the Q-table with the full transition tuple, until a terminal condition
/// fires. An allocation that would violate the link constraint is rejected
/// (never persisted), penalized, and ends the episode.
///
/// The Q-table is updated in place so learning can accumulate across
/// episodes within a run.
pub fn run_sarsa_episode<R: Rng + ?Sized>(
    s0: &AggregatorState,
    traffic: &TrafficProfile,
    q: &mut QTable,
    cfg: &EpisodeConfig,
    rng: &mut R,
) -> Result<EpisodeResult, OrchestratorError> {
    if q.state_count() != STATE_COUNT || q.action_count() != ACTION_COUNT {
        return Err(OrchestratorError::QTableShape {
            states: q.state_count(),
            actions: q.action_count(),
            expected_states: STATE_COUNT,
            expected_actions: ACTION_COUNT,
        });
    }

    let mut state = s0.clone();
    let mut env_state = encode_state(&state, cfg.threshold);
    let mut trace = Vec::new();

    if let Some(reason) = check_terminal(&state, &env_state, 0, cfg) {
        return Ok(EpisodeResult {
            final_state: state,
            steps_taken: 0,
            terminal_reason: reason,
            trace,
        });
    }

    let mut action_index = q.select_action(env_state.index(), &cfg.rl, rng)?;
    let mut steps = 0u32;

    loop {
        steps += 1;
        let action = Action::from_index(action_index).expect("selection within bounds");
        let proposed = apply_action(&state, &action, cfg.step_fraction);

        let (next_state, reward, rejected) = if constraint_check(&proposed) {
            let after_ticks = simulate_ticks(&proposed, traffic, traffic.ticks_per_step);
            let reward = compute_reward(&state, &after_ticks, cfg.threshold, &cfg.reward);
            (after_ticks, reward, false)
        } else {
            // Rejected allocation: the environment never adopts the rates,
            // but the agent is charged for proposing them.
            let reward = compute_reward(&state, &proposed, cfg.threshold, &cfg.reward);
            (state.clone(), reward, true)
        };

        let next_env_state = encode_state(&next_state, cfg.threshold);
        let next_action = q.select_action(next_env_state.index(), &cfg.rl, rng)?;
        q.sarsa_update(
            Transition {
                state: env_state.index(),
                action: action_index,
                reward,
                next_state: next_env_state.index(),
                next_action,
            },
            &cfg.rl,
        )?;

        trace.push(StepRecord {
            step: steps,
            state_index: env_state.index(),
            action_index,
            reward,
            rates: next_state.rates,
            occupancies: next_state.occupancy,
            drained: [
                next_state.drained[0] - state.drained[0],
                next_state.drained[1] - state.drained[1],
                next_state.drained[2] - state.drained[2],
            ],
            loss: next_state.loss,
            accepted: !rejected,
        });

        state = next_state;
        env_state = next_env_state;
        action_index = next_action;

        let reason = if rejected {
            Some(TerminalReason::ConstraintLimit)
        } else {
            check_terminal(&state, &env_state, steps, cfg)
        };
        if let Some(reason) = reason {
            return Ok(EpisodeResult {
                final_state: state,
                steps_taken: steps,
                terminal_reason: reason,
                trace,
            });
        }
    }
}

/// Run the fixed-rule baseline: allocate once, then let the traffic
/// dynamics run for the same tick budget an agent episode would get
/// (`max_attempts` steps' worth of ticks).
pub fn run_fixed_episode(
    s0: &AggregatorState,
    traffic: &TrafficProfile,
    factor: f64,
    cfg: &EpisodeConfig,
) -> Result<EpisodeResult, OrchestratorError> {
    let rates = fixed_rule_allocate(s0.rates, factor)?;
    let mut allocated = s0.clone();
    allocated.rates = rates;
    let ticks = cfg.max_attempts * traffic.ticks_per_step;
    let final_state = simulate_ticks(&allocated, traffic, ticks);
    let record = StepRecord {
        step: 1,
        state_index: encode_state(s0, cfg.threshold).index(),
        action_index: 0,
        reward: 0.0,
        rates: final_state.rates,
        occupancies: final_state.occupancy,
        drained: [
            final_state.drained[0] - s0.drained[0],
            final_state.drained[1] - s0.drained[1],
            final_state.drained[2] - s0.drained[2],
        ],
        loss: final_state.loss,
        accepted: true,
    };
    Ok(EpisodeResult {
        final_state,
        steps_taken: 1,
        terminal_reason: TerminalReason::MaxAttempts,
        trace: vec![record],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_pcg::Pcg64;

    fn scenario(occ: [f64; 3]) -> AggregatorState {
        AggregatorState::new(occ, [35.0, 25.0, 15.0])
    }

    #[test]
    fn fixed_rule_matches_published_allocations() {
        let initial = [35.0, 25.0, 15.0];
        assert_eq!(
            fixed_rule_allocate(initial, 1.15).unwrap(),
            [40.0, 30.0, 30.0]
        );
        assert_eq!(
            fixed_rule_allocate(initial, 1.25).unwrap(),
            [44.0, 28.0, 28.0]
        );
        assert_eq!(
            fixed_rule_allocate(initial, 1.50).unwrap(),
            [53.0, 24.0, 23.0]
        );
    }

    #[test]
    fn fixed_rule_always_fills_the_link() {
        for factor in [0.5, 0.9, 1.0, 1.15, 1.25, 1.5, 2.0, 2.5] {
            let rates = fixed_rule_allocate([35.0, 25.0, 15.0], factor).unwrap();
            assert_eq!(rates.iter().sum::<f64>(), 100.0, "factor {factor}");
        }
    }

    #[test]
    fn fixed_rule_rejects_bad_factors() {
        assert!(matches!(
            fixed_rule_allocate([35.0, 25.0, 15.0], 0.0),
            Err(OrchestratorError::NonPositiveFactor(_))
        ));
        assert!(matches!(
            fixed_rule_allocate([35.0, 25.0, 15.0], 3.0),
            Err(OrchestratorError::InfeasibleFactor { .. })
        ));
        assert!(matches!(
            fixed_rule_allocate([50.0, 40.0, 30.0], 1.15),
            Err(OrchestratorError::InfeasibleInitialRates(_))
        ));
    }

    #[test]
    fn check_terminal_priority_satisfied() {
        let mut s = scenario([45.0, 20.0, 20.0]);
        s.rates = [49.0, 35.0, 13.0];
        let env = encode_state(&s, 50.0);
        let cfg = EpisodeConfig::default();
        assert_eq!(
            check_terminal(&s, &env, 50, &cfg),
            Some(TerminalReason::PrioritySatisfied)
        );
    }

    #[test]
    fn check_terminal_max_attempts() {
        let s = scenario([80.0, 20.0, 20.0]);
        let env = encode_state(&s, 50.0);
        let cfg = EpisodeConfig::default();
        assert_eq!(check_terminal(&s, &env, 399, &cfg), None);
        assert_eq!(
            check_terminal(&s, &env, 400, &cfg),
            Some(TerminalReason::MaxAttempts)
        );
    }

    #[test]
    fn check_terminal_pending_increase_over_capacity() {
        // rates already at the boundary; a pending increase lands at 101
        let mut s = scenario([80.0, 20.0, 20.0]);
        s.rates = [41.0, 30.0, 30.0];
        let env = encode_state(&s, 50.0);
        let cfg = EpisodeConfig::default();
        assert_eq!(
            check_terminal(&s, &env, 1, &cfg),
            Some(TerminalReason::ConstraintLimit)
        );
    }

    #[test]
    fn sarsa_episode_terminates_immediately_when_already_satisfied() {
        let s0 = scenario([20.0, 20.0, 20.0]);
        let mut q = QTable::new(8, 27);
        let before = q.clone();
        let mut rng = Pcg64::seed_from_u64(1);
        let result = run_sarsa_episode(
            &s0,
            &TrafficProfile::default(),
            &mut q,
            &EpisodeConfig::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(result.steps_taken, 0);
        assert_eq!(result.terminal_reason, TerminalReason::PrioritySatisfied);
        assert!(result.trace.is_empty());
        assert_eq!(q, before, "no update on an immediately terminal episode");
    }

    #[test]
    fn sarsa_episode_flushes_triggered_queue() {
        let s0 = scenario([80.0, 20.0, 20.0]);
        let mut q = QTable::new(8, 27);
        let mut rng = Pcg64::seed_from_u64(1);
        let result = run_sarsa_episode(
            &s0,
            &TrafficProfile::default(),
            &mut q,
            &EpisodeConfig::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(result.terminal_reason, TerminalReason::PrioritySatisfied);
        let env = encode_state(&result.final_state, 50.0);
        assert!(env.all_below());
        assert_eq!(result.final_state.loss, [0.0; 3]);
        assert!(result.steps_taken <= 400);
    }

    #[test]
    fn sarsa_episode_never_persists_violating_rates() {
        let cfg = EpisodeConfig::default();
        let tp = TrafficProfile::default();
        for seed in 1..=20u64 {
            let mut q = QTable::new(8, 27);
            let mut rng = Pcg64::seed_from_u64(seed);
            // preload everything so episodes run long enough to hit limits
            let s0 = scenario([80.0, 80.0, 80.0]);
            let result = run_sarsa_episode(&s0, &tp, &mut q, &cfg, &mut rng).unwrap();
            for record in &result.trace {
                let sum: f64 = record.rates.iter().sum();
                assert!(
                    sum <= 100.0 + 1e-9,
                    "seed {seed}: persisted rates sum {sum}"
                );
            }
            assert!(result.steps_taken <= cfg.max_attempts);
            assert!(result.final_state.link_occupation() <= 100.0 + 1e-9);
        }
    }

    #[test]
    fn sarsa_episode_is_deterministic_per_seed() {
        let s0 = scenario([80.0, 80.0, 20.0]);
        let cfg = EpisodeConfig::default();
        let tp = TrafficProfile::default();
        let run = |seed: u64| {
            let mut q = QTable::new(8, 27);
            let mut rng = Pcg64::seed_from_u64(seed);
            run_sarsa_episode(&s0, &tp, &mut q, &cfg, &mut rng).unwrap()
        };
        assert_eq!(run(7), run(7));
    }

    #[test]
    fn trained_greedy_replay_is_no_slower_than_training() {
        // Train on one scenario with learning accumulating across episodes,
        // then replay greedily (ε = 0) from the same start.
        let s0 = scenario([80.0, 20.0, 20.0]);
        let tp = TrafficProfile::default();
        let cfg = EpisodeConfig::default();
        let mut q = QTable::new(8, 27);
        let mut rng = Pcg64::seed_from_u64(3);
        let mut last_steps = 0;
        for _ in 0..50 {
            let result = run_sarsa_episode(&s0, &tp, &mut q, &cfg, &mut rng).unwrap();
            last_steps = result.steps_taken;
        }
        let eval_cfg = EpisodeConfig {
            rl: cfg.rl.exploit_only(),
            ..cfg
        };
        let mut frozen = q.clone();
        let eval = run_sarsa_episode(
            &s0,
            &tp,
            &mut frozen,
            &eval_cfg,
            &mut Pcg64::seed_from_u64(99),
        )
        .unwrap();
        assert_eq!(eval.terminal_reason, TerminalReason::PrioritySatisfied);
        assert!(eval.steps_taken <= last_steps.max(1));
        // and the greedy replay is deterministic
        let eval2 = run_sarsa_episode(
            &s0,
            &tp,
            &mut q.clone(),
            &eval_cfg,
            &mut Pcg64::seed_from_u64(0),
        )
        .unwrap();
        assert_eq!(eval.final_state, eval2.final_state);
    }

    #[test]
    fn learning_does_not_slow_down_over_episodes() {
        // Statistical check: mean steps-to-terminal over the first ten
        // episodes vs the last ten of a 100-episode run, averaged over
        // seeds, on the non-overload scenarios.
        let tp = TrafficProfile::default();
        let cfg = EpisodeConfig::default();
        for occ in [[80.0, 20.0, 20.0], [80.0, 80.0, 20.0], [80.0, 80.0, 80.0]] {
            let mut first = 0.0;
            let mut last = 0.0;
            for seed in 1..=5u64 {
                let mut q = QTable::new(8, 27);
                let mut rng = Pcg64::seed_from_u64(seed);
                let mut steps = Vec::with_capacity(100);
                for _ in 0..100 {
                    let r = run_sarsa_episode(&scenario(occ), &tp, &mut q, &cfg, &mut rng).unwrap();
                    steps.push(r.steps_taken as f64);
                }
                first += steps[..10].iter().sum::<f64>() / 10.0;
                last += steps[90..].iter().sum::<f64>() / 10.0;
            }
            assert!(
                last <= first + 1e-9,
                "occ {:?}: mean steps rose from {} to {}",
                occ,
                first / 5.0,
                last / 5.0
            );
        }
    }

    #[test]
    fn fixed_episode_reports_full_link_occupation() {
        let s0 = scenario([80.0, 20.0, 20.0]);
        let result = run_fixed_episode(
            &s0,
            &TrafficProfile::default(),
            1.15,
            &EpisodeConfig::default(),
        )
        .unwrap();
        assert_eq!(result.final_state.rates, [40.0, 30.0, 30.0]);
        assert_eq!(result.final_state.link_occupation(), 100.0);
    }

    #[test]
    fn fixed_episode_overload_loses_only_on_first_queue() {
        let s0 = scenario([120.0, 20.0, 20.0]);
        let result = run_fixed_episode(
            &s0,
            &TrafficProfile::default(),
            1.15,
            &EpisodeConfig::default(),
        )
        .unwrap();
        assert!(result.final_state.loss[0] > 0.0);
        assert_eq!(result.final_state.loss[1], 0.0);
        assert_eq!(result.final_state.loss[2], 0.0);
    }

    #[test]
    fn fixed_episode_no_preload_no_loss() {
        let s0 = scenario([20.0, 20.0, 20.0]);
        let result = run_fixed_episode(
            &s0,
            &TrafficProfile::default(),
            1.15,
            &EpisodeConfig::default(),
        )
        .unwrap();
        assert_eq!(result.final_state.loss, [0.0; 3]);
    }

    #[test]
    fn sarsa_rejects_mis_sized_table() {
        let mut q = QTable::new(4, 4);
        let mut rng = Pcg64::seed_from_u64(1);
        let err = run_sarsa_episode(
            &scenario([80.0, 20.0, 20.0]),
            &TrafficProfile::default(),
            &mut q,
            &EpisodeConfig::default(),
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, OrchestratorError::QTableShape { .. }));
    }
}
