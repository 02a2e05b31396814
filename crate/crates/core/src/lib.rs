//! Deterministic simulator of a pub/sub IoT aggregator whose per-queue
//! flushing bandwidth over one constrained link is reallocated either by a
//! fixed rule or by a tabular SARSA agent.
//!
//! The aggregator buffers three prioritized topics (B1 > B2 > B3, QoS
//! classes b0/b1/b2). When a buffer fills past its occupancy threshold it
//! alarms the orchestrator, which reassigns the per-queue flushing rates
//! under the link constraint ΣTᵢ ≤ capacity. The experiment harness runs
//! seeded scenario suites, aggregates results with 95% confidence
//! intervals, and emits result tables plus full message/step traces.
//!
//! All randomness flows through one PCG-64 generator per run, seeded from
//! the scenario configuration, so every run is reproducible bit for bit.

pub mod config;
pub mod env;
pub mod orchestrator;
pub mod pubsub;
pub mod report;
pub mod rl;
pub mod stats;
pub mod suite;

pub use config::{AllocatorConfig, ConfigError, ScenarioConfig};
pub use env::{
    apply_action, compute_reward, constraint_check, encode_state, priority_satisfied,
    simulate_ticks, Action, AggregatorState, EnvState, QosClass, QueueFlag, QueueId, RateChange,
    RewardWeights, TrafficProfile,
};
pub use orchestrator::{
    check_terminal, fixed_rule_allocate, run_fixed_episode, run_sarsa_episode, EpisodeConfig,
    EpisodeResult, OrchestratorError, StepRecord, TerminalReason,
};
pub use pubsub::{
    AlarmEvent, Message, MessageBus, MessagePayload, PubSubError, TraceEntry, TraceEvent,
};
pub use report::{render_csv, render_text, RunReport, SeedOutcome};
pub use rl::{QTable, RlError, RlParams, Transition};
pub use stats::{aggregate, Aggregate};
pub use suite::{
    canonical_fixed_suite, canonical_sarsa_suite, run_suite, RunFailure, SuiteError, SuiteSummary,
};
