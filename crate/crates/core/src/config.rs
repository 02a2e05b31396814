//! Scenario configuration: a documented TOML schema with every field
//! optional except the scenario name, defaults matching the canonical
//! evaluation setup, and field-level validation.
//!
//! ```toml
//! name = "AL,BL,BL"              # also fixes the preload when it is a
//!                                # flag pattern: BL=20, AL=80, +AL=120
//! # initial_occupancies = [80, 20, 20]
//! # initial_rates = [35, 25, 15]
//! # threshold = 50.0
//! # seeds = [1, 2, 3]            # default 1..=10
//! # subscribers = [1, 1, 1]
//!
//! [allocator]
//! kind = "sarsa"                 # or "fixed"
//! # factor = 1.15                # fixed only
//! # alpha = 0.2                  # sarsa only, with gamma, epsilon,
//! # episodes = 1                 # episodes, max_attempts, step_fraction
//!
//! [traffic]
//! # inflow = [0, 0, 0]
//! # drain_coeff = 0.1
//! # ticks_per_step = 5
//!
//! [reward]
//! # queue_weights = [3, 2, 1]
//! # violation_penalty = 10
//! # loss_penalty = 1
//! # success_bonus = 10
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{RewardWeights, TrafficProfile, LINK_CAPACITY, QUEUE_COUNT};
use crate::rl::RlParams;

pub const DEFAULT_INITIAL_RATES: [f64; QUEUE_COUNT] = [35.0, 25.0, 15.0];
pub const DEFAULT_THRESHOLD: f64 = 50.0;
pub const DEFAULT_STEP_FRACTION: f64 = 0.10;
pub const DEFAULT_MAX_ATTEMPTS: u32 = 400;
pub const DEFAULT_EPISODES: u32 = 1;
pub const DEFAULT_FIXED_FACTOR: f64 = 1.15;

/// Occupancy percentages behind the flag-pattern legend.
pub const OCCUPANCY_BELOW: f64 = 20.0;
pub const OCCUPANCY_ABOVE: f64 = 80.0;
pub const OCCUPANCY_OVERLOAD: f64 = 120.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

/// Which allocator drives a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AllocatorConfig {
    /// One-shot fixed rule scaled by `factor`.
    FixedRule { factor: f64 },
    /// The learning agent: `episodes` allocation loops per seeded run with
    /// the Q-table persisting across them (tabula rasa per run).
    Sarsa {
        params: RlParams,
        episodes: u32,
        max_attempts: u32,
        step_fraction: f64,
    },
}

impl AllocatorConfig {
    pub fn sarsa_defaults() -> Self {
        AllocatorConfig::Sarsa {
            params: RlParams::default(),
            episodes: DEFAULT_EPISODES,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            step_fraction: DEFAULT_STEP_FRACTION,
        }
    }

    pub fn fixed_defaults() -> Self {
        AllocatorConfig::FixedRule {
            factor: DEFAULT_FIXED_FACTOR,
        }
    }

    /// Short label used in file names and table headers, e.g. `sarsa` or
    /// `fixed_1.15`.
    pub fn label(&self) -> String {
        match self {
            AllocatorConfig::FixedRule { factor } => format!("fixed_{factor}"),
            AllocatorConfig::Sarsa { .. } => "sarsa".to_string(),
        }
    }
}

/// A fully validated scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub initial_occupancies: [f64; QUEUE_COUNT],
    pub initial_rates: [f64; QUEUE_COUNT],
    pub threshold: f64,
    pub seeds: Vec<u64>,
    /// Simulated consumers subscribing per topic at run start.
    pub subscribers: [u32; QUEUE_COUNT],
    pub allocator: AllocatorConfig,
    pub traffic: TrafficProfile,
    pub reward: RewardWeights,
}

impl ScenarioConfig {
    /// Load and validate a scenario from a TOML file, filling defaults for
    /// everything the file leaves out.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let raw: RawScenarioConfig =
            toml::from_str(&text).map_err(|source| ConfigError::Parse {
                path: path.to_path_buf(),
                source: Box::new(source),
            })?;
        raw.build()
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawScenarioConfig = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: PathBuf::from("<inline>"),
            source: Box::new(source),
        })?;
        raw.build()
    }

    /// A canonical SARSA scenario named by its flag pattern, e.g.
    /// `"AL,BL,BL"`, with every parameter at its default.
    pub fn canonical_sarsa(name: &str) -> Result<Self, ConfigError> {
        RawScenarioConfig {
            name: name.to_string(),
            ..Default::default()
        }
        .build()
    }

    /// A canonical fixed-rule scenario with the given adjustment factor.
    pub fn canonical_fixed(name: &str, factor: f64) -> Result<Self, ConfigError> {
        RawScenarioConfig {
            name: name.to_string(),
            allocator: Some(RawAllocator {
                kind: "fixed".into(),
                factor: Some(factor),
                ..Default::default()
            }),
            ..Default::default()
        }
        .build()
    }

    /// File-name friendly form of the scenario name: `+AL,BL,BL` becomes
    /// `pal-bl-bl`.
    pub fn slug(&self) -> String {
        slugify(&self.name)
    }
}

pub(crate) fn slugify(name: &str) -> String {
    let mut slug = String::with_capacity(name.len());
    for ch in name.chars() {
        match ch {
            '+' => slug.push('p'),
            ',' | ' ' | '/' | '\\' | ':' => {
                if !slug.ends_with('-') && !slug.is_empty() {
                    slug.push('-');
                }
            }
            c if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' => {
                slug.push(c.to_ascii_lowercase())
            }
            _ => {}
        }
    }
    slug.trim_matches('-').to_string()
}

/// Parse a scenario name like `"AL,BL,BL"` or `"+AL,BL,BL"` into the
/// preload occupancies it denotes: BL = 20%, AL = 80%, +AL = 120%.
pub fn occupancies_from_pattern(name: &str) -> Option<[f64; QUEUE_COUNT]> {
    let parts: Vec<&str> = name.split(',').map(str::trim).collect();
    if parts.len() != QUEUE_COUNT {
        return None;
    }
    let mut occ = [0.0; QUEUE_COUNT];
    for (slot, part) in parts.iter().enumerate() {
        occ[slot] = match part.to_ascii_uppercase().as_str() {
            "BL" => OCCUPANCY_BELOW,
            "AL" => OCCUPANCY_ABOVE,
            "+AL" => OCCUPANCY_OVERLOAD,
            _ => return None,
        };
    }
    Some(occ)
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenarioConfig {
    name: String,
    initial_occupancies: Option<[f64; QUEUE_COUNT]>,
    initial_rates: Option<[f64; QUEUE_COUNT]>,
    threshold: Option<f64>,
    seeds: Option<Vec<u64>>,
    subscribers: Option<[u32; QUEUE_COUNT]>,
    allocator: Option<RawAllocator>,
    traffic: Option<RawTraffic>,
    reward: Option<RawReward>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAllocator {
    kind: String,
    factor: Option<f64>,
    alpha: Option<f64>,
    gamma: Option<f64>,
    epsilon: Option<f64>,
    episodes: Option<u32>,
    max_attempts: Option<u32>,
    step_fraction: Option<f64>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTraffic {
    inflow: Option<[f64; QUEUE_COUNT]>,
    drain_coeff: Option<f64>,
    ticks_per_step: Option<u32>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReward {
    queue_weights: Option<[f64; QUEUE_COUNT]>,
    violation_penalty: Option<f64>,
    loss_penalty: Option<f64>,
    success_bonus: Option<f64>,
}

impl RawScenarioConfig {
    fn build(self) -> Result<ScenarioConfig, ConfigError> {
        if self.name.trim().is_empty() {
            return Err(invalid("name", "must not be empty"));
        }

        let initial_occupancies = match self.initial_occupancies {
            Some(occ) => occ,
            None => occupancies_from_pattern(&self.name).ok_or_else(|| {
                invalid(
                    "initial_occupancies",
                    format!(
                        "missing, and scenario name {:?} is not a flag pattern like \"AL,BL,BL\"",
                        self.name
                    ),
                )
            })?,
        };
        if initial_occupancies
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(invalid(
                "initial_occupancies",
                "entries must be non-negative",
            ));
        }

        let initial_rates = self.initial_rates.unwrap_or(DEFAULT_INITIAL_RATES);
        if initial_rates.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid("initial_rates", "entries must be non-negative"));
        }
        let rate_sum: f64 = initial_rates.iter().sum();
        if rate_sum > LINK_CAPACITY {
            return Err(invalid(
                "initial_rates",
                format!("sum {rate_sum} exceeds the link capacity {LINK_CAPACITY}"),
            ));
        }

        let threshold = self.threshold.unwrap_or(DEFAULT_THRESHOLD);
        if !threshold.is_finite() || threshold <= 0.0 || threshold >= 100.0 {
            return Err(invalid(
                "threshold",
                format!("{threshold} outside (0, 100)"),
            ));
        }

        let seeds = match self.seeds {
            Some(seeds) if !seeds.is_empty() => seeds,
            _ => (1..=10).collect(),
        };
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("seeds", "must not contain duplicates"));
        }

        let subscribers = self.subscribers.unwrap_or([1; QUEUE_COUNT]);

        let allocator = match self.allocator {
            None => AllocatorConfig::sarsa_defaults(),
            Some(raw) => raw.build()?,
        };

        let traffic = match self.traffic {
            None => TrafficProfile::default(),
            Some(raw) => {
                let defaults = TrafficProfile::default();
                let profile = TrafficProfile {
                    inflow: raw.inflow.unwrap_or(defaults.inflow),
                    drain_coeff: raw.drain_coeff.unwrap_or(defaults.drain_coeff),
                    ticks_per_step: raw.ticks_per_step.unwrap_or(defaults.ticks_per_step),
                };
                profile
                    .validate()
                    .map_err(|message| invalid("traffic", message))?;
                profile
            }
        };

        let reward = match self.reward {
            None => RewardWeights::default(),
            Some(raw) => {
                let defaults = RewardWeights::default();
                let weights = RewardWeights {
                    queue_weights: raw.queue_weights.unwrap_or(defaults.queue_weights),
                    violation_penalty: raw.violation_penalty.unwrap_or(defaults.violation_penalty),
                    loss_penalty: raw.loss_penalty.unwrap_or(defaults.loss_penalty),
                    success_bonus: raw.success_bonus.unwrap_or(defaults.success_bonus),
                };
                for (field, value) in [
                    ("reward.queue_weights", weights.queue_weights[0]),
                    ("reward.queue_weights", weights.queue_weights[1]),
                    ("reward.queue_weights", weights.queue_weights[2]),
                    ("reward.violation_penalty", weights.violation_penalty),
                    ("reward.loss_penalty", weights.loss_penalty),
                    ("reward.success_bonus", weights.success_bonus),
                ] {
                    if !value.is_finite() || value < 0.0 {
                        return Err(invalid(field, format!("{value} must be non-negative")));
                    }
                }
                weights
            }
        };

        Ok(ScenarioConfig {
            name: self.name,
            initial_occupancies,
            initial_rates,
            threshold,
            seeds,
            subscribers,
            allocator,
            traffic,
            reward,
        })
    }
}

impl RawAllocator {
    fn build(self) -> Result<AllocatorConfig, ConfigError> {
        match self.kind.as_str() {
            "fixed" | "fixed_rule" => {
                for (name, set) in [
                    ("alpha", self.alpha.is_some()),
                    ("gamma", self.gamma.is_some()),
                    ("epsilon", self.epsilon.is_some()),
                    ("episodes", self.episodes.is_some()),
                    ("max_attempts", self.max_attempts.is_some()),
                    ("step_fraction", self.step_fraction.is_some()),
                ] {
                    if set {
                        return Err(invalid(
                            &format!("allocator.{name}"),
                            "not applicable to the fixed-rule allocator",
                        ));
                    }
                }
                let factor = self.factor.unwrap_or(DEFAULT_FIXED_FACTOR);
                if !factor.is_finite() || factor <= 0.0 {
                    return Err(invalid(
                        "allocator.factor",
                        format!("{factor} must be positive"),
                    ));
                }
                Ok(AllocatorConfig::FixedRule { factor })
            }
            "sarsa" => {
                if self.factor.is_some() {
                    return Err(invalid(
                        "allocator.factor",
                        "not applicable to the SARSA allocator",
                    ));
                }
                let defaults = RlParams::default();
                let params = RlParams::new(
                    self.alpha.unwrap_or(defaults.alpha()),
                    self.gamma.unwrap_or(defaults.gamma()),
                    self.epsilon.unwrap_or(defaults.epsilon()),
                )
                .map_err(|e| invalid("allocator", e.to_string()))?;
                let episodes = self.episodes.unwrap_or(DEFAULT_EPISODES);
                if episodes < 1 {
                    return Err(invalid("allocator.episodes", "must be at least 1"));
                }
                let max_attempts = self.max_attempts.unwrap_or(DEFAULT_MAX_ATTEMPTS);
                if max_attempts < 1 {
                    return Err(invalid("allocator.max_attempts", "must be at least 1"));
                }
                let step_fraction = self.step_fraction.unwrap_or(DEFAULT_STEP_FRACTION);
                if !step_fraction.is_finite() || step_fraction <= 0.0 || step_fraction >= 1.0 {
                    return Err(invalid(
                        "allocator.step_fraction",
                        format!("{step_fraction} outside (0, 1)"),
                    ));
                }
                Ok(AllocatorConfig::Sarsa {
                    params,
                    episodes,
                    max_attempts,
                    step_fraction,
                })
            }
            other => Err(invalid(
                "allocator.kind",
                format!("unknown allocator {other:?}, expected \"fixed\" or \"sarsa\""),
            )),
        }
    }
}
