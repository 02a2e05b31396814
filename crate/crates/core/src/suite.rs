//! The experiment runner: executes every (scenario × seed) pair
//! deterministically, records the pub/sub message trace alongside the
//! episode steps, and writes reports, result tables and a run manifest.
//!
//! Output layout under the chosen directory:
//!
//! ```text
//! manifest.json                    scenarios, config hashes, seeds
//! reports/<slug>__<allocator>.json full per-seed results
//! tables/<allocator>.csv           five-column result table
//! tables/<allocator>.txt           readable rendering of the same table
//! traces/<slug>__<allocator>__seed<N>.jsonl   one line-delimited trace per run
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{AllocatorConfig, ScenarioConfig};
use crate::env::{AggregatorState, QueueId};
use crate::orchestrator::{
    run_fixed_episode, run_sarsa_episode, EpisodeConfig, EpisodeResult, OrchestratorError,
};
use crate::pubsub::{MessageBus, TraceEvent};
use crate::report::{render_csv, render_text, RunReport, SeedOutcome};
use crate::rl::QTable;

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot serialize {what}: {source}")]
    Serialize {
        what: &'static str,
        source: serde_json::Error,
    },
}

/// One failed run, kept so sibling runs can still complete.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunFailure {
    pub scenario: String,
    pub seed: u64,
    pub message: String,
}

/// Everything a suite execution produced.
#[derive(Debug)]
pub struct SuiteSummary {
    pub reports: Vec<RunReport>,
    pub failures: Vec<RunFailure>,
    pub table_files: Vec<PathBuf>,
    pub trace_files: Vec<PathBuf>,
    pub report_files: Vec<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    generator: String,
    scenarios: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    scenario: String,
    slug: String,
    allocator: String,
    config_sha256: String,
    seeds: Vec<u64>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), SuiteError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| SuiteError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| SuiteError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Run one seeded scenario: the pub/sub setup, then one allocation episode
/// per configured episode count (Q-table fresh per run, persistent across
/// the run's episodes), with every message and step appended to the bus.
fn run_seed(
    config: &ScenarioConfig,
    seed: u64,
    bus: &mut MessageBus,
) -> Result<SeedOutcome, OrchestratorError> {
    let mut tick = 0u64;

    for queue in QueueId::ALL {
        for _ in 0..config.subscribers[queue.slot()] {
            bus.subscribe(tick, queue, queue.qos_class())
                .expect("subscription matches the topic's fixed QoS class");
        }
    }
    bus.send_metadata(tick, config.initial_occupancies);

    let initial = AggregatorState::new(config.initial_occupancies, config.initial_rates);

    match &config.allocator {
        AllocatorConfig::FixedRule { factor } => {
            let episode_cfg = EpisodeConfig {
                threshold: config.threshold,
                ..Default::default()
            };
            bus.emit_alarm(tick, &initial, config.threshold);
            let result = run_fixed_episode(&initial, &config.traffic, *factor, &episode_cfg)?;
            bus.notify_bandwidth(tick, result.final_state.rates)
                .expect("fixed rule always sums to the link capacity");
            tick += u64::from(episode_cfg.max_attempts * config.traffic.ticks_per_step);
            publish_drained(bus, tick, &result);
            Ok(SeedOutcome {
                seed,
                episode_steps: vec![result.steps_taken],
                result,
            })
        }
        AllocatorConfig::Sarsa {
            params,
            episodes,
            max_attempts,
            step_fraction,
        } => {
            let episode_cfg = EpisodeConfig {
                max_attempts: *max_attempts,
                threshold: config.threshold,
                step_fraction: *step_fraction,
                rl: *params,
                reward: config.reward,
            };
            let mut rng = Pcg64::seed_from_u64(seed);
            let mut q = QTable::new(8, 27);
            let mut episode_steps = Vec::with_capacity(*episodes as usize);
            let mut last: Option<EpisodeResult> = None;

            for episode in 1..=*episodes {
                let alarms = bus.emit_alarm(tick, &initial, config.threshold);
                if alarms.is_empty() {
                    // Nothing breached the threshold: no trigger, no episode.
                    // A zero-attempt budget makes the episode loop report the
                    // untouched initial state through its step-0 terminal check.
                    let no_trigger = EpisodeConfig {
                        max_attempts: 0,
                        ..episode_cfg.clone()
                    };
                    let result = run_sarsa_episode(
                        &initial,
                        &config.traffic,
                        &mut q,
                        &no_trigger,
                        &mut rng,
                    )?;
                    episode_steps.push(result.steps_taken);
                    last = Some(result);
                    break;
                }

                bus.record(
                    tick,
                    TraceEvent::EpisodeStart {
                        episode,
                        state_index: crate::env::encode_state(&initial, config.threshold).index(),
                    },
                );
                let result =
                    run_sarsa_episode(&initial, &config.traffic, &mut q, &episode_cfg, &mut rng)?;
                tick = record_steps(bus, tick, &result, episode, config.traffic.ticks_per_step);
                bus.record(
                    tick,
                    TraceEvent::EpisodeEnd {
                        episode,
                        steps: result.steps_taken,
                        terminal: result.terminal_reason,
                    },
                );
                episode_steps.push(result.steps_taken);
                last = Some(result);
                tick += 1;
            }

            let result = last.expect("episodes >= 1");
            Ok(SeedOutcome {
                seed,
                episode_steps,
                result,
            })
        }
    }
}

/// Append the per-step messages of one episode: the bandwidth grant for
/// every accepted allocation, the published volume drained during the
/// step's ticks, and the step marker itself.
fn record_steps(
    bus: &mut MessageBus,
    start_tick: u64,
    result: &EpisodeResult,
    episode: u32,
    ticks_per_step: u32,
) -> u64 {
    let mut tick = start_tick;
    for record in &result.trace {
        if record.accepted {
            bus.notify_bandwidth(tick, record.rates)
                .expect("accepted steps satisfy the link constraint");
            tick += u64::from(ticks_per_step);
            for queue in QueueId::ALL {
                let volume = record.drained[queue.slot()];
                if volume > 0.0 {
                    bus.publish(tick, queue, volume);
                }
            }
        }
        bus.record(
            tick,
            TraceEvent::Step {
                episode,
                step: record.step,
                state_index: record.state_index,
                action_index: record.action_index,
                reward: record.reward,
                rates: record.rates,
            },
        );
    }
    tick
}

fn publish_drained(bus: &mut MessageBus, tick: u64, result: &EpisodeResult) {
    for record in &result.trace {
        for queue in QueueId::ALL {
            let volume = record.drained[queue.slot()];
            if volume > 0.0 {
                bus.publish(tick, queue, volume);
            }
        }
    }
}

/// Execute every (scenario × seed) pair, write traces, per-scenario
/// reports, grouped result tables and the manifest. Per-run errors are
/// collected into the summary instead of aborting sibling runs.
pub fn run_suite(configs: &[ScenarioConfig], out_dir: &Path) -> Result<SuiteSummary, SuiteError> {
    let mut summary = SuiteSummary {
        reports: Vec::new(),
        failures: Vec::new(),
        table_files: Vec::new(),
        trace_files: Vec::new(),
        report_files: Vec::new(),
    };
    let mut manifest = Manifest {
        generator: format!("flushsim {}", env!("CARGO_PKG_VERSION")),
        scenarios: Vec::new(),
    };

    for config in configs {
        let slug = config.slug();
        let allocator = config.allocator.label();
        let config_json = serde_json::to_vec(config).map_err(|source| SuiteError::Serialize {
            what: "scenario config",
            source,
        })?;
        manifest.scenarios.push(ManifestEntry {
            scenario: config.name.clone(),
            slug: slug.clone(),
            allocator: allocator.clone(),
            config_sha256: sha256_hex(&config_json),
            seeds: config.seeds.clone(),
        });

        let mut outcomes = Vec::new();
        for &seed in &config.seeds {
            let mut bus = MessageBus::new();
            match run_seed(config, seed, &mut bus) {
                Ok(outcome) => {
                    let trace_path = out_dir
                        .join("traces")
                        .join(format!("{slug}__{allocator}__seed{seed}.jsonl"));
                    let mut buffer = Vec::new();
                    bus.write_jsonl(&mut buffer)
                        .map_err(|source| SuiteError::Io {
                            path: trace_path.clone(),
                            source,
                        })?;
                    write_file(&trace_path, &buffer)?;
                    summary.trace_files.push(trace_path);
                    outcomes.push(outcome);
                }
                Err(err) => summary.failures.push(RunFailure {
                    scenario: config.name.clone(),
                    seed,
                    message: err.to_string(),
                }),
            }
        }

        if !outcomes.is_empty() {
            let report = RunReport::new(config, outcomes);
            let report_path = out_dir
                .join("reports")
                .join(format!("{slug}__{allocator}.json"));
            let json =
                serde_json::to_vec_pretty(&report).map_err(|source| SuiteError::Serialize {
                    what: "run report",
                    source,
                })?;
            write_file(&report_path, &json)?;
            summary.report_files.push(report_path);
            summary.reports.push(report);
        }
    }

    // One table per allocator label, in first-seen order.
    let mut groups: Vec<(String, Vec<&RunReport>)> = Vec::new();
    for report in &summary.reports {
        match groups
            .iter_mut()
            .find(|(label, _)| *label == report.allocator)
        {
            Some((_, members)) => members.push(report),
            None => groups.push((report.allocator.clone(), vec![report])),
        }
    }
    for (label, members) in &groups {
        let csv_path = out_dir.join("tables").join(format!("{label}.csv"));
        write_file(&csv_path, render_csv(members).as_bytes())?;
        summary.table_files.push(csv_path);
        let txt_path = out_dir.join("tables").join(format!("{label}.txt"));
        write_file(&txt_path, render_text(members).as_bytes())?;
        summary.table_files.push(txt_path);
    }

    let manifest_path = out_dir.join("manifest.json");
    let manifest_json =
        serde_json::to_vec_pretty(&manifest).map_err(|source| SuiteError::Serialize {
            what: "manifest",
            source,
        })?;
    let mut manifest_bytes = manifest_json;
    manifest_bytes.push(b'\n');
    let mut file = fs::File::create(&manifest_path).map_err(|source| SuiteError::Io {
        path: manifest_path.clone(),
        source,
    })?;
    file.write_all(&manifest_bytes)
        .map_err(|source| SuiteError::Io {
            path: manifest_path.clone(),
            source,
        })?;

    Ok(summary)
}

/// The four canonical scenario preloads under the SARSA allocator.
pub fn canonical_sarsa_suite() -> Vec<ScenarioConfig> {
    ["AL,BL,BL", "AL,AL,BL", "AL,AL,AL", "+AL,BL,BL"]
        .iter()
        .map(|name| ScenarioConfig::canonical_sarsa(name).expect("canonical pattern"))
        .collect()
}

/// The four canonical preloads under the fixed rule, one suite per factor.
pub fn canonical_fixed_suite(factor: f64) -> Vec<ScenarioConfig> {
    ["AL,BL,BL", "AL,AL,BL", "AL,AL,AL", "+AL,BL,BL"]
        .iter()
        .map(|name| ScenarioConfig::canonical_fixed(name, factor).expect("canonical pattern"))
        .collect()
}
