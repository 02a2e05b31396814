//! Command-line experiment runner: executes scenario suites, renders the
//! result tables from stored reports, and pretty-prints run traces.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use flushsim_core::config::{AllocatorConfig, ScenarioConfig};
use flushsim_core::pubsub::{read_jsonl, TraceEvent};
use flushsim_core::report::{render_csv, render_text, RunReport};
use flushsim_core::suite::run_suite;

#[derive(Parser)]
#[command(
    name = "flushsim",
    version,
    about = "Pub/sub aggregator bandwidth-allocation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AllocatorKind {
    Fixed,
    Sarsa,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenario configs and write reports, tables and traces.
    Run {
        /// Scenario config files (TOML).
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Output directory.
        #[arg(short, long)]
        out: PathBuf,
        /// Override the seed list of every scenario, e.g. --seeds 1,2,3.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Override the allocator of every scenario (defaults apply:
        /// factor 1.15 for fixed, canonical parameters for sarsa).
        #[arg(long)]
        allocator: Option<AllocatorKind>,
    },
    /// Re-render the result tables from stored run reports.
    Tables {
        /// Directory holding report JSON files (the suite's `reports/`).
        #[arg(long)]
        reports: PathBuf,
        /// Output directory for the rendered tables.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Pretty-print a run's message/step trace.
    Trace {
        /// A trace file written by `run` (line-delimited JSON).
        file: PathBuf,
        /// Print at most this many records.
        #[arg(long)]
        limit: Option<usize>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            configs,
            out,
            seeds,
            allocator,
        } => run(configs, &out, seeds, allocator),
        Command::Tables { reports, out } => tables(&reports, &out),
        Command::Trace { file, limit } => trace(&file, limit),
    }
}

fn run(
    config_paths: Vec<PathBuf>,
    out: &Path,
    seeds: Option<Vec<u64>>,
    allocator: Option<AllocatorKind>,
) -> Result<()> {
    let mut configs = Vec::with_capacity(config_paths.len());
    for path in &config_paths {
        let mut config = ScenarioConfig::load(path)
            .with_context(|| format!("loading scenario {}", path.display()))?;
        if let Some(seeds) = &seeds {
            config.seeds = seeds.clone();
        }
        match allocator {
            Some(AllocatorKind::Fixed) => config.allocator = AllocatorConfig::fixed_defaults(),
            Some(AllocatorKind::Sarsa) => config.allocator = AllocatorConfig::sarsa_defaults(),
            None => {}
        }
        configs.push(config);
    }

    let summary = run_suite(&configs, out).context("running suite")?;

    let refs: Vec<&RunReport> = summary.reports.iter().collect();
    println!("{}", render_text(&refs));
    println!(
        "{} scenario(s), {} trace file(s), output in {}",
        summary.reports.len(),
        summary.trace_files.len(),
        out.display()
    );

    if !summary.failures.is_empty() {
        eprintln!("{} run(s) failed:", summary.failures.len());
        for failure in &summary.failures {
            eprintln!(
                "  {} seed {}: {}",
                failure.scenario, failure.seed, failure.message
            );
        }
        bail!("{} run(s) failed", summary.failures.len());
    }
    Ok(())
}

fn tables(reports_dir: &Path, out: &Path) -> Result<()> {
    let mut paths: Vec<PathBuf> = fs::read_dir(reports_dir)
        .with_context(|| format!("reading {}", reports_dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no report JSON files in {}", reports_dir.display());
    }

    let mut reports = Vec::with_capacity(paths.len());
    for path in &paths {
        let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let report: RunReport = serde_json::from_reader(BufReader::new(file))
            .with_context(|| format!("parsing {}", path.display()))?;
        reports.push(report);
    }

    let mut groups: Vec<(String, Vec<&RunReport>)> = Vec::new();
    for report in &reports {
        match groups
            .iter_mut()
            .find(|(label, _)| *label == report.allocator)
        {
            Some((_, members)) => members.push(report),
            None => groups.push((report.allocator.clone(), vec![report])),
        }
    }

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (label, members) in &groups {
        let csv_path = out.join(format!("{label}.csv"));
        fs::write(&csv_path, render_csv(members))
            .with_context(|| format!("writing {}", csv_path.display()))?;
        let txt_path = out.join(format!("{label}.txt"));
        fs::write(&txt_path, render_text(members))
            .with_context(|| format!("writing {}", txt_path.display()))?;
        println!("wrote {} and {}", csv_path.display(), txt_path.display());
        println!("{}", render_text(members));
    }
    Ok(())
}

fn trace(file: &Path, limit: Option<usize>) -> Result<()> {
    let reader = BufReader::new(
        fs::File::open(file).with_context(|| format!("opening {}", file.display()))?,
    );
    let entries = read_jsonl(reader).with_context(|| format!("parsing {}", file.display()))?;
    let shown = limit.unwrap_or(entries.len()).min(entries.len());
    for entry in &entries[..shown] {
        let line = match &entry.event {
            TraceEvent::Subscribe { topic, qos } => format!("subscribe {topic:?} qos={qos:?}"),
            TraceEvent::Metadata { subscriber_counts, occupancies, .. } => format!(
                "metadata subscribers={subscriber_counts:?} occupancies={occupancies:?}"
            ),
            TraceEvent::Alarm { queue, occupancy, threshold } => {
                format!("alarm {queue:?} occupancy={occupancy:.2} threshold={threshold}")
            }
            TraceEvent::EpisodeStart { episode, state_index } => {
                format!("episode {episode} start (state {state_index})")
            }
            TraceEvent::BandwidthNotify { rates } => format!(
                "bandwidth T1={:.2} T2={:.2} T3={:.2} (link {:.2})",
                rates[0],
                rates[1],
                rates[2],
                rates.iter().sum::<f64>()
            ),
            TraceEvent::Publish { topic, volume } => {
                format!("publish {topic:?} volume={volume:.2}")
            }
            TraceEvent::Step { episode, step, state_index, action_index, reward, .. } => format!(
                "episode {episode} step {step}: state {state_index} action {action_index} reward {reward:+.2}"
            ),
            TraceEvent::EpisodeEnd { episode, steps, terminal } => {
                format!("episode {episode} end after {steps} step(s): {terminal:?}")
            }
        };
        println!("[tick {:>6}] {line}", entry.tick);
    }
    if shown < entries.len() {
        println!("... {} more record(s)", entries.len() - shown);
    }
    Ok(())
}
