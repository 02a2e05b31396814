//! Run reports and result tables.
//!
//! Each scenario yields one [`RunReport`] holding the per-seed outcomes and
//! mean ± 95% half-width aggregates. Reports render into the five-column
//! result tables (initial queue state, final queue state, final rates,
//! packet loss, link occupation) as CSV plus a plain-text view; values are
//! rounded half up to integers for presentation, and a row's link
//! occupation is always the sum of its displayed rates.

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::env::QUEUE_COUNT;
use crate::orchestrator::EpisodeResult;
use crate::stats::{aggregate, Aggregate};

/// Everything recorded for one seeded run: the steps each episode took and
/// the final episode's full result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    /// Steps taken by every episode of the run, in order.
    pub episode_steps: Vec<u32>,
    /// The last episode of the run.
    pub result: EpisodeResult,
}

impl SeedOutcome {
    pub fn link_occupation(&self) -> f64 {
        self.result.final_state.link_occupation()
    }
}

/// Mean ± half-width per reported metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub occupancy: [Aggregate; QUEUE_COUNT],
    pub rates: [Aggregate; QUEUE_COUNT],
    pub loss: [Aggregate; QUEUE_COUNT],
    pub link_occupation: Aggregate,
}

/// All results for one scenario across its seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub slug: String,
    pub allocator: String,
    pub initial_occupancies: [f64; QUEUE_COUNT],
    pub threshold: f64,
    pub seeds: Vec<u64>,
    pub runs: Vec<SeedOutcome>,
    pub aggregates: Aggregates,
}

impl RunReport {
    pub fn new(config: &ScenarioConfig, runs: Vec<SeedOutcome>) -> Self {
        let per_queue = |metric: &dyn Fn(&SeedOutcome, usize) -> f64| -> [Aggregate; QUEUE_COUNT] {
            std::array::from_fn(|i| {
                let samples: Vec<f64> = runs.iter().map(|run| metric(run, i)).collect();
                aggregate(&samples).expect("at least one run per scenario")
            })
        };
        let occupancy = per_queue(&|run, i| run.result.final_state.occupancy[i]);
        let rates = per_queue(&|run, i| run.result.final_state.rates[i]);
        let loss = per_queue(&|run, i| run.result.final_state.loss[i]);
        let link_samples: Vec<f64> = runs.iter().map(SeedOutcome::link_occupation).collect();
        let link_occupation = aggregate(&link_samples).expect("at least one run per scenario");

        RunReport {
            scenario: config.name.clone(),
            slug: config.slug(),
            allocator: config.allocator.label(),
            initial_occupancies: config.initial_occupancies,
            threshold: config.threshold,
            seeds: config.seeds.clone(),
            runs,
            aggregates: Aggregates {
                occupancy,
                rates,
                loss,
                link_occupation,
            },
        }
    }

    /// Flag pattern describing the preload, e.g. `+AL,BL,BL`.
    pub fn initial_qs_label(&self) -> String {
        self.initial_occupancies
            .iter()
            .map(|&occ| {
                if occ > 100.0 {
                    "+AL"
                } else if occ > self.threshold {
                    "AL"
                } else {
                    "BL"
                }
            })
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Round half away from zero to an integer; for the non-negative values in
/// the tables this is exactly round-half-up.
pub fn round_half_up(value: f64) -> i64 {
    value.round() as i64
}

fn triple(values: &[Aggregate; QUEUE_COUNT]) -> String {
    let v: Vec<String> = values
        .iter()
        .map(|a| round_half_up(a.mean).to_string())
        .collect();
    format!("({})", v.join(","))
}

/// Displayed link occupation: the sum of the displayed (rounded) rates, so
/// every row stays internally consistent.
fn displayed_link_occupation(report: &RunReport) -> i64 {
    report
        .aggregates
        .rates
        .iter()
        .map(|a| round_half_up(a.mean))
        .sum()
}

pub const TABLE_COLUMNS: [&str; 5] = [
    "Initial QS",
    "Final QS",
    "Final TR",
    "Packet Loss",
    "Link Occupation",
];

/// Render reports as a CSV table with exactly the five result columns, one
/// row per scenario. An empty report list yields a header-only file.
pub fn render_csv(reports: &[&RunReport]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(TABLE_COLUMNS).expect("in-memory write");
    for report in reports {
        writer
            .write_record([
                report.initial_qs_label(),
                triple(&report.aggregates.occupancy),
                triple(&report.aggregates.rates),
                triple(&report.aggregates.loss),
                displayed_link_occupation(report).to_string(),
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

/// Plain-text rendering of the same table, with the 95% half-widths spelled
/// out where they are non-zero.
pub fn render_text(reports: &[&RunReport]) -> String {
    let mut out = String::new();
    let widths = [12, 18, 18, 18, 16];
    for (title, width) in TABLE_COLUMNS.iter().zip(widths) {
        out.push_str(&format!("{title:<width$}"));
    }
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>()));
    out.push('\n');
    for report in reports {
        let row = [
            report.initial_qs_label(),
            triple(&report.aggregates.occupancy),
            triple(&report.aggregates.rates),
            triple(&report.aggregates.loss),
            displayed_link_occupation(report).to_string(),
        ];
        for (cell, width) in row.iter().zip(widths) {
            out.push_str(&format!("{cell:<width$}"));
        }
        out.push('\n');
        let hw = report
            .aggregates
            .link_occupation
            .half_width
            .filter(|w| *w > 0.005);
        if let Some(hw) = hw {
            out.push_str(&format!(
                "{:<12}link occupation {:.2} ± {:.2} (95% CI over {} runs)\n",
                "",
                report.aggregates.link_occupation.mean,
                hw,
                report.runs.len(),
            ));
        }
    }
    out
}
