//! Tabular and nested exports of run results.
//!
//! Per-episode CSV columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `episode` | episode index within its phase |
//! | `seed` | seed the episode was generated from |
//! | `policy` | `coor-plt`, `fp`, `rc`, `webster` or `fcfs-reservation` |
//! | `condition` | demand condition 1, 2 or 3 |
//! | `granularity` | coordination grid size |
//! | `steps` | simulated steps |
//! | `spawned` | vehicles that entered the formation zone |
//! | `exited` | vehicles that cleared the coordination zone, removed ones included |
//! | `removed` | exited vehicles that deadlock resolution moved to their exit lane |
//! | `in_network` | vehicles still driving at the end |
//! | `backlog` | arrivals still waiting for room at the entrance |
//! | `mean_travel_time` | s per exited vehicle |
//! | `mean_fuel` | mL per exited vehicle |
//! | `deadlocks` | deadlock events |
//! | `layer1_reward` | sum of platoon-size rewards and penalties |
//! | `layer1_decisions` | platoon-size decisions |
//! | `layer1_transitions` | completed platoon-size transitions |
//! | `layer2_reward` | sum of priority rewards |
//! | `layer2_decisions` | priority decisions |
//! | `layer2_transitions` | completed priority transitions |
//! | `modal_size` | most frequent commanded platoon size, empty if none |
//! | `size_histogram` | space-separated counts for sizes 1, 2, ... |
//! | `audited_steps` | steps checked for cell overlap |
//! | `safety_violations` | overlapping steps found |
//!
//! The JSON export is the full [`EpisodeMetrics`] list, including
//! per-vehicle travel times, fuel and deadlock events.

use std::path::Path;

use platoon_core::config::PolicyKind;
use platoon_core::metrics::EpisodeMetrics;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{io_at, HarnessError, Result};

/// A record type with a fixed CSV header.
pub trait Row: Serialize + DeserializeOwned {
    const HEADER: &'static [&'static str];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub episode: u64,
    pub seed: u64,
    pub policy: PolicyKind,
    pub condition: u8,
    pub granularity: usize,
    pub steps: u64,
    pub spawned: u64,
    pub exited: u64,
    pub removed: u64,
    pub in_network: u64,
    pub backlog: u64,
    pub mean_travel_time: f64,
    pub mean_fuel: f64,
    pub deadlocks: u64,
    pub layer1_reward: f64,
    pub layer1_decisions: u64,
    pub layer1_transitions: u64,
    pub layer2_reward: f64,
    pub layer2_decisions: u64,
    pub layer2_transitions: u64,
    pub modal_size: Option<usize>,
    pub size_histogram: String,
    pub audited_steps: u64,
    pub safety_violations: u64,
}

impl Row for EpisodeRow {
    const HEADER: &'static [&'static str] = &[
        "episode",
        "seed",
        "policy",
        "condition",
        "granularity",
        "steps",
        "spawned",
        "exited",
        "removed",
        "in_network",
        "backlog",
        "mean_travel_time",
        "mean_fuel",
        "deadlocks",
        "layer1_reward",
        "layer1_decisions",
        "layer1_transitions",
        "layer2_reward",
        "layer2_decisions",
        "layer2_transitions",
        "modal_size",
        "size_histogram",
        "audited_steps",
        "safety_violations",
    ];
}

impl From<&EpisodeMetrics> for EpisodeRow {
    fn from(m: &EpisodeMetrics) -> Self {
        Self {
            episode: m.episode,
            seed: m.seed,
            policy: m.policy,
            condition: m.condition,
            granularity: m.granularity,
            steps: m.steps,
            spawned: m.spawned,
            exited: m.exited,
            removed: m.removed,
            in_network: m.in_network,
            backlog: m.backlog,
            mean_travel_time: m.mean_travel_time,
            mean_fuel: m.mean_fuel,
            deadlocks: m.deadlocks,
            layer1_reward: m.layer1_reward,
            layer1_decisions: m.layer1_decisions,
            layer1_transitions: m.layer1_transitions,
            layer2_reward: m.layer2_reward,
            layer2_decisions: m.layer2_decisions,
            layer2_transitions: m.layer2_transitions,
            modal_size: m.modal_size(),
            size_histogram: m.size_histogram.iter().map(u64::to_string).collect::<Vec<_>>().join(" "),
            audited_steps: m.audited_steps,
            safety_violations: m.safety_violations,
        }
    }
}

impl EpisodeRow {
    /// Counts per platoon size parsed back from `size_histogram`.
    pub fn histogram(&self) -> Result<Vec<u64>> {
        self.size_histogram
            .split_whitespace()
            .map(|c| c.parse().map_err(|_| HarnessError::Malformed(format!("histogram entry {c:?}"))))
            .collect()
    }
}

/// Rows as CSV text; an empty slice gives the header line alone.
pub fn csv_string<R: Row>(rows: &[R]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(R::HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Io { path: "<memory>".into(), source: e.into_error() })?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn parse_csv<R: Row>(text: &str) -> Result<Vec<R>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != R::HEADER {
        return Err(HarnessError::Malformed(format!("unexpected csv header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}

pub fn write_csv<R: Row>(path: &Path, rows: &[R]) -> Result<()> {
    std::fs::write(path, csv_string(rows)?).map_err(io_at(path))
}

pub fn read_csv<R: Row>(path: &Path) -> Result<Vec<R>> {
    parse_csv(&std::fs::read_to_string(path).map_err(io_at(path))?)
}

pub fn episode_rows(log: &[EpisodeMetrics]) -> Vec<EpisodeRow> {
    log.iter().map(EpisodeRow::from).collect()
}

pub fn write_metrics_csv(path: &Path, log: &[EpisodeMetrics]) -> Result<()> {
    write_csv(path, &episode_rows(log))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_at(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(io_at(path))?;
    Ok(serde_json::from_str(&text)?)
}
