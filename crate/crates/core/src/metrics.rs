//! Per-episode outcome record.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::PolicyKind;
use crate::deadlock::DeadlockEvent;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: u64,
    pub seed: u64,
    pub policy: PolicyKind,
    pub condition: u8,
    pub granularity: usize,
    pub steps: u64,
    /// Vehicles that entered the formation zone.
    pub spawned: u64,
    /// Vehicles whose tail left the coordination zone, including those
    /// moved to their exit lane by deadlock resolution.
    pub exited: u64,
    /// Exited vehicles that deadlock resolution moved out of the zone; their
    /// travel time and fuel run up to the removal.
    pub removed: u64,
    /// Vehicles still in the network at the end.
    pub in_network: u64,
    /// Arrivals still waiting for room at the entrance.
    pub backlog: u64,
    /// Mean entry-to-exit time over exited vehicles, s.
    pub mean_travel_time: f64,
    /// Mean fuel over exited vehicles, mL.
    pub mean_fuel: f64,
    pub deadlocks: u64,
    pub layer1_reward: f64,
    pub layer1_decisions: u64,
    /// Completed layer-1 transitions (rewarded or punished).
    pub layer1_transitions: u64,
    pub layer2_reward: f64,
    pub layer2_decisions: u64,
    pub layer2_transitions: u64,
    /// `size_histogram[n - 1]` counts platoons commanded to size `n`.
    pub size_histogram: Vec<u64>,
    pub audited_steps: u64,
    pub safety_violations: u64,
    pub travel_times: Vec<f64>,
    pub fuel: Vec<f64>,
    pub deadlock_events: Vec<DeadlockEvent>,
}

impl EpisodeMetrics {
    pub fn new(episode: u64, seed: u64, policy: PolicyKind, condition: u8, granularity: usize, max_size: usize) -> Self {
        Self {
            episode,
            seed,
            policy,
            condition,
            granularity,
            steps: 0,
            spawned: 0,
            exited: 0,
            removed: 0,
            in_network: 0,
            backlog: 0,
            mean_travel_time: 0.0,
            mean_fuel: 0.0,
            deadlocks: 0,
            layer1_reward: 0.0,
            layer1_decisions: 0,
            layer1_transitions: 0,
            layer2_reward: 0.0,
            layer2_decisions: 0,
            layer2_transitions: 0,
            size_histogram: alloc::vec![0; max_size],
            audited_steps: 0,
            safety_violations: 0,
            travel_times: Vec::new(),
            fuel: Vec::new(),
            deadlock_events: Vec::new(),
        }
    }

    /// Spawned vehicles are all accounted for.
    pub fn conserved(&self) -> bool {
        self.spawned == self.exited + self.in_network && self.removed <= self.exited
    }

    /// Most frequent commanded size (smallest on ties), if any platoon formed.
    pub fn modal_size(&self) -> Option<usize> {
        modal(&self.size_histogram)
    }

    pub fn mean_layer2_reward(&self) -> Option<f64> {
        (self.layer2_transitions > 0).then(|| self.layer2_reward / self.layer2_transitions as f64)
    }
}

/// Index plus one of the largest bucket, smallest size on ties.
pub fn modal(histogram: &[u64]) -> Option<usize> {
    let mut best: Option<(usize, u64)> = None;
    for (i, c) in histogram.iter().enumerate() {
        if *c > 0 && best.is_none_or(|(_, b)| *c > b) {
            best = Some((i + 1, *c));
        }
    }
    best.map(|b| b.0)
}

/// Element-wise sum of histograms of possibly different lengths.
pub fn merge_histograms<'a>(hs: impl IntoIterator<Item = &'a [u64]>) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    for h in hs {
        if out.len() < h.len() {
            out.resize(h.len(), 0);
        }
        for (o, c) in out.iter_mut().zip(h) {
            *o += c;
        }
    }
    out
}
