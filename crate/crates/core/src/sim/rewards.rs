//! Layer-1 reward windows.
//!
//! A size decision opens a window on its lane. While the window is open,
//! every vehicle of that lane upstream of the stop line accumulates the
//! distance it covers, the time it spends and the fuel it burns. Decisions
//! taken in the same step share one window group; the group closes once
//! every platoon it created has left the zone, and all its decisions
//! receive the reward computed over the union of their vehicles.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::drl::{Experience, Input};
use crate::dynamics::PlatoonStatus;
use crate::formation::{formation_reward, VehicleTerms};
use crate::geometry::MovementId;
use crate::Result;

use super::{Controller, Simulator};

#[derive(Debug, Clone)]
struct Decision {
    lane: MovementId,
    unit: u32,
    state: Option<Input>,
    action: usize,
    next: Option<Input>,
    reward: Option<f64>,
    punished: bool,
    emitted: bool,
    /// Per vehicle: distance, time, fuel, cumulative waiting.
    terms: BTreeMap<u32, [f64; 4]>,
}

#[derive(Debug, Clone, Default)]
pub(super) struct Layer1Book {
    decisions: Vec<Decision>,
    groups: Vec<Vec<u32>>,
    open_groups: Vec<usize>,
    /// Rewarded decisions waiting for their next state.
    pending: BTreeSet<u32>,
}

impl Layer1Book {
    /// Registers a decision; it becomes the successor state of `prev`.
    pub fn open(&mut self, lane: MovementId, unit: u32, state: Option<Input>, action: usize, prev: Option<u32>) -> u32 {
        if let (Some(p), Some(s)) = (prev, state.as_ref()) {
            self.decisions[p as usize].next = Some(s.clone());
        }
        let id = self.decisions.len() as u32;
        self.decisions.push(Decision {
            lane,
            unit,
            state,
            action,
            next: None,
            reward: None,
            punished: false,
            emitted: false,
            terms: BTreeMap::new(),
        });
        id
    }

    pub fn group(&mut self, decisions: Vec<u32>) {
        self.open_groups.push(self.groups.len());
        self.groups.push(decisions);
    }

    /// Marks a decision as punished and returns what the penalty applies to.
    pub fn punish(&mut self, d: u32) -> Option<(Input, usize)> {
        let dec = &mut self.decisions[d as usize];
        if dec.punished || dec.emitted {
            return None;
        }
        dec.punished = true;
        self.pending.remove(&d);
        dec.state.clone().map(|s| (s, dec.action))
    }
}

impl Simulator {
    /// Adds this step's motion of upstream vehicles to every open window.
    pub(super) fn layer1_account(&mut self, before: &[(f64, f64)]) {
        let dt = self.cfg.dt;
        let book = &mut self.layer1;
        for &g in &book.open_groups {
            for &d in &book.groups[g] {
                let dec = &mut book.decisions[d as usize];
                for &vid in &self.lanes[dec.lane.index()].vehicles {
                    let (pos0, fuel0) = before[vid as usize];
                    if pos0 > 0.0 {
                        continue;
                    }
                    let v = &self.vehicles[vid as usize];
                    let t = dec.terms.entry(vid).or_insert([0.0; 4]);
                    t[0] += v.pos - pos0;
                    t[1] += dt;
                    t[2] += v.fuel - fuel0;
                    t[3] = v.waiting;
                }
            }
        }
    }

    /// Rewards groups whose platoons have all left and emits every
    /// transition whose successor state is known.
    pub(super) fn layer1_close_groups(&mut self, ctl: &mut dyn Controller) -> Result<()> {
        let open = core::mem::take(&mut self.layer1.open_groups);
        let mut still = Vec::new();
        for g in open {
            let ds = self.layer1.groups[g].clone();
            let done = ds.iter().all(|d| self.units[&self.layer1.decisions[*d as usize].unit].platoon.status == PlatoonStatus::Exited);
            if !done {
                still.push(g);
                continue;
            }
            let mut factors = Vec::new();
            for d in &ds {
                for t in self.layer1.decisions[*d as usize].terms.values() {
                    if t[1] <= 0.0 {
                        continue;
                    }
                    let mean_speed = (t[0] / t[1]).clamp(0.0, self.params.speed_limit);
                    let terms = VehicleTerms { waiting: t[3], mean_speed, fuel: t[2] };
                    factors.push(terms.factors(self.cfg.wait_threshold, self.params.speed_limit)?);
                }
            }
            if !self.normalizer.calibrated {
                for f in &factors {
                    self.normalizer.record(f);
                }
                continue;
            }
            let normalized: Vec<[f64; 3]> = factors.iter().map(|f| self.normalizer.normalize(f)).collect::<Result<_>>()?;
            let reward = if normalized.is_empty() { 0.0 } else { formation_reward(&self.cfg.reward_weights, &normalized)? };
            for d in ds {
                let dec = &mut self.layer1.decisions[d as usize];
                if !dec.punished {
                    dec.reward = Some(reward);
                    self.layer1.pending.insert(d);
                }
            }
        }
        self.layer1.open_groups = still;
        self.layer1_emit(ctl, false)
    }

    fn layer1_emit(&mut self, ctl: &mut dyn Controller, terminal: bool) -> Result<()> {
        let mask = alloc::vec![true; self.n_max];
        let pending: Vec<u32> = self.layer1.pending.iter().copied().collect();
        for d in pending {
            let dec = &mut self.layer1.decisions[d as usize];
            if dec.next.is_none() && !terminal {
                continue;
            }
            self.layer1.pending.remove(&d);
            dec.emitted = true;
            let (Some(state), Some(reward)) = (dec.state.clone(), dec.reward) else { continue };
            let next = dec.next.clone().map(|s| (s, mask.clone()));
            self.metrics.layer1_reward += reward;
            self.metrics.layer1_transitions += 1;
            ctl.layer1_experience(Experience { state, action: dec.action, reward, next })?;
        }
        Ok(())
    }

    /// End of episode: rewarded decisions without a successor become
    /// terminal; unrewarded ones are dropped.
    pub(super) fn layer1_flush(&mut self, ctl: &mut dyn Controller) -> Result<()> {
        self.layer1_emit(ctl, true)
    }
}
