//! First-come-first-served tile reservation for single vehicles.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::baselines::{ReservationPlan, ReservationTable};
use crate::dynamics::{PlatoonStatus, WAIT_SPEED};
use crate::geometry::MovementId;
use crate::Result;

use super::Simulator;

/// Length of one reservation time slot, s.
pub const SLOT: f64 = 0.5;
/// Sampling interval of the following-distance check, s.
const GAP_SAMPLE: f64 = 0.05;

#[derive(Debug, Clone, Default)]
pub(super) struct Fcfs {
    table: ReservationTable,
    first_request: BTreeMap<u32, f64>,
    plans: BTreeMap<u32, ReservationPlan>,
    /// Units whose last request was refused.
    denied: BTreeSet<u32>,
}

impl Fcfs {
    pub fn plan(&self, unit: u32) -> Option<&ReservationPlan> {
        self.plans.get(&unit)
    }

    pub fn is_denied(&self, unit: u32) -> bool {
        self.denied.contains(&unit)
    }

    pub fn release(&mut self, unit: u32) {
        self.table.release(unit);
        self.first_request.remove(&unit);
        self.plans.remove(&unit);
    }

    #[cfg(test)]
    pub fn reserved_tiles(&self) -> usize {
        self.table.len()
    }
}

impl Simulator {
    /// Collects this step's requests and handles them one after another in
    /// order of first request.
    pub(super) fn fcfs_requests(&mut self) -> Result<()> {
        let (a, vmax) = (self.params.accel_max, self.params.speed_limit);
        let mut requests: Vec<(f64, u32, MovementId, ReservationPlan)> = Vec::new();
        for m in MovementId::all() {
            let lane = &self.lanes[m.index()];
            let Some(&u) = lane.units.iter().find(|u| !self.is_active(**u)) else { continue };
            if self.units[&u].platoon.status != PlatoonStatus::Ready {
                continue;
            }
            let (front, v) = self.lead(u);
            let plan = ReservationPlan::request(self.time, front, v, a, vmax, WAIT_SPEED);
            let due = plan.time_at(0.0).is_some_and(|t| t - self.time <= self.cfg.fcfs_buffer + self.cfg.dt + 1e-9);
            if !due {
                continue;
            }
            let f = self.fcfs.as_mut().expect("reservation policy");
            let first = *f.first_request.entry(u).or_insert(self.time);
            requests.push((first, u, m, plan));
        }
        requests.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        for (_, u, m, plan) in requests {
            if self.fcfs_try_grant(u, m, &plan) {
                let f = self.fcfs.as_mut().expect("reservation policy");
                f.plans.insert(u, plan);
                f.denied.remove(&u);
                self.activate(u)?;
            } else {
                self.fcfs.as_mut().expect("reservation policy").denied.insert(u);
            }
        }
        Ok(())
    }

    fn fcfs_try_grant(&mut self, u: u32, m: MovementId, plan: &ReservationPlan) -> bool {
        let len = self.path_len[m.index()];
        let l = self.params.length;
        let f = self.fcfs.as_ref().expect("reservation policy");
        let lane = &self.lanes[m.index()];
        let pos = lane.units.iter().position(|x| *x == u).expect("unit is on its lane");
        if pos > 0 {
            let Some(pred) = f.plans.get(&lane.units[pos - 1]) else { return false };
            let mut t = self.time;
            loop {
                let mine = plan.position(t);
                if pred.position(t) - l - mine < self.unit_gap - 1e-9 {
                    return false;
                }
                if mine - l > len {
                    break;
                }
                if plan.accel <= 0.0 && plan.speed <= 0.0 {
                    return false;
                }
                t += GAP_SAMPLE;
            }
        }
        let tiles = plan.tiles(&self.tables, m, len, l, SLOT);
        self.fcfs.as_mut().expect("reservation policy").table.try_reserve(u, &tiles)
    }
}
