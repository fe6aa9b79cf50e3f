//! Discrete-time environment loop.
//!
//! Each step runs, in order: arrivals and zone entry requests, platoon-size
//! decisions, formation, admission to the coordination zone, the status
//! scan with priority decisions, the deadlock pass, the kinematic update,
//! exits, the cell-overlap audit and reward bookkeeping.
//!
//! Vehicles are grouped into units. Under the platooning policies a unit
//! is a platoon whose size comes from the controller; the signal and
//! reservation baselines move single vehicles, each its own unit.
//!
//! Two active units whose movements share a zone cell form a pair. A pair
//! is unresolved until one side gains priority; while a side lacks priority
//! its leader is held short of the stretch of path on which its body could
//! touch the other movement's cells. A pair is decided when a leader
//! reaches its minimum stopping distance from that stretch: if the other
//! leader is about to do the same, both join a coordinated set whose order
//! comes from the controller, otherwise the leader that must brake first
//! claims priority.

mod fcfs;
mod pairs;
mod rewards;

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::baselines::WebsterPlan;
use crate::config::{PolicyKind, SimConfig};
use crate::coordination::{CoordinationEncoder, StatusLabel};
use crate::drl::{Experience, Input};
use crate::dynamics::{
    follow_gap_accel, formed_prefix, free_accel, max_accel_within, step_vehicle, travel, Platoon, PlatoonId, PlatoonStatus, Vehicle,
    VehicleId, VehicleParams,
};
use crate::formation::{max_platoon_size, CanvasVehicle, FormationEncoder, RewardNormalizer};
use crate::geometry::{occupied_cells, Grid, IntersectionLayout, MovementId, OccupancyTables, Path};
use crate::metrics::EpisodeMetrics;
use crate::traffic::{ArrivalSampler, ConditionSchedule, RequestLog};
use crate::{Error, Result};

use fcfs::Fcfs;
use pairs::{CoordSet, PairState};
use rewards::Layer1Book;

/// Where held vehicles stop, just short of the stop line.
pub const STOP_TARGET: f64 = -0.1;
/// Clearance kept between a held leader and the stretch it must not enter.
pub const GUARD_MARGIN: f64 = 0.02;
const EPS: f64 = 1e-9;

/// Decision maker plugged into the simulator.
pub trait Controller {
    /// Whether [`Controller::platoon_size`] needs the encoded state.
    fn wants_formation_state(&self) -> bool;
    /// Whether [`Controller::priority`] needs the encoded state.
    fn wants_coordination_state(&self) -> bool;
    /// Size in `1..=n_max` for a new platoon on `lane`.
    fn platoon_size(&mut self, lane: MovementId, state: Option<&Input>, n_max: usize) -> Result<usize>;
    /// Head output (see [`crate::coordination::action_order`]) for a set of
    /// `k` platoons ranked by id.
    fn priority(&mut self, state: Option<&Input>, k: usize) -> Result<usize>;
    fn layer1_experience(&mut self, e: Experience) -> Result<()>;
    fn layer2_experience(&mut self, e: Experience) -> Result<()>;
    /// Terminal penalty for a size decision whose platoon ended up in a
    /// deadlock.
    fn deadlock_punishment(&mut self, e: Experience) -> Result<()>;
}

/// Controller that never learns: fixed sizes and rank-order priorities.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullController {
    pub size: usize,
}

impl Controller for NullController {
    fn wants_formation_state(&self) -> bool {
        false
    }
    fn wants_coordination_state(&self) -> bool {
        false
    }
    fn platoon_size(&mut self, _: MovementId, _: Option<&Input>, n_max: usize) -> Result<usize> {
        Ok(self.size.clamp(1, n_max))
    }
    fn priority(&mut self, _: Option<&Input>, _: usize) -> Result<usize> {
        Ok(0)
    }
    fn layer1_experience(&mut self, _: Experience) -> Result<()> {
        Ok(())
    }
    fn layer2_experience(&mut self, _: Experience) -> Result<()> {
        Ok(())
    }
    fn deadlock_punishment(&mut self, _: Experience) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Unit {
    platoon: Platoon,
    /// Layer-1 decision that created the unit.
    decision: Option<u32>,
    /// Coordinated set the unit is busy with.
    set: Option<u32>,
    /// Leader's cumulative waiting when the unit was created.
    wait_base: f64,
    exited_at: Option<f64>,
}

#[derive(Debug, Clone, Default)]
struct Lane {
    /// In-network vehicles, front to back.
    vehicles: VecDeque<u32>,
    /// Arrival times of vehicles not yet admitted.
    backlog: VecDeque<f64>,
    /// Units that have not exited, front to back.
    units: VecDeque<u32>,
    last_decision: Option<u32>,
}

/// One vehicle in a per-step trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleTrace {
    pub id: u32,
    pub movement: u8,
    pub pos: f64,
    pub speed: f64,
    pub accel: f64,
    pub unit: Option<u32>,
    pub status: Option<PlatoonStatus>,
    pub label: Option<StatusLabel>,
}

/// Network state after a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: u64,
    pub time: f64,
    pub vehicles: Vec<VehicleTrace>,
    pub unresolved_pairs: usize,
    pub busy_sets: usize,
    pub deadlocks: u64,
}

pub struct Simulator {
    cfg: SimConfig,
    policy: PolicyKind,
    seed: u64,
    params: VehicleParams,
    paths: Vec<Path>,
    path_len: Vec<f64>,
    tables: OccupancyTables,
    audit_grid: Grid,
    formation_enc: FormationEncoder,
    coord_enc: CoordinationEncoder,
    schedule: ConditionSchedule,
    sampler: ArrivalSampler,
    requests: RequestLog,
    webster: Option<WebsterPlan>,
    fcfs: Option<Fcfs>,
    n_max: usize,
    /// Bumper gap kept between consecutive units on one lane.
    unit_gap: f64,
    time: f64,
    step: u64,
    vehicles: Vec<Vehicle>,
    unit_of: Vec<Option<u32>>,
    lanes: Vec<Lane>,
    units: BTreeMap<u32, Unit>,
    next_unit: u32,
    pairs: BTreeMap<(u32, u32), PairState>,
    sets: Vec<CoordSet>,
    layer1: Layer1Book,
    normalizer: RewardNormalizer,
    metrics: EpisodeMetrics,
    labels: BTreeMap<u32, StatusLabel>,
}

impl Simulator {
    /// Fresh network for one episode. Layer-1 rewards are computed with
    /// `normalizer` when it is calibrated and otherwise recorded into it.
    pub fn new(cfg: &SimConfig, episode: u64, seed: u64, normalizer: RewardNormalizer) -> Result<Self> {
        cfg.validate()?;
        let schedule = ConditionSchedule::preset(cfg.condition, cfg.duration, cfg.flow_scale)?;
        Self::with_schedule(cfg, episode, seed, normalizer, schedule)
    }

    pub fn with_schedule(cfg: &SimConfig, episode: u64, seed: u64, normalizer: RewardNormalizer, schedule: ConditionSchedule) -> Result<Self> {
        schedule.validate(cfg.duration)?;
        let layout: IntersectionLayout = cfg.layout();
        let params = cfg.vehicle();
        let paths: Vec<Path> = MovementId::all().map(|m| layout.movement(m).path).collect();
        let path_len = paths.iter().map(|p| p.length()).collect();
        let grid = Grid::zone(cfg.zone_side, cfg.granularity)?;
        let tables = OccupancyTables::build(&layout, grid, cfg.vehicle_length, cfg.vehicle_width);
        let policy = cfg.policy;
        let webster = if policy == PolicyKind::Webster { Some(WebsterPlan::new(schedule.profile_at(0.0), &cfg.webster)?) } else { None };
        let fcfs = (policy == PolicyKind::FcfsReservation).then(Fcfs::default);
        let unit_gap = if policy.platooning() {
            cfg.min_headway
        } else {
            MovementId::all().map(|m| tables.self_spacing(m) - cfg.vehicle_length).fold(cfg.min_headway, f64::max)
        };
        let n_max = max_platoon_size(cfg.vehicle_length, cfg.platoon_headway, cfg.formation_length)?;
        let metrics = EpisodeMetrics::new(episode, seed, policy, cfg.condition, cfg.granularity, n_max);
        Ok(Self {
            cfg: cfg.clone(),
            policy,
            seed,
            params,
            paths,
            path_len,
            audit_grid: grid,
            formation_enc: FormationEncoder::new(&layout, cfg.wait_threshold),
            coord_enc: CoordinationEncoder { grid, v_max: cfg.speed_limit, horizon: cfg.dt },
            tables,
            schedule,
            sampler: ArrivalSampler::new(seed),
            requests: RequestLog::default(),
            webster,
            fcfs,
            n_max,
            unit_gap,
            time: 0.0,
            step: 0,
            vehicles: Vec::new(),
            unit_of: Vec::new(),
            lanes: alloc::vec![Lane::default(); MovementId::COUNT],
            units: BTreeMap::new(),
            next_unit: 0,
            pairs: BTreeMap::new(),
            sets: Vec::new(),
            layer1: Layer1Book::default(),
            normalizer,
            metrics,
            labels: BTreeMap::new(),
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn is_done(&self) -> bool {
        self.time >= self.cfg.duration - EPS
    }

    /// Largest commandable platoon size.
    pub fn max_size(&self) -> usize {
        self.n_max
    }

    pub fn metrics(&self) -> &EpisodeMetrics {
        &self.metrics
    }

    /// Queues one extra arrival on `m` at the current time.
    pub fn inject_arrival(&mut self, m: MovementId) {
        self.lanes[m.index()].backlog.push_back(self.time);
    }

    /// Vehicle `id`, if it was spawned.
    pub fn vehicle(&self, id: u32) -> Option<&Vehicle> {
        self.vehicles.get(id as usize)
    }

    /// Runs every remaining step and closes the episode.
    pub fn run(mut self, ctl: &mut dyn Controller) -> Result<(EpisodeMetrics, RewardNormalizer)> {
        while !self.is_done() {
            self.advance(ctl)?;
        }
        self.finish(ctl)
    }

    /// One simulation step.
    pub fn advance(&mut self, ctl: &mut dyn Controller) -> Result<()> {
        self.arrivals()?;
        self.decide_sizes(ctl)?;
        self.form();
        self.admit()?;
        self.resolve_pairs(ctl)?;
        if self.policy.platooning() {
            self.deadlock_pass(ctl)?;
        }
        let before: Vec<(f64, f64)> = self.vehicles.iter().map(|v| (v.pos, v.fuel)).collect();
        self.physics()?;
        self.exits();
        self.time = (self.step + 1) as f64 * self.cfg.dt;
        self.step += 1;
        self.close_pairs_and_sets(ctl)?;
        self.audit()?;
        self.layer1_account(&before);
        self.layer1_close_groups(ctl)?;
        self.metrics.steps = self.step;
        Ok(())
    }

    /// Flushes pending transitions and fills the summary fields.
    pub fn finish(mut self, ctl: &mut dyn Controller) -> Result<(EpisodeMetrics, RewardNormalizer)> {
        self.layer1_flush(ctl)?;
        let m = &mut self.metrics;
        m.spawned = self.vehicles.len() as u64;
        m.exited = 0;
        m.removed = 0;
        m.in_network = 0;
        m.travel_times.clear();
        m.fuel.clear();
        for v in &self.vehicles {
            if let Some(t) = v.exit_time {
                m.removed += u64::from(v.removed);
                m.exited += 1;
                m.travel_times.push(t - v.entry_time);
                m.fuel.push(v.fuel);
            } else {
                m.in_network += 1;
            }
        }
        m.backlog = self.lanes.iter().map(|l| l.backlog.len() as u64).sum();
        let n = m.travel_times.len();
        if n > 0 {
            m.mean_travel_time = m.travel_times.iter().sum::<f64>() / n as f64;
            m.mean_fuel = m.fuel.iter().sum::<f64>() / n as f64;
        }
        Ok((self.metrics, self.normalizer))
    }

    /// Per-vehicle state for debugging dumps.
    pub fn trace(&self) -> StepTrace {
        let mut vehicles = Vec::new();
        for lane in &self.lanes {
            for &vid in &lane.vehicles {
                let v = &self.vehicles[vid as usize];
                let unit = self.unit_of[vid as usize];
                vehicles.push(VehicleTrace {
                    id: vid,
                    movement: v.movement.0,
                    pos: v.pos,
                    speed: v.speed,
                    accel: v.accel,
                    unit,
                    status: unit.map(|u| self.units[&u].platoon.status),
                    label: unit.and_then(|u| self.labels.get(&u).copied()),
                });
            }
        }
        vehicles.sort_by_key(|v| v.id);
        StepTrace {
            step: self.step,
            time: self.time,
            vehicles,
            unresolved_pairs: self.pairs.values().filter(|p| **p == PairState::Unresolved).count(),
            busy_sets: self.sets.iter().filter(|s| s.ct.is_none()).count(),
            deadlocks: self.metrics.deadlocks,
        }
    }

    fn safety(&self, detail: String) -> Error {
        Error::Safety { seed: self.seed, step: self.step, detail }
    }

    fn movement_of(&self, unit: u32) -> MovementId {
        self.units[&unit].platoon.movement
    }

    /// Members still in the network, front first.
    fn live_members(&self, unit: u32) -> impl Iterator<Item = &Vehicle> + '_ {
        self.units[&unit].platoon.members.iter().map(|m| &self.vehicles[m.0 as usize]).filter(|v| v.exit_time.is_none())
    }

    /// Front position and speed of the foremost member still in the network.
    fn lead(&self, unit: u32) -> (f64, f64) {
        self.live_members(unit).next().map(|v| (v.pos, v.speed)).unwrap_or((f64::INFINITY, 0.0))
    }

    /// Front position of the rearmost member.
    fn last_front(&self, unit: u32) -> f64 {
        let last = self.units[&unit].platoon.last();
        let v = &self.vehicles[last.0 as usize];
        if v.exit_time.is_some() {
            f64::INFINITY
        } else {
            v.pos
        }
    }

    fn is_active(&self, unit: u32) -> bool {
        self.units[&unit].platoon.status == PlatoonStatus::Active
    }

    fn all_stopped(&self, unit: u32) -> bool {
        self.live_members(unit).all(|v| v.speed < crate::dynamics::WAIT_SPEED)
    }

    // ---- arrivals -------------------------------------------------------

    fn arrivals(&mut self) -> Result<()> {
        let profile = *self.schedule.profile_at(self.time);
        let counts = self.sampler.sample(&profile, self.cfg.dt)?;
        for m in MovementId::all() {
            let lane = &mut self.lanes[m.index()];
            for _ in 0..counts[m.index()] {
                lane.backlog.push_back(self.time);
            }
            self.spawn(m)?;
        }
        Ok(())
    }

    fn spawn(&mut self, m: MovementId) -> Result<()> {
        let a = self.params.accel_max;
        let v_max = self.params.speed_limit;
        let start = -self.cfg.formation_length;
        let lane = &self.lanes[m.index()];
        let Some(&arrived) = lane.backlog.front() else { return Ok(()) };
        let speed = match lane.vehicles.back() {
            None => v_max,
            Some(&p) => {
                let pred = &self.vehicles[p as usize];
                let gap = pred.tail() - start;
                if gap < self.unit_gap {
                    return Ok(());
                }
                let room = gap + pred.speed * pred.speed / (2.0 * a) - self.unit_gap;
                libm::sqrt(2.0 * a * room.max(0.0)).min(v_max).min(libm::sqrt(2.0 * a * (start.abs() + STOP_TARGET)))
            }
        };
        let id = self.vehicles.len() as u32;
        let v = Vehicle::new(VehicleId(id), m, &self.params, start, speed, arrived);
        self.requests.emit(&v)?;
        self.vehicles.push(v);
        self.unit_of.push(None);
        let lane = &mut self.lanes[m.index()];
        lane.backlog.pop_front();
        lane.vehicles.push_back(id);
        Ok(())
    }

    // ---- layer 1 --------------------------------------------------------

    fn unassigned(&self, m: MovementId) -> Vec<u32> {
        self.lanes[m.index()].vehicles.iter().copied().filter(|v| self.unit_of[*v as usize].is_none()).collect()
    }

    fn has_forming(&self, m: MovementId) -> bool {
        self.lanes[m.index()].units.iter().any(|u| self.units[u].platoon.status == PlatoonStatus::Forming)
    }

    fn decide_sizes(&mut self, ctl: &mut dyn Controller) -> Result<()> {
        let mut group = Vec::new();
        for m in MovementId::all() {
            if self.policy.platooning() {
                if self.has_forming(m) {
                    continue;
                }
                let free = self.unassigned(m);
                if free.is_empty() {
                    continue;
                }
                let state = ctl.wants_formation_state().then(|| self.formation_state(m));
                let size = ctl.platoon_size(m, state.as_ref(), self.n_max)?;
                if !(1..=self.n_max).contains(&size) {
                    return Err(Error::Domain(format!("platoon size {size} outside 1..={}", self.n_max)));
                }
                self.metrics.layer1_decisions += 1;
                self.metrics.size_histogram[size - 1] += 1;
                let unit = self.create_unit(m, &free, size);
                let d = self.layer1.open(m, unit, state, size - 1, self.lanes[m.index()].last_decision);
                self.lanes[m.index()].last_decision = Some(d);
                self.units.get_mut(&unit).expect("just created").decision = Some(d);
                group.push(d);
            } else {
                for v in self.unassigned(m) {
                    self.create_unit(m, &[v], 1);
                }
            }
        }
        if !group.is_empty() {
            self.layer1.group(group);
        }
        Ok(())
    }

    fn create_unit(&mut self, m: MovementId, free: &[u32], size: usize) -> u32 {
        let id = self.next_unit;
        self.next_unit += 1;
        let take = size.min(free.len());
        let members: Vec<VehicleId> = free[..take].iter().map(|v| VehicleId(*v)).collect();
        for v in &members {
            self.unit_of[v.0 as usize] = Some(id);
        }
        let wait_base = self.vehicles[members[0].0 as usize].waiting;
        let platoon = Platoon {
            id: PlatoonId(id),
            movement: m,
            members,
            target_size: size,
            status: PlatoonStatus::Forming,
            desired_headway: self.cfg.platoon_headway,
            formed_at: None,
            activated_at: None,
        };
        self.units.insert(id, Unit { platoon, decision: None, set: None, wait_base, exited_at: None });
        self.lanes[m.index()].units.push_back(id);
        id
    }

    fn formation_state(&self, target: MovementId) -> Input {
        let a = self.params.accel_max;
        let v_max = self.params.speed_limit;
        let mut canvas = Vec::new();
        for (mi, lane) in self.lanes.iter().enumerate() {
            let path = &self.paths[mi];
            let mut ahead: Option<f64> = None;
            for &vid in &lane.vehicles {
                let v = &self.vehicles[vid as usize];
                let ttj = match (self.unit_of[vid as usize], ahead) {
                    (None, Some(tail)) => crate::formation::time_to_cover((tail - self.cfg.platoon_headway - v.pos).max(0.0), v.speed, a, v_max),
                    (None, None) => crate::formation::time_to_cover((STOP_TARGET - v.pos).max(0.0), v.speed, a, v_max),
                    _ => 0.0,
                };
                canvas.push(CanvasVehicle { body: v.body(path), speed: v.speed, time_to_join: ttj });
                ahead = Some(v.tail());
            }
        }
        self.formation_enc.encode(&canvas, target)
    }

    // ---- formation and admission ---------------------------------------

    fn form(&mut self) {
        let ids: Vec<u32> = self.units.iter().filter(|(_, u)| u.platoon.status == PlatoonStatus::Forming).map(|(id, _)| *id).collect();
        for id in ids {
            let m = self.movement_of(id);
            let missing = self.units[&id].platoon.target_size - self.units[&id].platoon.size();
            if missing > 0 {
                let joiners: Vec<u32> = self.unassigned(m).into_iter().take(missing).collect();
                for v in joiners {
                    self.unit_of[v as usize] = Some(id);
                    self.units.get_mut(&id).expect("listed").platoon.members.push(VehicleId(v));
                }
            }
            let unit = &self.units[&id];
            let members: Vec<&Vehicle> = unit.platoon.members.iter().map(|v| &self.vehicles[v.0 as usize]).collect();
            let prefix = formed_prefix(&members, unit.platoon.desired_headway);
            let full = unit.platoon.is_full() && prefix == members.len();
            let waited = members[0].waiting - unit.wait_base;
            if full {
                self.release(id, None);
            } else if waited > self.cfg.wait_threshold {
                self.release(id, Some(prefix));
            }
        }
    }

    /// Marks a unit ready, keeping only its first `keep` members, and snaps
    /// member speeds to the leader's.
    fn release(&mut self, id: u32, keep: Option<usize>) {
        let time = self.time;
        let unit = self.units.get_mut(&id).expect("known unit");
        if let Some(k) = keep {
            for v in unit.platoon.members.split_off(k) {
                self.unit_of[v.0 as usize] = None;
            }
            unit.platoon.target_size = k;
        }
        unit.platoon.status = PlatoonStatus::Ready;
        unit.platoon.formed_at = Some(time);
        let lead = unit.platoon.members[0].0 as usize;
        let (speed, accel) = (self.vehicles[lead].speed, self.vehicles[lead].accel);
        for v in &unit.platoon.members[1..] {
            self.vehicles[v.0 as usize].speed = speed;
            self.vehicles[v.0 as usize].accel = accel;
        }
    }

    fn admit(&mut self) -> Result<()> {
        match self.policy {
            PolicyKind::FcfsReservation => self.fcfs_requests(),
            PolicyKind::Webster => {
                let plan = self.webster.as_ref().expect("signal plan").clone();
                for m in MovementId::all() {
                    if !plan.is_green(m, self.time) {
                        continue;
                    }
                    let Some(&u) = self.lanes[m.index()].units.iter().find(|u| !self.is_active(**u)) else { continue };
                    if self.units[&u].platoon.status != PlatoonStatus::Ready {
                        continue;
                    }
                    let (front, v) = self.lead(u);
                    let reach = v * self.cfg.dt + v * v / (2.0 * self.params.accel_max) + 1.0;
                    if front >= -reach {
                        self.activate(u)?;
                    }
                }
                Ok(())
            }
            _ => {
                for m in MovementId::all() {
                    let Some(&u) = self.lanes[m.index()].units.front() else { continue };
                    if self.units[&u].platoon.status == PlatoonStatus::Ready {
                        self.activate(u)?;
                    }
                }
                Ok(())
            }
        }
    }

    fn activate(&mut self, u: u32) -> Result<()> {
        let unit = self.units.get_mut(&u).expect("known unit");
        unit.platoon.status = PlatoonStatus::Active;
        unit.platoon.activated_at = Some(self.time);
        if self.fcfs.is_none() {
            self.init_pairs(u)?;
        }
        Ok(())
    }

    // ---- kinematics -----------------------------------------------------

    fn physics(&mut self) -> Result<()> {
        let a_max = self.params.accel_max;
        let v_max = self.params.speed_limit;
        let dt = self.cfg.dt;
        let mut accel = alloc::vec![0.0; self.vehicles.len()];
        let mut unit_accel: BTreeMap<u32, f64> = BTreeMap::new();
        for mi in 0..MovementId::COUNT {
            // Predicted end-of-step (tail, speed) of the vehicle ahead.
            let mut ahead: Option<(f64, f64, Option<u32>)> = None;
            let lane: Vec<u32> = self.lanes[mi].vehicles.iter().copied().collect();
            for vid in lane {
                let v = &self.vehicles[vid as usize];
                let unit = self.unit_of[vid as usize];
                let status = unit.map(|u| self.units[&u].platoon.status);
                let rigid = matches!(status, Some(PlatoonStatus::Ready | PlatoonStatus::Active));
                let a = if let (true, Some(&ua)) = (rigid, unit.and_then(|u| unit_accel.get(&u))) {
                    ua
                } else {
                    let mut a = free_accel(v.speed, a_max, v_max, dt);
                    let plan = self.fcfs.as_ref().and_then(|f| unit.and_then(|u| f.plan(u)));
                    if let Some(plan) = plan {
                        a = plan.accel_at(self.time);
                    } else {
                        if let Some((tail, speed, pu)) = ahead {
                            let same = pu.is_some() && pu == unit && status == Some(PlatoonStatus::Forming);
                            let gap_min = if same { self.cfg.platoon_headway } else { self.unit_gap };
                            a = a.min(follow_gap_accel(v, tail - v.pos, speed, gap_min, v_max, dt));
                        }
                        if status != Some(PlatoonStatus::Active) {
                            a = a.min(max_accel_within(v.speed, STOP_TARGET - v.pos, a_max, v_max, dt));
                            if self.fcfs.as_ref().is_some_and(|f| unit.is_some_and(|u| f.is_denied(u))) {
                                let room = (STOP_TARGET - v.pos).max(0.01);
                                a = a.min(-v.speed * v.speed / (2.0 * room));
                            }
                        } else if let Some(u) = unit {
                            a = a.min(self.pair_guard(u)?);
                        }
                    }
                    if rigid {
                        unit_accel.insert(unit.expect("rigid vehicles have units"), a);
                    }
                    a
                };
                let a = a.clamp(-a_max, a_max);
                accel[vid as usize] = a;
                let (d, nv) = travel(v.speed, a, dt, v_max);
                ahead = Some((v.pos + d - v.length, nv, unit));
            }
        }
        for lane in &self.lanes {
            for &vid in &lane.vehicles {
                step_vehicle(&mut self.vehicles[vid as usize], accel[vid as usize], dt, v_max, &self.cfg.fuel)?;
            }
        }
        for lane in &self.lanes {
            for &vid in &lane.vehicles {
                let v = &self.vehicles[vid as usize];
                let active = self.unit_of[vid as usize].is_some_and(|u| self.is_active(u));
                if !active && v.pos > EPS {
                    return Err(self.safety(format!("vehicle {vid} crossed the stop line without admission (front {:.3} m)", v.pos)));
                }
            }
        }
        Ok(())
    }

    /// Strictest guard acceleration over the unit's pairs.
    fn pair_guard(&self, u: u32) -> Result<f64> {
        let (front, speed) = self.lead(u);
        let mut a = f64::INFINITY;
        for w in self.waits_for(u) {
            let Some(limit) = self.guard_limit(u, w) else { continue };
            let g = max_accel_within(speed, limit, self.params.accel_max, self.params.speed_limit, self.cfg.dt);
            let (d, nv) = travel(speed, g, self.cfg.dt, self.params.speed_limit);
            if d + nv * nv / (2.0 * self.params.accel_max) > limit + 1e-6 {
                return Err(self.safety(format!(
                    "platoon {u} cannot stop short of the conflict with platoon {w} (front {front:.3} m, speed {speed:.3} m/s, limit {limit:.3} m)"
                )));
            }
            a = a.min(g);
        }
        Ok(a)
    }

    fn exits(&mut self) {
        let time = (self.step + 1) as f64 * self.cfg.dt;
        for mi in 0..MovementId::COUNT {
            let len = self.path_len[mi];
            while let Some(&vid) = self.lanes[mi].vehicles.front() {
                let v = &mut self.vehicles[vid as usize];
                if v.tail() <= len {
                    break;
                }
                v.exit_time = Some(time);
                self.lanes[mi].vehicles.pop_front();
            }
            while let Some(&u) = self.lanes[mi].units.front() {
                if self.live_members(u).next().is_some() || self.units[&u].platoon.status == PlatoonStatus::Forming {
                    break;
                }
                self.lanes[mi].units.pop_front();
                let unit = self.units.get_mut(&u).expect("lane units are known");
                unit.platoon.status = PlatoonStatus::Exited;
                unit.exited_at = Some(time);
                if let Some(f) = self.fcfs.as_mut() {
                    f.release(u);
                }
            }
        }
    }

    /// No zone cell may hold bodies of two different units.
    fn audit(&mut self) -> Result<()> {
        let grid = &self.audit_grid;
        let mut owner: Vec<Option<u32>> = alloc::vec![None; grid.rows * grid.cols];
        for (mi, lane) in self.lanes.iter().enumerate() {
            for &vid in &lane.vehicles {
                let v = &self.vehicles[vid as usize];
                if v.pos <= 0.0 {
                    continue;
                }
                let unit = self.unit_of[vid as usize].unwrap_or(u32::MAX);
                for c in occupied_cells(&[v.body(&self.paths[mi])], grid) {
                    let slot = &mut owner[grid.index(c)];
                    match *slot {
                        Some(o) if o != unit => {
                            self.metrics.safety_violations += 1;
                            return Err(self.safety(format!("units {o} and {unit} share cell ({}, {})", c.row, c.col)));
                        }
                        _ => *slot = Some(unit),
                    }
                }
            }
        }
        self.metrics.audited_steps += 1;
        Ok(())
    }
}
