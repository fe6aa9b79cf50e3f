//! Conflict pairs, coordinated sets and deadlock resolution.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::coordination::{action_mask, action_order, SetMember, StatusLabel};
use crate::deadlock::{DeadlockEvent, WaitForGraph};
use crate::drl::{Experience, Input};
use crate::dynamics::{free_accel, max_accel_within, travel, PlatoonStatus};
use crate::geometry::Rect;
use crate::Result;

use super::{Controller, Simulator, EPS, GUARD_MARGIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum PairState {
    Unresolved,
    Priority(u32),
}

#[derive(Debug, Clone)]
pub(super) struct CoordSet {
    /// Unit ids in rank order.
    pub members: Vec<u32>,
    pub start: f64,
    pub state: Option<Input>,
    pub action: usize,
    pub k: usize,
    /// Coordination time once every conflict inside the set has cleared.
    pub ct: Option<f64>,
    pub emitted: bool,
}

fn key(a: u32, b: u32) -> (u32, u32) {
    (a.min(b), a.max(b))
}

impl Simulator {
    fn region(&self, u: u32, w: u32) -> Option<(f64, f64)> {
        self.tables.region(self.movement_of(u), self.movement_of(w))
    }

    /// Distance the leader of `u` may still cover before touching cells of
    /// `w`'s movement; `None` once it is past that point.
    pub(super) fn guard_limit(&self, u: u32, w: u32) -> Option<f64> {
        let (enter, _) = self.region(u, w)?;
        let (front, _) = self.lead(u);
        let limit = enter - GUARD_MARGIN - front;
        (limit >= -1e-6).then_some(limit.max(0.0))
    }

    fn cleared(&self, u: u32, w: u32) -> bool {
        match self.region(u, w) {
            None => true,
            Some((_, leave)) => self.last_front(u) >= leave,
        }
    }

    fn can_stop(&self, u: u32, w: u32) -> bool {
        match self.guard_limit(u, w) {
            None => false,
            Some(limit) => {
                let (_, v) = self.lead(u);
                v * v / (2.0 * self.params.accel_max) <= limit + EPS
            }
        }
    }

    /// Units `u` must yield to: the other side of every pair that is
    /// unresolved or won by the other side.
    pub(super) fn waits_for(&self, u: u32) -> Vec<u32> {
        let mut out = Vec::new();
        for (&(a, b), s) in self.pairs.range((u, 0)..=(u, u32::MAX)).chain(self.pairs.iter().filter(|((_, b), _)| *b == u)) {
            let other = if a == u { b } else { a };
            match s {
                PairState::Unresolved => out.push(other),
                PairState::Priority(p) if *p != u => out.push(other),
                _ => {}
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Pairs a newly admitted unit with every active unit it may meet.
    pub(super) fn init_pairs(&mut self, q: u32) -> Result<()> {
        let mq = self.movement_of(q);
        let others: Vec<u32> = self.units.iter().filter(|(id, u)| **id != q && u.platoon.status == PlatoonStatus::Active).map(|(id, _)| *id).collect();
        for p in others {
            if !self.tables.grid_conflict(self.movement_of(p), mq) || self.cleared(p, q) {
                continue;
            }
            let p_must = !self.can_stop(p, q);
            let q_must = !self.can_stop(q, p);
            let state = if p_must && q_must {
                return Err(self.safety(alloc::format!("platoons {p} and {q} are both committed to the same cells")));
            } else if p_must || self.policy == crate::config::PolicyKind::Webster {
                PairState::Priority(p)
            } else if q_must {
                PairState::Priority(q)
            } else {
                PairState::Unresolved
            };
            self.pairs.insert(key(p, q), state);
        }
        Ok(())
    }

    /// Guard acceleration of `u` towards `w` against its free acceleration,
    /// now and after one unconstrained step.
    fn urgency(&self, u: u32, w: u32) -> (bool, bool) {
        let (a, vmax, dt) = (self.params.accel_max, self.params.speed_limit, self.cfg.dt);
        let Some(limit) = self.guard_limit(u, w) else { return (false, false) };
        let (_, v) = self.lead(u);
        let free = free_accel(v, a, vmax, dt);
        let due = max_accel_within(v, limit, a, vmax, dt) < free - EPS;
        let (d, nv) = travel(v, free, dt, vmax);
        let soon = due || max_accel_within(nv, limit - d, a, vmax, dt) < free_accel(nv, a, vmax, dt) - EPS;
        (due, soon)
    }

    fn busy(&self, u: u32) -> Option<u32> {
        self.units[&u].set
    }

    /// Status scan: settles pairs whose leaders reached stopping distance
    /// and launches coordinated sets.
    pub(super) fn resolve_pairs(&mut self, ctl: &mut dyn Controller) -> Result<()> {
        if self.fcfs.is_some() {
            return Ok(());
        }
        let mut edges: Vec<(u32, u32)> = Vec::new();
        let keys: Vec<(u32, u32)> = self.pairs.iter().filter(|(_, s)| **s == PairState::Unresolved).map(|(k, _)| *k).collect();
        for (a, b) in keys {
            let (da, sa) = self.urgency(a, b);
            let (db, sb) = self.urgency(b, a);
            let state = match (self.busy(a), self.busy(b)) {
                (None, None) => {
                    if (da && sb) || (db && sa) {
                        edges.push((a, b));
                        None
                    } else if da {
                        Some(PairState::Priority(a))
                    } else if db {
                        Some(PairState::Priority(b))
                    } else {
                        None
                    }
                }
                _ if !(da || db) => None,
                (Some(_), None) => Some(PairState::Priority(a)),
                (None, Some(_)) => Some(PairState::Priority(b)),
                (Some(x), Some(y)) => Some(PairState::Priority(if x <= y { a } else { b })),
            };
            if let Some(s) = state {
                self.pairs.insert((a, b), s);
            }
        }
        for comp in components(&edges) {
            self.launch_set(comp, &edges, ctl)?;
        }
        self.refresh_labels();
        Ok(())
    }

    fn launch_set(&mut self, comp: Vec<u32>, edges: &[(u32, u32)], ctl: &mut dyn Controller) -> Result<()> {
        let mut members = comp;
        if members.len() > self.cfg.k_max {
            let dist = |u: u32| {
                edges
                    .iter()
                    .filter_map(|&(a, b)| if a == u { Some(b) } else if b == u { Some(a) } else { None })
                    .filter_map(|w| self.guard_limit(u, w))
                    .fold(f64::INFINITY, f64::min)
            };
            let mut by_dist: Vec<(f64, u32)> = members.iter().map(|u| (dist(*u), *u)).collect();
            by_dist.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            members = by_dist[..self.cfg.k_max].iter().map(|x| x.1).collect();
            members.sort_unstable();
        }
        let k = members.len();
        let state = ctl.wants_coordination_state().then(|| self.coordination_state(&members));
        let action = ctl.priority(state.as_ref(), k)?;
        let order = action_order(action, k)?;
        let mut place = alloc::vec![0; k];
        for (pos, rank) in order.iter().enumerate() {
            place[*rank] = pos;
        }
        for i in 0..k {
            for j in (i + 1)..k {
                let kk = key(members[i], members[j]);
                if self.pairs.get(&kk) == Some(&PairState::Unresolved) {
                    let first = if place[i] < place[j] { members[i] } else { members[j] };
                    self.pairs.insert(kk, PairState::Priority(first));
                }
            }
        }
        let id = self.sets.len() as u32;
        for u in &members {
            self.units.get_mut(u).expect("set members are known").set = Some(id);
        }
        self.sets.push(CoordSet { members, start: self.time, state, action, k, ct: None, emitted: false });
        self.metrics.layer2_decisions += 1;
        Ok(())
    }

    /// Layer-2 image for a set ranked by unit id.
    pub(super) fn coordination_state(&self, members: &[u32]) -> Input {
        let (a, vmax, dt) = (self.params.accel_max, self.params.speed_limit, self.cfg.dt);
        let mut ms = Vec::with_capacity(members.len());
        for &u in members {
            let path = &self.paths[self.movement_of(u).index()];
            let vs: Vec<_> = self.live_members(u).collect();
            let speed = vs.first().map(|v| v.speed).unwrap_or(0.0);
            let desired = free_accel(speed, a, vmax, dt);
            ms.push(SetMember {
                bodies: vs.iter().map(|v| v.body(path)).collect(),
                poses: vs
                    .iter()
                    .map(|v| {
                        let mut p = v.pose(path);
                        p.accel = desired;
                        p
                    })
                    .collect(),
                speed,
            });
        }
        let mut others: Vec<Rect> = Vec::new();
        for (&id, unit) in &self.units {
            if unit.platoon.status != PlatoonStatus::Active || members.contains(&id) {
                continue;
            }
            let path = &self.paths[unit.platoon.movement.index()];
            others.extend(self.live_members(id).filter(|v| v.pos > 0.0).map(|v| v.body(path)));
        }
        self.coord_enc.encode(&ms, &others)
    }

    fn refresh_labels(&mut self) {
        let mut labels = BTreeMap::new();
        for (&id, unit) in &self.units {
            if unit.platoon.status != PlatoonStatus::Active {
                continue;
            }
            let label = if let Some(s) = unit.set {
                StatusLabel::Coordinated { set: s }
            } else if self.binding(id).is_empty() {
                StatusLabel::Free
            } else {
                StatusLabel::Blocked
            };
            labels.insert(id, label);
        }
        self.labels = labels;
    }

    /// Units whose pair currently forces `u` below its free acceleration.
    fn binding(&self, u: u32) -> Vec<u32> {
        let (a, vmax, dt) = (self.params.accel_max, self.params.speed_limit, self.cfg.dt);
        let (_, v) = self.lead(u);
        let free = free_accel(v, a, vmax, dt);
        self.waits_for(u)
            .into_iter()
            .filter(|w| self.guard_limit(u, *w).is_some_and(|l| max_accel_within(v, l, a, vmax, dt) < free - EPS))
            .collect()
    }

    /// Finds wait-for cycles of stopped platoons and removes them.
    pub(super) fn deadlock_pass(&mut self, ctl: &mut dyn Controller) -> Result<()> {
        let active: Vec<u32> = self.units.iter().filter(|(_, u)| u.platoon.status == PlatoonStatus::Active).map(|(id, _)| *id).collect();
        if active.len() < 2 {
            return Ok(());
        }
        let index: BTreeMap<u32, usize> = active.iter().enumerate().map(|(i, u)| (*u, i)).collect();
        let mut g = WaitForGraph::new(active.len());
        for &u in &active {
            for w in self.binding(u) {
                if let Some(&j) = index.get(&w) {
                    g.add_edge(index[&u], j);
                }
            }
        }
        if !g.has_cycle() {
            return Ok(());
        }
        let mut gone: Vec<u32> = Vec::new();
        for cycle in g.cycles() {
            let units: Vec<u32> = cycle.iter().map(|i| active[*i]).collect();
            if units.iter().any(|u| gone.contains(u)) || !units.iter().all(|u| self.all_stopped(*u)) {
                continue;
            }
            self.metrics.deadlocks += 1;
            self.metrics.deadlock_events.push(DeadlockEvent { step: self.step, platoons: units.clone() });
            for u in units {
                self.remove_unit(u, ctl)?;
                gone.push(u);
            }
        }
        if !gone.is_empty() {
            self.refresh_labels();
        }
        Ok(())
    }

    fn remove_unit(&mut self, u: u32, ctl: &mut dyn Controller) -> Result<()> {
        let time = self.time;
        let m = self.movement_of(u).index();
        let members = self.units[&u].platoon.members.clone();
        for v in &members {
            let veh = &mut self.vehicles[v.0 as usize];
            if veh.exit_time.is_none() {
                veh.exit_time = Some(time);
                veh.removed = true;
            }
        }
        self.lanes[m].vehicles.retain(|v| !members.iter().any(|x| x.0 == *v));
        self.lanes[m].units.retain(|x| *x != u);
        let unit = self.units.get_mut(&u).expect("known unit");
        unit.platoon.status = PlatoonStatus::Exited;
        unit.exited_at = Some(time);
        self.pairs.retain(|(a, b), _| *a != u && *b != u);
        if let Some(d) = self.units[&u].decision {
            if let Some((state, action)) = self.layer1.punish(d) {
                let e = Experience { state, action, reward: self.cfg.deadlock_penalty, next: None };
                self.metrics.layer1_reward += self.cfg.deadlock_penalty;
                self.metrics.layer1_transitions += 1;
                ctl.deadlock_punishment(e)?;
            }
        }
        Ok(())
    }

    /// Drops pairs whose conflict has cleared, ends coordination phases and
    /// emits finished layer-2 transitions.
    pub(super) fn close_pairs_and_sets(&mut self, ctl: &mut dyn Controller) -> Result<()> {
        let keys: Vec<(u32, u32)> = self.pairs.keys().copied().collect();
        for (a, b) in keys {
            let gone = |u: u32| self.units[&u].platoon.status == PlatoonStatus::Exited;
            if gone(a) || gone(b) || self.cleared(a, b) || self.cleared(b, a) {
                self.pairs.remove(&(a, b));
            }
        }
        for i in 0..self.sets.len() {
            if self.sets[i].ct.is_some() {
                continue;
            }
            let ms = self.sets[i].members.clone();
            let open = ms.iter().enumerate().any(|(x, a)| ms[x + 1..].iter().any(|b| self.pairs.contains_key(&key(*a, *b))));
            if !open {
                self.sets[i].ct = Some(self.time - self.sets[i].start);
                for u in &ms {
                    let unit = self.units.get_mut(u).expect("set members are known");
                    if unit.set == Some(i as u32) {
                        unit.set = None;
                    }
                }
            }
        }
        for i in 0..self.sets.len() {
            let s = &self.sets[i];
            if s.emitted || s.ct.is_none() {
                continue;
            }
            let exits: Option<Vec<f64>> = s.members.iter().map(|u| self.units[u].exited_at).collect();
            let Some(exits) = exits else { continue };
            let done = exits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let pcs: Vec<f64> = exits.iter().map(|t| t - s.start).collect();
            let reward = crate::coordination::coordination_reward(s.ct.expect("checked"), &pcs)?;
            self.sets[i].emitted = true;
            let s = &self.sets[i];
            let Some(state) = s.state.clone() else { continue };
            let next = self.sets[i + 1..]
                .iter()
                .find(|t| t.start <= done && t.members.iter().any(|u| s.members.contains(u)))
                .and_then(|t| t.state.clone().map(|st| (st, action_mask(t.k))));
            let e = Experience { state, action: s.action, reward, next };
            self.metrics.layer2_reward += reward;
            self.metrics.layer2_transitions += 1;
            ctl.layer2_experience(e)?;
        }
        Ok(())
    }
}

/// Connected components of an undirected edge list, each sorted, in order
/// of their smallest node.
fn components(edges: &[(u32, u32)]) -> Vec<Vec<u32>> {
    let mut nodes: Vec<u32> = edges.iter().flat_map(|(a, b)| [*a, *b]).collect();
    nodes.sort_unstable();
    nodes.dedup();
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let idx = |n: u32| nodes.binary_search(&n).expect("edge endpoints are nodes");
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, idx(a)), find(&mut parent, idx(b)));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    for i in 0..nodes.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(nodes[i]);
    }
    groups.into_values().collect()
}
