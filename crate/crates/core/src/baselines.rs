//! Reference controllers: fixed-size platoons, random priorities, a
//! fixed-time signal and per-vehicle tile reservation.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::config::WebsterConfig;
use crate::coordination::{action_mask, ACTIONS};
use crate::geometry::{Approach, MovementId, OccupancyTables, Turn};
use crate::rng::Rng;
use crate::traffic::DemandProfile;
use crate::{Error, Result};

/// Platoon size of the fixed-size variant, capped by the action bound.
pub fn fixed_platooning_size(fixed: usize, max_size: usize) -> usize {
    fixed.min(max_size).max(1)
}

/// Uniformly random valid head output for a set of `k` platoons.
pub fn random_coordination(k: usize, rng: &mut Rng) -> usize {
    let mask = action_mask(k);
    let valid: Vec<usize> = (0..ACTIONS).filter(|a| mask[*a]).collect();
    valid[rng.random_range(0..valid.len())]
}

/// Movements served by each of the four signal phases.
pub fn phase_movements(phase: usize) -> Vec<MovementId> {
    let (axis, turns): ([Approach; 2], &[Turn]) = match phase {
        0 => ([Approach::North, Approach::South], &[Turn::Straight, Turn::Right]),
        1 => ([Approach::North, Approach::South], &[Turn::Left]),
        2 => ([Approach::East, Approach::West], &[Turn::Straight, Turn::Right]),
        3 => ([Approach::East, Approach::West], &[Turn::Left]),
        _ => return Vec::new(),
    };
    let mut out = Vec::new();
    for o in axis {
        for t in turns {
            out.push(MovementId::new(o, *t));
        }
    }
    out
}

/// Four-phase fixed-time plan with a delay-minimizing cycle length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WebsterPlan {
    pub cycle: f64,
    /// Effective green per phase, s.
    pub greens: [f64; 4],
    pub lost_per_phase: f64,
    /// Critical flow ratio per phase.
    pub ratios: [f64; 4],
}

impl WebsterPlan {
    /// Cycle `C0 = (1.5 L + 5) / (1 - Y)` clamped to the configured range,
    /// greens split in proportion to each phase's critical flow ratio.
    pub fn new(demand: &DemandProfile, cfg: &WebsterConfig) -> Result<Self> {
        if !(cfg.saturation_flow > 0.0) {
            return Err(Error::Config("saturation flow must be positive".into()));
        }
        let mut ratios = [0.0; 4];
        for (p, r) in ratios.iter_mut().enumerate() {
            *r = phase_movements(p).iter().map(|m| demand.rate(*m) / cfg.saturation_flow).fold(0.0, f64::max);
        }
        let y: f64 = ratios.iter().sum();
        let lost = 4.0 * cfg.lost_time_per_phase;
        let cycle = if y < 1.0 { (1.5 * lost + 5.0) / (1.0 - y) } else { cfg.max_cycle };
        let cycle = cycle.clamp(cfg.min_cycle.max(lost + 4.0), cfg.max_cycle.max(lost + 4.0));
        let green_total = cycle - lost;
        let mut greens = [green_total / 4.0; 4];
        if y > 0.0 {
            for p in 0..4 {
                greens[p] = green_total * ratios[p] / y;
            }
        }
        Ok(Self { cycle, greens, lost_per_phase: cfg.lost_time_per_phase, ratios })
    }

    /// Phase showing green at time `t`, if any (`None` during all-red).
    pub fn green_phase(&self, t: f64) -> Option<usize> {
        let mut u = t - self.cycle * libm::floor(t / self.cycle);
        for p in 0..4 {
            if u < self.greens[p] {
                return Some(p);
            }
            u -= self.greens[p] + self.lost_per_phase;
            if u < 0.0 {
                return None;
            }
        }
        None
    }

    pub fn is_green(&self, m: MovementId, t: f64) -> bool {
        self.green_phase(t).is_some_and(|p| phase_movements(p).contains(&m))
    }
}

/// Space-time tile: (zone cell index, time slot).
pub type Tile = (u32, u64);

/// Tiles granted to individual vehicles, first come first served.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReservationTable {
    owners: BTreeMap<Tile, u32>,
    by_vehicle: BTreeMap<u32, Vec<Tile>>,
}

impl ReservationTable {
    /// Grants every tile to `vehicle` if none is held by another vehicle.
    pub fn try_reserve(&mut self, vehicle: u32, tiles: &[Tile]) -> bool {
        if tiles.iter().any(|t| self.owners.get(t).is_some_and(|o| *o != vehicle)) {
            return false;
        }
        for t in tiles {
            self.owners.insert(*t, vehicle);
        }
        self.by_vehicle.entry(vehicle).or_default().extend_from_slice(tiles);
        true
    }

    pub fn release(&mut self, vehicle: u32) {
        if let Some(ts) = self.by_vehicle.remove(&vehicle) {
            for t in ts {
                if self.owners.get(&t) == Some(&vehicle) {
                    self.owners.remove(&t);
                }
            }
        }
    }

    pub fn owner(&self, tile: Tile) -> Option<u32> {
        self.owners.get(&tile).copied()
    }

    pub fn len(&self) -> usize {
        self.owners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owners.is_empty()
    }

    /// Every reserved tile with its owner.
    pub fn iter(&self) -> impl Iterator<Item = (&Tile, &u32)> {
        self.owners.iter()
    }
}

/// Trajectory a vehicle commits to when its reservation is granted:
/// constant acceleration from `(front, speed)` at time `start`, with the
/// speed held at `v_max` once reached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReservationPlan {
    pub start: f64,
    pub front: f64,
    pub speed: f64,
    pub accel: f64,
    pub v_max: f64,
}

impl ReservationPlan {
    /// Moving vehicles keep their speed; a stopped one pulls away at `a_max`.
    pub fn request(start: f64, front: f64, speed: f64, a_max: f64, v_max: f64, stopped_below: f64) -> Self {
        let accel = if speed < stopped_below { a_max } else { 0.0 };
        Self { start, front, speed, accel, v_max }
    }

    /// Front position at absolute time `t >= start`.
    pub fn position(&self, t: f64) -> f64 {
        self.front + crate::dynamics::travel(self.speed, self.accel, (t - self.start).max(0.0), self.v_max).0
    }

    /// Acceleration to apply at time `t` to stay on the plan.
    pub fn accel_at(&self, t: f64) -> f64 {
        let v = crate::dynamics::travel(self.speed, self.accel, (t - self.start).max(0.0), self.v_max).1;
        if v < self.v_max {
            self.accel
        } else {
            0.0
        }
    }

    /// Tiles swept until the body of length `length` has left a path of
    /// `path_len`. Each slot of `slot` seconds collects every cell touched
    /// while the front moves through that slot.
    pub fn tiles(&self, tables: &OccupancyTables, m: MovementId, path_len: f64, length: f64, slot: f64) -> Vec<Tile> {
        let step = crate::geometry::CONFLICT_STEP;
        let end = path_len + length + step;
        let mut tiles = Vec::new();
        let mut k = libm::floor(self.start / slot + 1e-9) as u64;
        loop {
            let t0 = (k as f64 * slot).max(self.start);
            let t1 = (k + 1) as f64 * slot;
            let x0 = self.position(t0);
            let x1 = self.position(t1);
            if x0 > end || (x1 <= x0 && x1 < tables.start) {
                break;
            }
            let mut cells: Vec<u32> = Vec::new();
            if x1 >= tables.start {
                let mut x = x0.max(tables.start);
                loop {
                    for c in tables.cells_at(m, x.min(end)) {
                        cells.push(tables.grid.index(*c) as u32);
                    }
                    if x >= x1 || x >= end {
                        break;
                    }
                    x = (x + step).min(x1);
                }
            }
            cells.sort_unstable();
            cells.dedup();
            tiles.extend(cells.into_iter().map(|c| (c, k)));
            k += 1;
        }
        tiles
    }

    /// Time at which the front reaches `pos`, if it ever does.
    pub fn time_at(&self, pos: f64) -> Option<f64> {
        let d = pos - self.front;
        if d <= 0.0 {
            return Some(self.start);
        }
        if self.accel <= 0.0 {
            return (self.speed > 0.0).then(|| self.start + d / self.speed);
        }
        Some(self.start + crate::formation::time_to_cover(d, self.speed, self.accel, self.v_max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{conflict_matrix, Grid, IntersectionLayout};
    use crate::rng;
    use crate::traffic::Tier;

    #[test]
    fn fixed_size() {
        assert_eq!(fixed_platooning_size(3, 33), 3);
        assert_eq!(fixed_platooning_size(3, 2), 2);
    }

    #[test]
    fn random_orders_are_uniform() {
        let mut r = rng::stream(5, rng::domain::RANDOM_ORDER, 0);
        let mut first = 0;
        let n = 10_000;
        for _ in 0..n {
            if random_coordination(2, &mut r) == 0 {
                first += 1;
            }
        }
        let f = first as f64 / n as f64;
        assert!((f - 0.5).abs() < 0.02, "{f}");
        let mut a = rng::stream(9, rng::domain::RANDOM_ORDER, 0);
        let mut b = rng::stream(9, rng::domain::RANDOM_ORDER, 0);
        for _ in 0..20 {
            assert_eq!(random_coordination(4, &mut a), random_coordination(4, &mut b));
        }
    }

    #[test]
    fn phases_partition_movements_without_conflict_points() {
        let layout = IntersectionLayout::default();
        let cps = conflict_matrix(&layout);
        let mut seen = alloc::vec![0; 12];
        for p in 0..4 {
            let ms = phase_movements(p);
            for a in &ms {
                seen[a.index()] += 1;
                for b in &ms {
                    assert_eq!(cps[a.index()][b.index()], 0, "{a} vs {b}");
                }
            }
        }
        assert!(seen.iter().all(|s| *s == 1));
    }

    #[test]
    fn webster_cycle_by_hand() {
        // Quarter of the high-demand table: critical ratios 300/1800,
        // 200/1800, 200/1800 and 250/1800; Y = 950/1800.
        let d = DemandProfile::tier(Tier::High, 0.25);
        let plan = WebsterPlan::new(&d, &WebsterConfig::default()).unwrap();
        let y = 950.0 / 1800.0;
        assert!((plan.ratios.iter().sum::<f64>() - y).abs() < 1e-12);
        let c0 = (1.5 * 16.0 + 5.0) / (1.0 - y);
        assert!((plan.cycle - c0).abs() < 1e-9, "{}", plan.cycle);
        assert!((plan.greens.iter().sum::<f64>() + 16.0 - plan.cycle).abs() < 1e-9);
        assert!((plan.greens[0] / plan.greens[1] - 1.5).abs() < 1e-12);
        // Full high demand saturates: capped cycle.
        let full = WebsterPlan::new(&DemandProfile::tier(Tier::High, 1.0), &WebsterConfig::default()).unwrap();
        assert_eq!(full.cycle, 120.0);
    }

    #[test]
    fn signal_timeline() {
        let plan = WebsterPlan { cycle: 56.0, greens: [10.0; 4], lost_per_phase: 4.0, ratios: [0.1; 4] };
        assert_eq!(plan.green_phase(0.0), Some(0));
        assert_eq!(plan.green_phase(9.9), Some(0));
        assert_eq!(plan.green_phase(12.0), None);
        assert_eq!(plan.green_phase(14.0), Some(1));
        assert_eq!(plan.green_phase(55.0), None);
        assert_eq!(plan.green_phase(56.0), Some(0));
        let ns = MovementId::new(Approach::North, Turn::Straight);
        let ew = MovementId::new(Approach::East, Turn::Straight);
        for t in 0..200 {
            assert!(!(plan.is_green(ns, t as f64) && plan.is_green(ew, t as f64)));
        }
        assert!(plan.is_green(ns, 3.0));
    }

    #[test]
    fn reservations_first_come_first_served() {
        let mut t = ReservationTable::default();
        assert!(t.try_reserve(1, &[(0, 0), (1, 0)]));
        assert!(!t.try_reserve(2, &[(1, 0), (2, 0)]));
        assert_eq!(t.owner((2, 0)), None);
        assert!(t.try_reserve(2, &[(1, 1)]));
        t.release(1);
        assert!(t.try_reserve(2, &[(1, 0)]));
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn conflicting_plans_overlap_in_tiles() {
        let layout = IntersectionLayout::default();
        let tables = OccupancyTables::build(&layout, Grid::zone(15.0, 12).unwrap(), 5.0, 1.8);
        let sn = MovementId::new(Approach::South, Turn::Straight);
        let we = MovementId::new(Approach::West, Turn::Straight);
        let len = |m| layout.movement(m).path.length();
        let plan = |front: f64| ReservationPlan { start: 0.0, front, speed: 10.0, accel: 0.0, v_max: 20.0 };
        let a = plan(-10.0).tiles(&tables, sn, len(sn), 5.0, 0.5);
        let b = plan(-10.0).tiles(&tables, we, len(we), 5.0, 0.5);
        assert!(a.iter().any(|t| b.contains(t)));
        // Same plan delayed by several seconds no longer collides.
        let c = plan(-60.0).tiles(&tables, we, len(we), 5.0, 0.5);
        assert!(!a.iter().any(|t| c.contains(t)));
        // Every tile of a plan lies on the movement's swept cells.
        let swept: Vec<u32> = tables.swept(sn).iter().map(|c| tables.grid.index(*c) as u32).collect();
        assert!(a.iter().all(|(c, _)| swept.contains(c)));
    }
}
