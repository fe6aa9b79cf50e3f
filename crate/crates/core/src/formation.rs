//! Platoon-size agent: action bound, reward terms and state canvas.
//!
//! The canvas is a square of `CANVAS` cells, one lane width per cell. The
//! coordination zone sits in the middle and each approach keeps its
//! `APPROACH_CELLS` cells nearest the stop line; anything farther out is
//! cropped from the image (but still counts in rewards).

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::drl::{Input, Shape};
use crate::geometry::{body_rect, occupied_cells, Cell, Grid, IntersectionLayout, MovementId, Rect};
use crate::{Error, Result};

/// Canvas side in cells.
pub const CANVAS: usize = 160;
/// Approach cells kept on each side of the zone for a 6-cell zone.
pub const APPROACH_CELLS: usize = 77;
/// Input channels: location, speed, time-to-join, target lane.
pub const CHANNELS: usize = 4;

/// Largest `n` such that `n` vehicles of `vehicle_length` at bumper gap
/// `headway` fit in `formation_length`.
pub fn max_platoon_size(vehicle_length: f64, headway: f64, formation_length: f64) -> Result<usize> {
    max_platoon_size_of(core::iter::repeat(vehicle_length), headway, formation_length)
}

/// [`max_platoon_size`] for a queue of possibly different lengths.
pub fn max_platoon_size_of(lengths: impl IntoIterator<Item = f64>, headway: f64, formation_length: f64) -> Result<usize> {
    if !(formation_length > 0.0) || !(headway >= 0.0) {
        return Err(Error::Config("formation length must be positive and headway non-negative".into()));
    }
    let mut total = 0.0;
    let mut n = 0;
    for (i, l) in lengths.into_iter().enumerate() {
        let next = total + l + if i > 0 { headway } else { 0.0 };
        if next > formation_length + 1e-9 {
            break;
        }
        total = next;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Config(alloc::format!("formation length {formation_length} m holds no vehicle")));
    }
    Ok(n)
}

/// `(W / T_m)^2`; exceeds 1 exactly when the wait is longer than `T_m`.
pub fn penalized_waiting(waiting: f64, threshold: f64) -> f64 {
    let r = waiting / threshold;
    r * r
}

/// `1 - v / v_max`.
pub fn delay(mean_speed: f64, v_max: f64) -> Result<f64> {
    if mean_speed > v_max * (1.0 + 1e-9) || mean_speed < 0.0 {
        return Err(Error::Domain(alloc::format!("mean speed {mean_speed} outside [0, {v_max}]")));
    }
    Ok((1.0 - mean_speed / v_max).clamp(0.0, 1.0))
}

/// Raw per-vehicle factors over one action window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleTerms {
    /// Cumulative waiting time at the end of the window, s.
    pub waiting: f64,
    /// Mean speed over the window, m/s.
    pub mean_speed: f64,
    /// Fuel burned during the window, mL.
    pub fuel: f64,
}

impl VehicleTerms {
    /// Penalized waiting, delay and fuel.
    pub fn factors(&self, threshold: f64, v_max: f64) -> Result<[f64; 3]> {
        Ok([penalized_waiting(self.waiting, threshold), delay(self.mean_speed, v_max)?, self.fuel])
    }
}

/// Per-factor min/max scaling learned from a random-action run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardNormalizer {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub calibrated: bool,
}

impl Default for RewardNormalizer {
    fn default() -> Self {
        Self { min: [f64::INFINITY; 3], max: [f64::NEG_INFINITY; 3], calibrated: false }
    }
}

impl RewardNormalizer {
    /// Widens the bounds to include `factors`.
    pub fn record(&mut self, factors: &[f64; 3]) {
        for k in 0..3 {
            self.min[k] = self.min[k].min(factors[k]);
            self.max[k] = self.max[k].max(factors[k]);
        }
    }

    /// Freezes the bounds; fails if nothing was recorded.
    pub fn finish(&mut self) -> Result<()> {
        if self.min.iter().chain(&self.max).any(|v| !v.is_finite()) {
            return Err(Error::Uncalibrated);
        }
        self.calibrated = true;
        Ok(())
    }

    /// Scales each factor to `[0, 1]`, clamping values outside the bounds.
    pub fn normalize(&self, factors: &[f64; 3]) -> Result<[f64; 3]> {
        if !self.calibrated {
            return Err(Error::Uncalibrated);
        }
        let mut out = [0.0; 3];
        for k in 0..3 {
            let span = self.max[k] - self.min[k];
            out[k] = if span > 0.0 { ((factors[k] - self.min[k]) / span).clamp(0.0, 1.0) } else { 0.0 };
        }
        Ok(out)
    }
}

/// Weighted mean of normalized factors over the `m` vehicles of an action.
pub fn formation_reward(weights: &[f64; 3], normalized: &[[f64; 3]]) -> Result<f64> {
    if normalized.is_empty() {
        return Err(Error::Domain("reward over an empty vehicle set".into()));
    }
    let mut sums = [0.0; 3];
    for f in normalized {
        for k in 0..3 {
            sums[k] += f[k];
        }
    }
    Ok((weights[0] * sums[0] + weights[1] * sums[1] + weights[2] * sums[2]) / normalized.len() as f64)
}

/// Seconds to cover `distance` from `speed` accelerating at `a_max` up to
/// `v_max`.
pub fn time_to_cover(distance: f64, speed: f64, a_max: f64, v_max: f64) -> f64 {
    if distance <= 0.0 {
        return 0.0;
    }
    let v = speed.min(v_max);
    let t_cap = (v_max - v) / a_max;
    let d_cap = v * t_cap + 0.5 * a_max * t_cap * t_cap;
    if distance <= d_cap {
        (-v + libm::sqrt(v * v + 2.0 * a_max * distance)) / a_max
    } else {
        t_cap + (distance - d_cap) / v_max
    }
}

/// One vehicle as seen by the canvas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanvasVehicle {
    pub body: Rect,
    pub speed: f64,
    /// Time to join, s (before normalization).
    pub time_to_join: f64,
}

/// Rasterizes the network into the formation-layer input image.
#[derive(Debug, Clone, PartialEq)]
pub struct FormationEncoder {
    pub grid: Grid,
    pub v_max: f64,
    pub wait_threshold: f64,
    lane_cells: Vec<Vec<Cell>>,
}

impl FormationEncoder {
    pub fn new(layout: &IntersectionLayout, wait_threshold: f64) -> Self {
        let cell = layout.lane_width;
        let zone_cells = libm::round(layout.zone_side / cell) as usize;
        let margin = (CANVAS.saturating_sub(zone_cells)) / 2;
        let grid = Grid {
            left: -(margin as f64) * cell,
            top: layout.zone_side + margin as f64 * cell,
            cell_size: cell,
            rows: CANVAS,
            cols: CANVAS,
        };
        let strip = margin as f64 * cell;
        let lane_cells = MovementId::all()
            .map(|m| {
                let path = layout.movement(m).path;
                let rect = body_rect(&path, 0.0, strip, cell * (1.0 - 1e-6));
                occupied_cells(&[rect], &grid)
            })
            .collect();
        Self { grid, v_max: layout.speed_limit, wait_threshold, lane_cells }
    }

    pub fn shape(&self) -> Shape {
        Shape::new(CANVAS, CANVAS, CHANNELS)
    }

    /// Cells of the approach lane of `m` shown in the target-lane channel.
    pub fn lane_cells(&self, m: MovementId) -> &[Cell] {
        &self.lane_cells[m.index()]
    }

    /// Builds the image. Vehicles listed earlier win shared cells.
    pub fn encode(&self, vehicles: &[CanvasVehicle], target: MovementId) -> Input {
        let shape = self.shape();
        let mut entries: Vec<(u32, f64)> = Vec::new();
        let mut taken = alloc::collections::BTreeSet::new();
        for v in vehicles {
            for c in occupied_cells(&[v.body], &self.grid) {
                if !taken.insert((c.row, c.col)) {
                    continue;
                }
                let (r, col) = (c.row as usize, c.col as usize);
                entries.push((shape.index(r, col, 0) as u32, 1.0));
                let s = (v.speed / self.v_max).clamp(0.0, 1.0);
                if s > 0.0 {
                    entries.push((shape.index(r, col, 1) as u32, s));
                }
                let t = (v.time_to_join / self.wait_threshold).clamp(0.0, 1.0);
                if t > 0.0 {
                    entries.push((shape.index(r, col, 2) as u32, t));
                }
            }
        }
        for c in self.lane_cells(target) {
            entries.push((shape.index(c.row as usize, c.col as usize, 3) as u32, 1.0));
        }
        entries.sort_unstable_by_key(|e| e.0);
        Input::Sparse { shape, entries }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Approach, Turn};
    use proptest::prelude::*;

    #[test]
    fn platoon_size_bound() {
        assert_eq!(max_platoon_size(5.0, 1.0, 5.0).unwrap(), 1);
        assert_eq!(max_platoon_size(5.0, 1.0, 11.0).unwrap(), 2);
        assert_eq!(max_platoon_size(5.0, 1.0, 200.0).unwrap(), 33);
        assert!(matches!(max_platoon_size(5.0, 1.0, 4.0), Err(Error::Config(_))));
        // Brute force: grow n while L_n fits.
        let mut n = 0;
        while 5.0 * (n + 1) as f64 + n as f64 <= 200.0 {
            n += 1;
        }
        assert_eq!(n, 33);
        assert_eq!(max_platoon_size_of([4.0, 6.0, 5.0, 5.0], 1.0, 17.0).unwrap(), 3);
        assert_eq!(max_platoon_size_of([4.0, 6.0, 5.0, 5.0], 1.0, 16.5).unwrap(), 2);
    }

    #[test]
    fn reward_terms() {
        assert_eq!(penalized_waiting(0.0, 60.0), 0.0);
        assert_eq!(penalized_waiting(60.0, 60.0), 1.0);
        assert_eq!(penalized_waiting(30.0, 60.0), 0.25);
        assert!(penalized_waiting(61.0, 60.0) > 1.0);
        assert_eq!(delay(20.0, 20.0).unwrap(), 0.0);
        assert_eq!(delay(0.0, 20.0).unwrap(), 1.0);
        assert_eq!(delay(15.0, 20.0).unwrap(), 0.25);
        assert!(delay(21.0, 20.0).is_err());
    }

    #[test]
    fn reward_examples() {
        let w = [-1.0; 3];
        assert_eq!(formation_reward(&w, &[[0.0; 3]]).unwrap(), 0.0);
        // Two vehicles with factor sums 0.5, 0.5, 1.0.
        let r = formation_reward(&w, &[[0.25, 0.5, 0.5], [0.25, 0.0, 0.5]]).unwrap();
        assert!((r + 1.0).abs() < 1e-12);
        assert!(formation_reward(&w, &[]).is_err());
    }

    #[test]
    fn normalizer_requires_calibration() {
        let mut n = RewardNormalizer::default();
        assert_eq!(n.normalize(&[0.0; 3]), Err(Error::Uncalibrated));
        assert_eq!(n.finish(), Err(Error::Uncalibrated));
        n.record(&[0.0, 0.2, 10.0]);
        n.record(&[2.0, 0.6, 30.0]);
        n.finish().unwrap();
        assert_eq!(n.normalize(&[1.0, 0.4, 20.0]).unwrap(), [0.5, 0.5000000000000001, 0.5]);
        assert_eq!(n.normalize(&[5.0, -1.0, 20.0]).unwrap()[..2], [1.0, 0.0]);
    }

    #[test]
    fn ttj_kinematics() {
        assert_eq!(time_to_cover(0.0, 3.0, 5.0, 20.0), 0.0);
        // From rest: 10 m at 5 m/s^2 takes 2 s.
        assert!((time_to_cover(10.0, 0.0, 5.0, 20.0) - 2.0).abs() < 1e-12);
        // Already at the limit.
        assert!((time_to_cover(100.0, 20.0, 5.0, 20.0) - 5.0).abs() < 1e-12);
        // 40 m to reach 20 m/s in 4 s, then 60 m more at 20 m/s.
        assert!((time_to_cover(100.0, 0.0, 5.0, 20.0) - 7.0).abs() < 1e-12);
    }

    fn encoder() -> FormationEncoder {
        FormationEncoder::new(&IntersectionLayout::default(), 60.0)
    }

    #[test]
    fn canvas_geometry() {
        let e = encoder();
        assert_eq!((e.grid.left, e.grid.top), (-192.5, 207.5));
        // The zone's top-left cell.
        assert_eq!(e.grid.cell_of(crate::geometry::Point::new(0.1, 14.9)), Some(Cell::new(77, 77)));
        for m in MovementId::all() {
            assert_eq!(e.lane_cells(m).len(), APPROACH_CELLS, "{m}");
        }
    }

    #[test]
    fn empty_network_has_only_the_lane_mask() {
        let e = encoder();
        let m = MovementId::new(Approach::South, Turn::Straight);
        let Input::Sparse { entries, .. } = e.encode(&[], m) else { unreachable!() };
        assert_eq!(entries.len(), APPROACH_CELLS);
        assert!(entries.iter().all(|(i, v)| *i as usize % CHANNELS == 3 && *v == 1.0));
    }

    #[test]
    fn full_speed_vehicle_marks_location_and_speed() {
        let e = encoder();
        let layout = IntersectionLayout::default();
        let m = MovementId::new(Approach::West, Turn::Left);
        let path = layout.movement(m).path;
        let body = body_rect(&path, -20.0, 5.0, 1.8);
        let img = e.encode(&[CanvasVehicle { body, speed: 20.0, time_to_join: 0.0 }], m).to_dense();
        let mut cells = 0;
        for r in 0..CANVAS {
            for c in 0..CANVAS {
                let loc = img.get(r, c, 0);
                if loc != 0.0 {
                    cells += 1;
                    assert_eq!(loc, 1.0);
                    assert_eq!(img.get(r, c, 1), 1.0);
                }
                assert_eq!(img.get(r, c, 2), 0.0);
            }
        }
        assert!((2..=3).contains(&cells), "{cells}");
    }

    proptest! {
        #[test]
        fn encoded_position_round_trips(k in 0usize..12, front in -185.0f64..10.0) {
            let e = encoder();
            let layout = IntersectionLayout::default();
            let m = MovementId::all().nth(k).unwrap();
            let path = layout.movement(m).path;
            let body = body_rect(&path, front, 5.0, 1.8);
            let img = e.encode(&[CanvasVehicle { body, speed: 1.0, time_to_join: 1.0 }], m).to_dense();
            let mut sum = (0.0, 0.0, 0.0);
            for r in 0..CANVAS {
                for c in 0..CANVAS {
                    if img.get(r, c, 0) > 0.0 {
                        sum.0 += r as f64;
                        sum.1 += c as f64;
                        sum.2 += 1.0;
                    }
                }
            }
            prop_assert!(sum.2 > 0.0);
            let (row, col) = (sum.0 / sum.2, sum.1 / sum.2);
            let x = e.grid.left + (col + 0.5) * e.grid.cell_size;
            let y = e.grid.top - (row + 0.5) * e.grid.cell_size;
            let d = libm::hypot(x - body.center.x, y - body.center.y);
            prop_assert!(d <= e.grid.cell_size * core::f64::consts::SQRT_2, "{} vs {:?}", d, body.center);
        }
    }
}
