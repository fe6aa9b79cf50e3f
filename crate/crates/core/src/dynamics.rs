//! Vehicle kinematics, gap keeping and platoon bookkeeping.
//!
//! Vehicles are points on their movement path: `pos` is the arc length of
//! the front bumper, negative upstream of the stop line. All integration is
//! exact for piecewise-constant acceleration, including the instant a
//! vehicle comes to rest or reaches the speed limit inside a step.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geometry::{self, MovementId, Path, Point, Rect};
use crate::{Error, Result};

/// Speed below which a vehicle upstream of the stop line counts as waiting.
pub const WAIT_SPEED: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VehicleId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PlatoonId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub length: f64,
    pub width: f64,
    pub accel_max: f64,
    pub speed_limit: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self { length: 5.0, width: 1.8, accel_max: 5.0, speed_limit: 20.0 }
    }
}

/// Fuel-rate surrogate: `c0 + c1 v + c2 v max(a, 0)` mL/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuelModel {
    pub idle: f64,
    pub per_speed: f64,
    pub per_power: f64,
}

impl Default for FuelModel {
    fn default() -> Self {
        Self { idle: 1.0, per_speed: 0.2, per_power: 0.1 }
    }
}

impl FuelModel {
    /// Fuel in mL burned over `dt` seconds at speed `v` and acceleration `a`.
    pub fn increment(&self, v: f64, a: f64, dt: f64) -> f64 {
        dt * (self.idle + self.per_speed * v + self.per_power * v * a.max(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: VehicleId,
    pub movement: MovementId,
    /// Front-bumper arc position on the movement path.
    pub pos: f64,
    pub speed: f64,
    pub accel: f64,
    pub length: f64,
    pub width: f64,
    pub accel_max: f64,
    /// Time the vehicle entered the formation zone.
    pub entry_time: f64,
    pub exit_time: Option<f64>,
    /// Cumulative waiting time upstream of the stop line.
    pub waiting: f64,
    /// Cumulative fuel, mL.
    pub fuel: f64,
    /// Cumulative distance travelled.
    pub odometer: f64,
    /// Cumulative time in the network.
    pub age: f64,
    /// Removed from the zone by deadlock resolution.
    pub removed: bool,
}

impl Vehicle {
    pub fn new(id: VehicleId, movement: MovementId, params: &VehicleParams, pos: f64, speed: f64, time: f64) -> Self {
        Self {
            id,
            movement,
            pos,
            speed,
            accel: 0.0,
            length: params.length,
            width: params.width,
            accel_max: params.accel_max,
            entry_time: time,
            exit_time: None,
            waiting: 0.0,
            fuel: 0.0,
            odometer: 0.0,
            age: 0.0,
            removed: false,
        }
    }

    pub fn tail(&self) -> f64 {
        self.pos - self.length
    }

    pub fn is_waiting(&self) -> bool {
        self.speed < WAIT_SPEED && self.pos <= 0.0
    }

    pub fn body(&self, path: &Path) -> Rect {
        geometry::body_rect(path, self.pos, self.length, self.width)
    }

    pub fn pose(&self, path: &Path) -> KinematicPose {
        let p = path.pose_at(self.pos - self.length / 2.0);
        KinematicPose { x: p.point.x, y: p.point.y, heading: p.heading, speed: self.speed, accel: self.accel }
    }
}

/// Displacement and end speed after `dt` at acceleration `a`, with the
/// speed held inside `[0, v_max]`.
pub fn travel(v: f64, a: f64, dt: f64, v_max: f64) -> (f64, f64) {
    if a < 0.0 {
        let t_stop = v / -a;
        if t_stop < dt {
            return (v * t_stop / 2.0, 0.0);
        }
    } else if a > 0.0 && v < v_max {
        let t_cap = (v_max - v) / a;
        if t_cap < dt {
            let d = v * t_cap + 0.5 * a * t_cap * t_cap + v_max * (dt - t_cap);
            return (d, v_max);
        }
    } else if a > 0.0 {
        return (v * dt, v);
    }
    let nv = (v + a * dt).clamp(0.0, v_max);
    (v * dt + 0.5 * a * dt * dt, nv)
}

/// Advance one vehicle by `dt` under `accel`, updating its accumulators.
pub fn step_vehicle(vehicle: &mut Vehicle, accel: f64, dt: f64, v_max: f64, fuel: &FuelModel) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::Config(alloc::format!("time step must be positive, got {dt}")));
    }
    let a = accel.clamp(-vehicle.accel_max, vehicle.accel_max);
    let (d, nv) = travel(vehicle.speed, a, dt, v_max);
    let mean_v = d / dt;
    vehicle.fuel += fuel.increment(mean_v, a, dt);
    vehicle.pos += d;
    vehicle.odometer += d;
    vehicle.speed = nv;
    vehicle.accel = a;
    vehicle.age += dt;
    if vehicle.is_waiting() {
        vehicle.waiting += dt;
    }
    Ok(())
}

/// Largest acceleration in `[-a_max, a_max]` after which the vehicle can
/// still stop within `limit` meters of its current position. Returns
/// `-a_max` when even full braking overshoots.
pub fn max_accel_within(v: f64, limit: f64, a_max: f64, v_max: f64, dt: f64) -> f64 {
    max_accel_bounded(v, limit, f64::INFINITY, a_max, v_max, dt)
}

/// Like [`max_accel_within`] with an additional cap `move_limit` on the
/// distance covered during this step.
pub fn max_accel_bounded(v: f64, stop_limit: f64, move_limit: f64, a_max: f64, v_max: f64, dt: f64) -> f64 {
    const SLACK: f64 = 1e-9;
    let ok = |a: f64| {
        let (d, nv) = travel(v, a, dt, v_max);
        d <= move_limit + SLACK && d + nv * nv / (2.0 * a_max) <= stop_limit + SLACK
    };
    if ok(a_max) {
        return a_max;
    }
    if !ok(-a_max) {
        return -a_max;
    }
    let (mut lo, mut hi) = (-a_max, a_max);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Gap-keeping acceleration behind a leader that has already been moved
/// for this step: its rear bumper ends the step `gap` meters ahead of the
/// follower's front, at `leader_speed`. The result keeps the follower at
/// least `min_gap` behind at the end of the step and able to stop
/// `min_gap` short of wherever the leader could stop afterwards.
pub fn follow_gap_accel(follower: &Vehicle, gap: f64, leader_speed: f64, min_gap: f64, v_max: f64, dt: f64) -> f64 {
    let a_max = follower.accel_max;
    if gap < min_gap {
        return -a_max;
    }
    let stop_limit = gap + leader_speed * leader_speed / (2.0 * a_max) - min_gap;
    max_accel_bounded(follower.speed, stop_limit, gap - min_gap, a_max, v_max, dt)
}

/// Acceleration that approaches `v_max` as fast as allowed.
pub fn free_accel(v: f64, a_max: f64, v_max: f64, dt: f64) -> f64 {
    ((v_max - v) / dt).clamp(-a_max, a_max)
}

/// Planar pose with the motion state used for projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicPose {
    pub x: f64,
    pub y: f64,
    /// Clockwise from north.
    pub heading: f64,
    pub speed: f64,
    pub accel: f64,
}

/// Location after `dt` keeping heading and acceleration fixed.
pub fn project_desired_location(pose: &KinematicPose, dt: f64) -> Point {
    let dist = pose.speed * dt + 0.5 * pose.accel * dt * dt;
    Point::new(pose.x + dist * libm::sin(pose.heading), pose.y + dist * libm::cos(pose.heading))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlatoonStatus {
    /// Collecting and arranging members in the formation zone.
    Forming,
    /// Formed and released, waiting for its movement to be free.
    Ready,
    /// Admitted to the coordination zone.
    Active,
    Exited,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Platoon {
    pub id: PlatoonId,
    pub movement: MovementId,
    /// Leader first.
    pub members: Vec<VehicleId>,
    /// Commanded size; members may still be arriving.
    pub target_size: usize,
    pub status: PlatoonStatus,
    pub desired_headway: f64,
    pub formed_at: Option<f64>,
    pub activated_at: Option<f64>,
}

impl Platoon {
    pub fn leader(&self) -> VehicleId {
        self.members[0]
    }

    pub fn last(&self) -> VehicleId {
        *self.members.last().expect("platoons are never empty")
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn is_full(&self) -> bool {
        self.members.len() >= self.target_size
    }
}

/// Start a platoon from the head of a lane queue. Takes up to `size`
/// vehicles; the rest join later as they arrive.
pub fn form_platoon(id: PlatoonId, movement: MovementId, lane_queue: &[VehicleId], size: usize, desired_headway: f64) -> Result<Platoon> {
    if size == 0 {
        return Err(Error::Domain("platoon size must be at least 1".into()));
    }
    if lane_queue.is_empty() {
        return Err(Error::Domain("no vehicle available to lead a platoon".into()));
    }
    let take = size.min(lane_queue.len());
    Ok(Platoon {
        id,
        movement,
        members: lane_queue[..take].to_vec(),
        target_size: size,
        status: PlatoonStatus::Forming,
        desired_headway,
        formed_at: None,
        activated_at: None,
    })
}

/// Tolerance on member gaps around the desired headway.
pub const FORMED_GAP_TOL: f64 = 0.1;
/// Tolerance on member speed spread.
pub const FORMED_SPEED_TOL: f64 = 0.01;

/// Number of leading members (at least the leader) that are arranged:
/// consecutive gaps within tolerance of `desired_headway` and speeds within
/// tolerance of the leader.
pub fn formed_prefix(members: &[&Vehicle], desired_headway: f64) -> usize {
    if members.is_empty() {
        return 0;
    }
    let lead_speed = members[0].speed;
    let mut n = 1;
    for w in members.windows(2) {
        let gap = w[0].tail() - w[1].pos;
        if (gap - desired_headway).abs() > FORMED_GAP_TOL || (w[1].speed - lead_speed).abs() > FORMED_SPEED_TOL {
            break;
        }
        n += 1;
    }
    n
}

/// Whether the platoon is complete and rigid.
pub fn is_formed(platoon: &Platoon, members: &[&Vehicle]) -> bool {
    platoon.is_full() && formed_prefix(members, platoon.desired_headway) == members.len()
}

/// Body rectangles of all members.
pub fn platoon_footprint(members: &[&Vehicle], path: &Path) -> Vec<Rect> {
    members.iter().map(|v| v.body(path)).collect()
}

/// Bumper-to-bumper length of a platoon.
pub fn platoon_length(lengths: &[f64], desired_headway: f64) -> f64 {
    if lengths.is_empty() {
        return 0.0;
    }
    lengths.iter().sum::<f64>() + (lengths.len() - 1) as f64 * desired_headway
}
