//! Simulation, learning and baseline parameters.

use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::drl::{AdamConfig, Hyperparams};
use crate::dynamics::{FuelModel, VehicleParams};
use crate::geometry::IntersectionLayout;
use crate::{Error, Result};

/// Control strategy driving an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// Learned platoon sizes and learned priorities.
    CoorPlt,
    /// Fixed platoon size with learned priorities.
    Fp,
    /// Learned platoon sizes with uniformly random priorities.
    Rc,
    /// Fixed-time four-phase signal.
    Webster,
    /// Per-vehicle first-come-first-served tile reservation.
    FcfsReservation,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [Self::CoorPlt, Self::Fp, Self::Rc, Self::Webster, Self::FcfsReservation];

    pub fn name(self) -> &'static str {
        match self {
            Self::CoorPlt => "coor-plt",
            Self::Fp => "fp",
            Self::Rc => "rc",
            Self::Webster => "webster",
            Self::FcfsReservation => "fcfs-reservation",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy {s:?}; expected one of coor-plt, fp, rc, webster, fcfs-reservation")))
    }

    /// Whether platoon sizes come from the formation agent.
    pub fn learned_sizes(self) -> bool {
        matches!(self, Self::CoorPlt | Self::Rc)
    }

    /// Whether priorities come from the coordination agent.
    pub fn learned_priorities(self) -> bool {
        matches!(self, Self::CoorPlt | Self::Fp)
    }

    /// Whether the policy uses platoons and pairwise priorities at all.
    pub fn platooning(self) -> bool {
        matches!(self, Self::CoorPlt | Self::Fp | Self::Rc)
    }
}

/// How the formation canvas treats approaches longer than it can hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CropPolicy {
    /// Keep the cells nearest the coordination zone, drop the far tail.
    Nearest,
}

/// Fixed-time signal parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WebsterConfig {
    /// All-red lost time per phase, s.
    pub lost_time_per_phase: f64,
    /// Saturation flow per lane, veh/h.
    pub saturation_flow: f64,
    pub min_cycle: f64,
    pub max_cycle: f64,
}

impl Default for WebsterConfig {
    fn default() -> Self {
        Self { lost_time_per_phase: 4.0, saturation_flow: 1800.0, min_cycle: 30.0, max_cycle: 120.0 }
    }
}

/// Every tunable of an experiment. Defaults reproduce the reference
/// parameter table; [`SimConfig::desk`] is the reduced training preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Vehicle length l_c, m.
    pub vehicle_length: f64,
    /// Vehicle width w_c, m.
    pub vehicle_width: f64,
    /// Lane width, m.
    pub lane_width: f64,
    /// Side S of the coordination zone, m.
    pub zone_side: f64,
    /// Formation zone length L, m.
    pub formation_length: f64,
    /// Acceleration and deceleration bound, m/s^2.
    pub accel_max: f64,
    /// Speed limit, m/s.
    pub speed_limit: f64,
    /// Bumper gap d_h inside a platoon, m.
    pub platoon_headway: f64,
    /// Minimum bumper gap between vehicles of different platoons, m.
    pub min_headway: f64,
    /// Episode duration T, s.
    pub duration: f64,
    /// Training episodes M.
    pub episodes: u64,
    /// Tabular temporal-difference rate.
    pub td_rate: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Decisions observed before training starts.
    pub observe: u64,
    /// Gradient steps between target syncs.
    pub target_sync: u64,
    /// Waiting threshold T_m, s.
    pub wait_threshold: f64,
    /// Weights on waiting, delay and fuel.
    pub reward_weights: [f64; 3],
    pub deadlock_penalty: f64,
    /// Coordination grid granularity g.
    pub granularity: usize,
    /// Simulation step, s.
    pub dt: f64,
    pub seed: u64,
    /// Demand condition 1 (moderate), 2 (high) or 3 (moderate then high).
    pub condition: u8,
    /// Multiplier on the reference flow table.
    pub flow_scale: f64,
    pub policy: PolicyKind,
    /// Largest coordinated set.
    pub k_max: usize,
    pub crop: CropPolicy,
    pub fuel: FuelModel,
    pub adam: AdamConfig,
    /// Loss above which training aborts.
    pub divergence_limit: f64,
    /// Random-action episodes used to calibrate reward normalization.
    pub calibration_episodes: u64,
    /// Checkpoint period in episodes.
    pub checkpoint_every: u64,
    /// Platoon size of the fixed-size variant.
    pub fixed_platoon_size: usize,
    pub webster: WebsterConfig,
    /// Extra reservation horizon for first-come-first-served, s.
    pub fcfs_buffer: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let h = Hyperparams::default();
        Self {
            vehicle_length: 5.0,
            vehicle_width: 1.8,
            lane_width: 2.5,
            zone_side: 15.0,
            formation_length: 200.0,
            accel_max: 5.0,
            speed_limit: 20.0,
            platoon_headway: 1.0,
            min_headway: 1.5,
            duration: 3600.0,
            episodes: 100,
            td_rate: h.td_rate,
            gamma: h.gamma,
            epsilon: h.epsilon,
            replay_capacity: h.replay_capacity,
            batch_size: h.batch_size,
            observe: h.observe,
            target_sync: h.target_sync,
            wait_threshold: 60.0,
            reward_weights: [-1.0, -1.0, -1.0],
            deadlock_penalty: -10.0,
            granularity: 12,
            dt: 1.0,
            seed: 0,
            condition: 2,
            flow_scale: 1.0,
            policy: PolicyKind::CoorPlt,
            k_max: 4,
            crop: CropPolicy::Nearest,
            fuel: FuelModel::default(),
            adam: h.adam,
            divergence_limit: h.divergence_limit,
            calibration_episodes: 10,
            checkpoint_every: 10,
            fixed_platoon_size: 3,
            webster: WebsterConfig::default(),
            fcfs_buffer: 2.0,
        }
    }
}

impl SimConfig {
    /// Reduced preset: quarter flows, 600 s episodes, 60 episodes.
    pub fn desk() -> Self {
        Self { flow_scale: 0.25, duration: 600.0, episodes: 60, ..Self::default() }
    }

    pub fn layout(&self) -> IntersectionLayout {
        IntersectionLayout {
            lane_width: self.lane_width,
            zone_side: self.zone_side,
            formation_length: self.formation_length,
            speed_limit: self.speed_limit,
        }
    }

    pub fn vehicle(&self) -> VehicleParams {
        VehicleParams {
            length: self.vehicle_length,
            width: self.vehicle_width,
            accel_max: self.accel_max,
            speed_limit: self.speed_limit,
        }
    }

    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            td_rate: self.td_rate,
            gamma: self.gamma,
            epsilon: self.epsilon,
            batch_size: self.batch_size,
            observe: self.observe,
            target_sync: self.target_sync,
            replay_capacity: self.replay_capacity,
            adam: self.adam,
            divergence_limit: self.divergence_limit,
        }
    }

    /// Checks ranges and geometric consistency. Returns human-readable
    /// warnings for legal but unusual settings.
    pub fn validate(&self) -> Result<alloc::vec::Vec<String>> {
        let mut warnings = alloc::vec::Vec::new();
        let positive = [
            ("vehicle_length", self.vehicle_length),
            ("vehicle_width", self.vehicle_width),
            ("lane_width", self.lane_width),
            ("zone_side", self.zone_side),
            ("formation_length", self.formation_length),
            ("accel_max", self.accel_max),
            ("speed_limit", self.speed_limit),
            ("duration", self.duration),
            ("dt", self.dt),
            ("wait_threshold", self.wait_threshold),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.platoon_headway >= 0.0) || !(self.min_headway >= 0.0) {
            return Err(Error::Config("headways must be non-negative".into()));
        }
        if self.vehicle_width > self.lane_width {
            return Err(Error::Config("vehicles are wider than their lane".into()));
        }
        if !matches!(self.granularity, 6 | 12 | 24) {
            return Err(Error::Config(format!("granularity must be 6, 12 or 24, got {}", self.granularity)));
        }
        if !matches!(self.condition, 1..=3) {
            return Err(Error::Config(format!("condition must be 1, 2 or 3, got {}", self.condition)));
        }
        if !(self.flow_scale >= 0.0) {
            return Err(Error::Config("flow_scale must be non-negative".into()));
        }
        if !(2..=4).contains(&self.k_max) {
            return Err(Error::Config(format!("k_max must lie in 2..=4, got {}", self.k_max)));
        }
        if self.fixed_platoon_size == 0 {
            return Err(Error::Config("fixed_platoon_size must be at least 1".into()));
        }
        if self.deadlock_penalty > 0.0 {
            warnings.push(format!("deadlock_penalty {} rewards deadlocks", self.deadlock_penalty));
        }
        if self.reward_weights.iter().any(|w| *w > 0.0) {
            warnings.push("positive reward weights reward waiting, delay or fuel".into());
        }
        if !(self.webster.lost_time_per_phase >= 0.0 && self.webster.saturation_flow > 0.0 && self.webster.min_cycle > 0.0 && self.webster.max_cycle >= self.webster.min_cycle) {
            return Err(Error::Config("inconsistent signal timing parameters".into()));
        }
        if !(self.fcfs_buffer >= 0.0) {
            return Err(Error::Config("fcfs_buffer must be non-negative".into()));
        }
        self.layout().validate()?;
        if !self.layout().zone_matches_lanes() {
            warnings.push(format!("zone side {} differs from six lane widths", self.zone_side));
        }
        crate::formation::max_platoon_size(self.vehicle_length, self.platoon_headway, self.formation_length)?;
        self.hyperparams().validate()?;
        Ok(warnings)
    }
}
