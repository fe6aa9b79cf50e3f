//! Demand profiles, Poisson arrivals and the vehicle request protocol.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleId;
use crate::geometry::{Approach, MovementId, Turn};
use crate::rng::{self, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tier {
    Moderate,
    High,
}

/// Flow rate per movement, veh/h, indexed by [`MovementId`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    pub rates: [f64; MovementId::COUNT],
}

/// `(origin, destination, moderate, high)` rows of the reference demand.
const REFERENCE_FLOWS: [(Approach, Approach, f64, f64); MovementId::COUNT] = {
    use Approach::*;
    [
        (North, South, 500.0, 1000.0),
        (North, East, 400.0, 800.0),
        (North, West, 300.0, 600.0),
        (South, North, 450.0, 900.0),
        (South, East, 600.0, 1200.0),
        (South, West, 300.0, 600.0),
        (East, North, 200.0, 400.0),
        (East, South, 400.0, 800.0),
        (East, West, 400.0, 800.0),
        (West, North, 500.0, 1000.0),
        (West, South, 200.0, 400.0),
        (West, East, 300.0, 600.0),
    ]
};

fn movement_to(origin: Approach, destination: Approach) -> MovementId {
    let turn = Turn::ALL
        .into_iter()
        .find(|&t| origin.destination(t) == destination)
        .expect("every origin reaches the three other sides");
    MovementId::new(origin, turn)
}

impl DemandProfile {
    pub fn zero() -> Self {
        Self { rates: [0.0; MovementId::COUNT] }
    }

    /// Reference tier scaled by `scale`.
    pub fn tier(tier: Tier, scale: f64) -> Self {
        let mut rates = [0.0; MovementId::COUNT];
        for (o, d, moderate, high) in REFERENCE_FLOWS {
            let r = match tier {
                Tier::Moderate => moderate,
                Tier::High => high,
            };
            rates[movement_to(o, d).index()] = r * scale;
        }
        Self { rates }
    }

    pub fn rate(&self, m: MovementId) -> f64 {
        self.rates[m.index()]
    }

    pub fn validate(&self) -> Result<()> {
        if self.rates.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(Error::Config("flow rates must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Piecewise-constant demand over an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSchedule {
    /// `(start, end, profile)`, contiguous from 0.
    pub pieces: Vec<(f64, f64, DemandProfile)>,
}

impl ConditionSchedule {
    /// Preset conditions 1 (moderate), 2 (high) and 3 (moderate then high
    /// from mid-episode) over `[0, duration]`.
    pub fn preset(condition: u8, duration: f64, scale: f64) -> Result<Self> {
        let m = DemandProfile::tier(Tier::Moderate, scale);
        let h = DemandProfile::tier(Tier::High, scale);
        let pieces = match condition {
            1 => alloc::vec![(0.0, duration, m)],
            2 => alloc::vec![(0.0, duration, h)],
            3 => alloc::vec![(0.0, duration / 2.0, m), (duration / 2.0, duration, h)],
            c => return Err(Error::Config(alloc::format!("unknown condition {c}"))),
        };
        Ok(Self { pieces })
    }

    pub fn constant(profile: DemandProfile, duration: f64) -> Self {
        Self { pieces: alloc::vec![(0.0, duration, profile)] }
    }

    /// Checks the pieces tile `[0, duration]` without gaps or overlaps.
    pub fn validate(&self, duration: f64) -> Result<()> {
        let mut t = 0.0;
        for (start, end, p) in &self.pieces {
            if (*start - t).abs() > 1e-9 || end <= start {
                return Err(Error::Config("demand schedule has a gap or overlap".into()));
            }
            p.validate()?;
            t = *end;
        }
        if t + 1e-9 < duration {
            return Err(Error::Config("demand schedule ends before the episode".into()));
        }
        Ok(())
    }

    /// Profile in force at time `t` (the last piece extends past its end).
    pub fn profile_at(&self, t: f64) -> &DemandProfile {
        self.pieces
            .iter()
            .find(|(s, e, _)| t >= *s && t < *e)
            .map(|(_, _, p)| p)
            .unwrap_or(&self.pieces.last().expect("schedules are never empty").2)
    }
}

/// Per-movement Poisson arrival streams.
#[derive(Debug, Clone)]
pub struct ArrivalSampler {
    streams: Vec<Rng>,
}

impl ArrivalSampler {
    pub fn new(seed: u64) -> Self {
        let streams = (0..MovementId::COUNT as u64).map(|m| rng::stream(seed, rng::domain::ARRIVALS, m)).collect();
        Self { streams }
    }

    /// Arrival counts per movement over one step of length `dt`.
    pub fn sample(&mut self, profile: &DemandProfile, dt: f64) -> Result<[u32; MovementId::COUNT]> {
        if !(dt > 0.0) {
            return Err(Error::Config("time step must be positive".into()));
        }
        let mut out = [0; MovementId::COUNT];
        for (i, rng) in self.streams.iter_mut().enumerate() {
            let lambda = profile.rates[i] / 3600.0 * dt;
            out[i] = sample_poisson(lambda, rng);
        }
        Ok(out)
    }
}

fn sample_poisson(lambda: f64, rng: &mut Rng) -> u32 {
    if lambda <= 0.0 {
        return 0;
    }
    let d = Poisson::new(lambda).expect("positive finite mean");
    d.sample(rng) as u32
}

/// What a vehicle tells the intersection manager on entering the
/// formation zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequestMessage {
    pub vehicle: VehicleId,
    pub position: f64,
    pub speed: f64,
    pub accel_limit: f64,
    pub movement: MovementId,
}

/// Record of requests seen, rejecting duplicates.
#[derive(Debug, Clone, Default)]
pub struct RequestLog {
    seen: BTreeSet<VehicleId>,
    pub messages: Vec<RequestMessage>,
}

impl RequestLog {
    pub fn emit(&mut self, vehicle: &crate::dynamics::Vehicle) -> Result<RequestMessage> {
        if !self.seen.insert(vehicle.id) {
            return Err(Error::Protocol(alloc::format!("vehicle {} already sent its request", vehicle.id.0)));
        }
        let msg = RequestMessage {
            vehicle: vehicle.id,
            position: vehicle.pos,
            speed: vehicle.speed,
            accel_limit: vehicle.accel_max,
            movement: vehicle.movement,
        };
        self.messages.push(msg);
        Ok(msg)
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }
}
