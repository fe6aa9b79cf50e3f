//! Simulation and learning core for hierarchical platoon control at a
//! signal-free four-way intersection.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure: the
//! discrete-time traffic simulator, the two Q-learning layers, the
//! deadlock detector and the baseline controllers. File formats, the
//! command line and any other IO live in the `platoon-harness` crate.
//!
//! Layout:
//!
//! * [`geometry`]: intersection layout, movement paths, conflict points,
//!   zone gridding and stopping-distance math.
//! * [`dynamics`]: vehicle kinematics, gap control, platoons.
//! * [`traffic`]: demand profiles, Poisson arrivals, request protocol.
//! * [`formation`]: platoon-size agent (state encoding, action bound,
//!   reward terms).
//! * [`coordination`]: per-platoon priority agent (status scan, state
//!   encoding, priority actions, reward, value-update routing).
//! * [`deadlock`]: wait-for graph and elementary cycle enumeration.
//! * [`drl`]: tensors, CNN layers with backprop, Adam, replay, DQN.
//! * [`baselines`]: fixed-size and random-priority variants, fixed-time
//!   signals and first-come-first-served tile reservation.
//! * [`config`], [`metrics`], [`sim`], [`harness`]: configuration,
//!   episode metrics, the environment loop and training/evaluation.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod config;
pub mod coordination;
pub mod deadlock;
pub mod drl;
pub mod dynamics;
mod error;
pub mod formation;
pub mod geometry;
pub mod harness;
pub(crate) mod math;
pub mod rng;
pub mod metrics;
pub mod sim;
pub mod traffic;

pub use error::{Error, Result};
