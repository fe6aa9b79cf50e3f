//! File formats, run orchestration and the `platoon` command line around
//! [`platoon_core`].
//!
//! * [`config`]: TOML configuration files with command-line overrides.
//! * [`checkpoint`]: agent snapshots as a JSON header followed by
//!   little-endian `f64` arrays.
//! * [`export`]: per-episode metrics as CSV and JSON.
//! * [`runs`]: training runs, policy comparison tables, the granularity
//!   sweep and step-by-step replays.

pub mod checkpoint;
pub mod config;
mod error;
pub mod export;
pub mod runs;

pub use error::{HarnessError, Result};
