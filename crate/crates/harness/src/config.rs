//! Configuration files and command-line overrides.

use std::path::Path;

use platoon_core::config::{PolicyKind, SimConfig};

use crate::error::{io_at, HarnessError, Result};

/// Reads a TOML configuration. Missing keys keep their reference values.
pub fn load(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path).map_err(io_at(path))?;
    parse(&text).map_err(|source| HarnessError::Toml { path: path.to_owned(), source })
}

pub fn parse(text: &str) -> std::result::Result<SimConfig, toml::de::Error> {
    toml::from_str(text)
}

/// The configuration as TOML, readable back by [`parse`].
pub fn to_toml(cfg: &SimConfig) -> Result<String> {
    Ok(toml::to_string(cfg)?)
}

/// Values given on the command line, applied on top of a file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub condition: Option<u8>,
    pub policy: Option<PolicyKind>,
    pub seed: Option<u64>,
    pub episodes: Option<u64>,
    pub granularity: Option<usize>,
}

impl Overrides {
    /// Applies the overrides and validates the result, returning warnings.
    pub fn apply(&self, cfg: &mut SimConfig) -> Result<Vec<String>> {
        if let Some(c) = self.condition {
            cfg.condition = c;
        }
        if let Some(p) = self.policy {
            cfg.policy = p;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = self.episodes {
            cfg.episodes = m;
        }
        if let Some(g) = self.granularity {
            cfg.granularity = g;
        }
        Ok(cfg.validate()?)
    }
}
