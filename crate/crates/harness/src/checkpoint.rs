//! Agent snapshots.
//!
//! File layout:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `PLTNCKPT` |
//! | 8 | header length `n`, little-endian `u64` |
//! | n | UTF-8 JSON [`Header`] |
//! | rest | the arrays listed in `Header::arrays`, in that order, each as little-endian `f64` |
//!
//! Network parameters are stored layer by layer, weights before biases,
//! exactly as the core lays them out. Each network contributes four arrays
//! (`params`, `target`, `adam_m`, `adam_v`); a final `normalizer` array
//! holds the three minima followed by the three maxima. Replay memories and
//! random-stream positions are not part of a checkpoint, so a snapshot
//! serves evaluation and inspection rather than resumed training.

use std::collections::BTreeMap;
use std::path::Path;

use platoon_core::config::SimConfig;
use platoon_core::drl::{Adam, AdamConfig, DqnAgent, NetSpec};
use platoon_core::harness::Agents;
use serde::{Deserialize, Serialize};

use crate::error::{io_at, HarnessError, Result};

pub const MAGIC: &[u8; 8] = b"PLTNCKPT";
pub const FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format: u32,
    pub seed: u64,
    pub granularity: usize,
    /// Training episodes completed.
    pub episodes: u64,
    pub calibrated: bool,
    pub networks: Vec<NetworkHeader>,
    pub arrays: Vec<ArrayHeader>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkHeader {
    pub name: String,
    pub spec: NetSpec,
    pub decisions: u64,
    pub grad_steps: u64,
    pub adam: AdamConfig,
    pub adam_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayHeader {
    pub name: String,
    pub len: usize,
}

/// A decoded checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: Header,
    pub arrays: BTreeMap<String, Vec<f64>>,
}

const NETWORKS: [&str; 2] = ["formation", "coordination"];

fn agent<'a>(agents: &'a Agents, name: &str) -> &'a DqnAgent {
    if name == "formation" {
        &agents.formation
    } else {
        &agents.coordination
    }
}

impl Checkpoint {
    pub fn capture(cfg: &SimConfig, agents: &Agents) -> Self {
        let mut networks = Vec::new();
        let mut order = Vec::new();
        let mut arrays = BTreeMap::new();
        for name in NETWORKS {
            let a = agent(agents, name);
            networks.push(NetworkHeader {
                name: name.into(),
                spec: a.net.spec.clone(),
                decisions: a.decisions,
                grad_steps: a.grad_steps,
                adam: a.adam.config,
                adam_steps: a.adam.t,
            });
            for (part, data) in [("params", &a.net.params), ("target", &a.target), ("adam_m", &a.adam.m), ("adam_v", &a.adam.v)] {
                let key = format!("{name}.{part}");
                order.push(ArrayHeader { name: key.clone(), len: data.len() });
                arrays.insert(key, data.clone());
            }
        }
        let n = &agents.normalizer;
        let norm: Vec<f64> = n.min.iter().chain(&n.max).copied().collect();
        order.push(ArrayHeader { name: "normalizer".into(), len: norm.len() });
        arrays.insert("normalizer".into(), norm);
        Self {
            header: Header {
                format: FORMAT,
                seed: cfg.seed,
                granularity: cfg.granularity,
                episodes: agents.episodes,
                calibrated: n.calibrated,
                networks,
                arrays: order,
            },
            arrays,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let floats: usize = self.header.arrays.iter().map(|a| a.len).sum();
        let mut out = Vec::with_capacity(16 + header.len() + 8 * floats);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for a in &self.header.arrays {
            let data = self.arrays.get(&a.name).ok_or_else(|| HarnessError::Checkpoint(format!("array {} is missing", a.name)))?;
            if data.len() != a.len {
                return Err(HarnessError::Checkpoint(format!("array {} has {} values, header says {}", a.name, data.len(), a.len)));
            }
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| HarnessError::Checkpoint(m.into());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let n = u64::from_le_bytes(bytes[8..16].try_into().expect("eight bytes")) as usize;
        let body = &bytes[16..];
        if body.len() < n {
            return Err(bad("truncated header"));
        }
        let header: Header = serde_json::from_slice(&body[..n])?;
        if header.format != FORMAT {
            return Err(HarnessError::Checkpoint(format!("format {} is not supported", header.format)));
        }
        let mut rest = &body[n..];
        let mut arrays = BTreeMap::new();
        for a in &header.arrays {
            let size = a.len.checked_mul(8).filter(|s| *s <= rest.len()).ok_or_else(|| bad("truncated arrays"))?;
            let (chunk, tail) = rest.split_at(size);
            let data = chunk.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes"))).collect();
            if arrays.insert(a.name.clone(), data).is_some() {
                return Err(HarnessError::Checkpoint(format!("array {} appears twice", a.name)));
            }
            rest = tail;
        }
        if !rest.is_empty() {
            return Err(bad("trailing bytes after the last array"));
        }
        Ok(Self { header, arrays })
    }

    fn take(&self, name: &str) -> Result<Vec<f64>> {
        self.arrays.get(name).cloned().ok_or_else(|| HarnessError::Checkpoint(format!("array {name} is missing")))
    }

    /// Agents for `cfg` carrying the stored weights, optimizer state and
    /// normalization. The networks must match the ones `cfg` builds.
    pub fn restore(&self, cfg: &SimConfig) -> Result<Agents> {
        let mut agents = Agents::new(cfg)?;
        for name in NETWORKS {
            let h = self
                .header
                .networks
                .iter()
                .find(|h| h.name == name)
                .ok_or_else(|| HarnessError::Checkpoint(format!("network {name} is missing")))?;
            let a = if name == "formation" { &mut agents.formation } else { &mut agents.coordination };
            if h.spec != a.net.spec {
                return Err(HarnessError::Checkpoint(format!(
                    "the {name} network does not match this configuration (checkpoint granularity {}, configured {})",
                    self.header.granularity, cfg.granularity
                )));
            }
            let adam = Adam { config: h.adam, m: self.take(&format!("{name}.adam_m"))?, v: self.take(&format!("{name}.adam_v"))?, t: h.adam_steps };
            a.restore(self.take(&format!("{name}.params"))?, self.take(&format!("{name}.target"))?, adam, h.decisions, h.grad_steps)?;
        }
        let norm = self.take("normalizer")?;
        if norm.len() != 6 {
            return Err(HarnessError::Checkpoint("normalizer needs six values".into()));
        }
        agents.normalizer.min.copy_from_slice(&norm[..3]);
        agents.normalizer.max.copy_from_slice(&norm[3..]);
        agents.normalizer.calibrated = self.header.calibrated;
        agents.episodes = self.header.episodes;
        Ok(agents)
    }
}

pub fn save(path: &Path, cfg: &SimConfig, agents: &Agents) -> Result<()> {
    let bytes = Checkpoint::capture(cfg, agents).encode()?;
    std::fs::write(path, bytes).map_err(io_at(path))
}

pub fn load(path: &Path, cfg: &SimConfig) -> Result<Agents> {
    let bytes = std::fs::read(path).map_err(io_at(path))?;
    Checkpoint::decode(&bytes)?.restore(cfg)
}
