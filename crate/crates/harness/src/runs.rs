//! Whole runs: training with checkpoints, policy comparisons, the
//! granularity sweep and traced replays.

use std::io::Write;
use std::path::{Path, PathBuf};

use platoon_core::config::{PolicyKind, SimConfig};
use platoon_core::harness::{self as core_runs, Agents};
use platoon_core::metrics::EpisodeMetrics;
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::config::to_toml;
use crate::error::{io_at, HarnessError, Result};
use crate::export::{self, Row};

/// Episodes at the end of a run that summaries look at.
pub const FINAL_WINDOW: usize = 10;

/// Files written by [`train`] under its output directory.
#[derive(Debug, Clone)]
pub struct RunLayout {
    pub dir: PathBuf,
}

impl RunLayout {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.dir.join("config.toml")
    }

    pub fn calibration_csv(&self) -> PathBuf {
        self.dir.join("calibration.csv")
    }

    pub fn metrics_csv(&self) -> PathBuf {
        self.dir.join("metrics.csv")
    }

    pub fn metrics_json(&self) -> PathBuf {
        self.dir.join("metrics.json")
    }

    pub fn checkpoint(&self, episode: u64) -> PathBuf {
        self.dir.join("checkpoints").join(format!("episode-{episode:05}.ckpt"))
    }

    /// Checkpoint after the last episode.
    pub fn final_checkpoint(&self) -> PathBuf {
        self.dir.join("agents.ckpt")
    }
}

pub struct TrainRun {
    pub calibration: Vec<EpisodeMetrics>,
    pub episodes: Vec<EpisodeMetrics>,
    pub agents: Agents,
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(io_at(path))
}

/// Calibrates the reward normalization, then trains for `cfg.episodes`
/// episodes. With an output directory, writes the layout of
/// [`RunLayout`], refreshing metrics and saving a checkpoint every
/// `cfg.checkpoint_every` episodes.
pub fn train(cfg: &SimConfig, out: Option<&Path>, mut progress: impl FnMut(&EpisodeMetrics)) -> Result<TrainRun> {
    if !(cfg.policy.learned_sizes() || cfg.policy.learned_priorities()) {
        return Err(HarnessError::Malformed(format!("policy {} has nothing to train", cfg.policy.name())));
    }
    cfg.validate()?;
    let layout = out.map(RunLayout::new);
    if let Some(l) = &layout {
        create_dir(&l.dir.join("checkpoints"))?;
        std::fs::write(l.config(), to_toml(cfg)?).map_err(io_at(l.config()))?;
    }
    let mut agents = Agents::new(cfg)?;
    let calibration = core_runs::calibrate(cfg, &mut agents)?;
    if let Some(l) = &layout {
        export::write_metrics_csv(&l.calibration_csv(), &calibration)?;
    }
    let mut episodes = Vec::new();
    for _ in 0..cfg.episodes {
        let m = core_runs::train_episode(cfg, &mut agents)?;
        progress(&m);
        episodes.push(m);
        let done = agents.episodes;
        if let Some(l) = &layout {
            if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 {
                checkpoint::save(&l.checkpoint(done), cfg, &agents)?;
                write_log(l, &episodes)?;
            }
        }
    }
    if let Some(l) = &layout {
        checkpoint::save(&l.final_checkpoint(), cfg, &agents)?;
        write_log(l, &episodes)?;
    }
    Ok(TrainRun { calibration, episodes, agents })
}

fn write_log(l: &RunLayout, log: &[EpisodeMetrics]) -> Result<()> {
    export::write_metrics_csv(&l.metrics_csv(), log)?;
    export::write_json(&l.metrics_json(), log)
}

/// One line of a policy comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub policy: PolicyKind,
    pub condition: u8,
    pub episodes: u64,
    /// Mean over every exited vehicle of every episode, s.
    pub mean_travel_time: f64,
    /// mL per exited vehicle.
    pub mean_fuel: f64,
    /// Deadlock events per episode.
    pub deadlock_frequency: f64,
    pub exited: u64,
    pub safety_violations: u64,
}

impl Row for EvalRow {
    const HEADER: &'static [&'static str] =
        &["policy", "condition", "episodes", "mean_travel_time", "mean_fuel", "deadlock_frequency", "exited", "safety_violations"];
}

impl EvalRow {
    pub fn summarize(policy: PolicyKind, condition: u8, log: &[EpisodeMetrics]) -> Self {
        let exited: u64 = log.iter().map(|m| m.exited).sum();
        let per_vehicle = |f: fn(&EpisodeMetrics) -> &Vec<f64>| {
            if exited == 0 {
                0.0
            } else {
                log.iter().flat_map(|m| f(m).iter()).sum::<f64>() / exited as f64
            }
        };
        Self {
            policy,
            condition,
            episodes: log.len() as u64,
            mean_travel_time: per_vehicle(|m| &m.travel_times),
            mean_fuel: per_vehicle(|m| &m.fuel),
            deadlock_frequency: if log.is_empty() { 0.0 } else { log.iter().map(|m| m.deadlocks).sum::<u64>() as f64 / log.len() as f64 },
            exited,
            safety_violations: log.iter().map(|m| m.safety_violations).sum(),
        }
    }
}

/// Evaluates each policy on the same `episodes` seeds. Learned policies
/// use `agents` and fail without them.
pub fn compare(cfg: &SimConfig, agents: Option<&Agents>, policies: &[PolicyKind], episodes: u64) -> Result<(Vec<EvalRow>, Vec<EpisodeMetrics>)> {
    let mut rows = Vec::new();
    let mut all = Vec::new();
    for &policy in policies {
        let c = SimConfig { policy, ..cfg.clone() };
        let log = core_runs::evaluate(&c, agents, episodes)?;
        rows.push(EvalRow::summarize(policy, c.condition, &log));
        all.extend(log);
    }
    Ok((rows, all))
}

/// Late-run summary of one training run at one granularity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub granularity: usize,
    pub seed: u64,
    pub episodes: u64,
    /// Layer-2 reward per completed transition over the final window.
    pub final_layer2_reward: f64,
    /// Deadlock events summed over the final window.
    pub final_deadlocks: u64,
    /// Mean of the per-episode travel times over the final window, s.
    pub final_travel_time: f64,
}

impl Row for SweepRow {
    const HEADER: &'static [&'static str] =
        &["granularity", "seed", "episodes", "final_layer2_reward", "final_deadlocks", "final_travel_time"];
}

impl SweepRow {
    pub fn summarize(cfg: &SimConfig, log: &[EpisodeMetrics]) -> Self {
        let tail = &log[log.len().saturating_sub(FINAL_WINDOW)..];
        let transitions: u64 = tail.iter().map(|m| m.layer2_transitions).sum();
        let reward: f64 = tail.iter().map(|m| m.layer2_reward).sum();
        Self {
            granularity: cfg.granularity,
            seed: cfg.seed,
            episodes: log.len() as u64,
            final_layer2_reward: if transitions == 0 { 0.0 } else { reward / transitions as f64 },
            final_deadlocks: tail.iter().map(|m| m.deadlocks).sum(),
            final_travel_time: if tail.is_empty() { 0.0 } else { tail.iter().map(|m| m.mean_travel_time).sum::<f64>() / tail.len() as f64 },
        }
    }
}

/// Trains once per granularity; each run writes under `out/g<g>` when an
/// output directory is given.
pub fn sweep(cfg: &SimConfig, granularities: &[usize], out: Option<&Path>, mut progress: impl FnMut(usize, &EpisodeMetrics)) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &g in granularities {
        let c = SimConfig { granularity: g, ..cfg.clone() };
        let dir = out.map(|o| o.join(format!("g{g}")));
        let run = train(&c, dir.as_deref(), |m| progress(g, m))?;
        rows.push(SweepRow::summarize(&c, &run.episodes));
    }
    if let Some(o) = out {
        export::write_csv(&o.join("sweep.csv"), &rows)?;
    }
    Ok(rows)
}

/// Re-runs evaluation episode `index`, writing one JSON line per step.
pub fn replay(cfg: &SimConfig, agents: Option<&Agents>, index: u64, sink: &mut impl Write) -> Result<EpisodeMetrics> {
    let mut failure = None;
    let m = core_runs::replay_episode(cfg, agents, index, |t| {
        if failure.is_none() {
            if let Err(e) = serde_json::to_writer(&mut *sink, t).map_err(HarnessError::from).and_then(|_| sink.write_all(b"\n").map_err(io_at("<trace>"))) {
                failure = Some(e);
            }
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(m),
    }
}

/// Trailing means over full windows of `w` values.
pub fn moving_average(xs: &[f64], w: usize) -> Vec<f64> {
    if w == 0 || xs.len() < w {
        return Vec::new();
    }
    xs.windows(w).map(|s| s.iter().sum::<f64>() / w as f64).collect()
}

/// Median of a non-empty sample.
pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}
