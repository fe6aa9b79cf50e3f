use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use platoon_core::config::{PolicyKind, SimConfig};
use platoon_core::metrics::EpisodeMetrics;
use platoon_harness::config::{self, Overrides};
use platoon_harness::export;
use platoon_harness::runs::{self, RunLayout};
use platoon_harness::{checkpoint, HarnessError, Result};

/// Hierarchical platoon control at a signal-free intersection.
#[derive(Parser)]
#[command(name = "platoon", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate, then train both learning layers, writing metrics and checkpoints.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_policy)]
        policy: Option<PolicyKind>,
        /// Output directory.
        #[arg(long, default_value = "runs/train")]
        out: PathBuf,
    },
    /// Compare policies on common evaluation seeds.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Policies to compare, comma separated; all five by default.
        #[arg(long, value_parser = parse_policy, value_delimiter = ',')]
        policy: Vec<PolicyKind>,
        /// Trained agents; required by coor-plt, fp and rc.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = "runs/eval")]
        out: PathBuf,
    },
    /// Train once per coordination granularity and summarize the late episodes.
    SweepGranularity {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_policy)]
        policy: Option<PolicyKind>,
        #[arg(long, value_delimiter = ',', default_value = "6,12,24")]
        granularities: Vec<usize>,
        /// Output directory.
        #[arg(long, default_value = "runs/sweep")]
        out: PathBuf,
    },
    /// Re-run one evaluation episode and dump the state after every step as JSON lines.
    Replay {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_policy)]
        policy: Option<PolicyKind>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Evaluation episode index.
        #[arg(long, default_value_t = 0)]
        index: u64,
        /// Trace file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML configuration; reference values when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Demand condition: 1 moderate, 2 high, 3 moderate then high.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    condition: Option<u8>,
    #[arg(long)]
    seed: Option<u64>,
    /// Training episodes for train and sweep-granularity, evaluation episodes for eval.
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long)]
    granularity: Option<usize>,
}

fn parse_policy(s: &str) -> std::result::Result<PolicyKind, String> {
    PolicyKind::parse(s).map_err(|e| e.to_string())
}

impl Common {
    fn resolve(&self, policy: Option<PolicyKind>, episodes: bool) -> Result<SimConfig> {
        let mut cfg = match &self.config {
            Some(p) => config::load(p)?,
            None => SimConfig::default(),
        };
        let o = Overrides {
            condition: self.condition,
            policy,
            seed: self.seed,
            episodes: if episodes { self.episodes } else { None },
            granularity: self.granularity,
        };
        for w in o.apply(&mut cfg)? {
            eprintln!("warning: {w}");
        }
        Ok(cfg)
    }
}

fn report(m: &EpisodeMetrics) {
    eprintln!(
        "episode {:>4}  travel {:>7.2} s  fuel {:>7.2} mL  deadlocks {:>2}  layer-1 {:>9.3}  layer-2 {:>9.3}  modal size {}",
        m.episode,
        m.mean_travel_time,
        m.mean_fuel,
        m.deadlocks,
        m.layer1_reward,
        m.layer2_reward,
        m.modal_size().map_or("-".into(), |s| s.to_string()),
    );
}

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|source| HarnessError::Io { path: p.into(), source })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common, policy, out } => {
            let cfg = common.resolve(policy, true)?;
            runs::train(&cfg, Some(&out), report)?;
            let l = RunLayout::new(&out);
            println!("metrics: {}", l.metrics_csv().display());
            println!("checkpoint: {}", l.final_checkpoint().display());
        }
        Command::Eval { common, policy, checkpoint, out } => {
            let cfg = common.resolve(None, false)?;
            let episodes = common.episodes.unwrap_or(10);
            let policies = if policy.is_empty() { PolicyKind::ALL.to_vec() } else { policy };
            let agents = checkpoint.as_deref().map(|p| checkpoint::load(p, &cfg)).transpose()?;
            let (rows, log) = runs::compare(&cfg, agents.as_ref(), &policies, episodes)?;
            create_dir(&out)?;
            export::write_csv(&out.join("eval.csv"), &rows)?;
            export::write_json(&out.join("eval.json"), &rows)?;
            export::write_metrics_csv(&out.join("episodes.csv"), &log)?;
            export::write_json(&out.join("episodes.json"), &log)?;
            println!("{:<18} {:>9} {:>8} {:>11} {:>10} {:>9}", "policy", "condition", "episodes", "travel (s)", "fuel (mL)", "deadlocks");
            for r in &rows {
                println!(
                    "{:<18} {:>9} {:>8} {:>11.2} {:>10.2} {:>9.2}",
                    r.policy.name(),
                    r.condition,
                    r.episodes,
                    r.mean_travel_time,
                    r.mean_fuel,
                    r.deadlock_frequency
                );
            }
        }
        Command::SweepGranularity { common, policy, granularities, out } => {
            let cfg = common.resolve(policy, true)?;
            create_dir(&out)?;
            let rows = runs::sweep(&cfg, &granularities, Some(&out), |g, m| {
                eprint!("g={g:<3} ");
                report(m);
            })?;
            println!("{:>11} {:>18} {:>15} {:>16}", "granularity", "layer-2 reward", "deadlocks", "travel (s)");
            for r in &rows {
                println!("{:>11} {:>18.4} {:>15} {:>16.2}", r.granularity, r.final_layer2_reward, r.final_deadlocks, r.final_travel_time);
            }
        }
        Command::Replay { common, policy, checkpoint, index, out } => {
            let cfg = common.resolve(policy, false)?;
            let agents = checkpoint.as_deref().map(|p| checkpoint::load(p, &cfg)).transpose()?;
            let m = match &out {
                Some(p) => {
                    let f = File::create(p).map_err(|source| HarnessError::Io { path: p.clone(), source })?;
                    let mut w = BufWriter::new(f);
                    let m = runs::replay(&cfg, agents.as_ref(), index, &mut w)?;
                    w.flush().map_err(|source| HarnessError::Io { path: p.clone(), source })?;
                    m
                }
                None => runs::replay(&cfg, agents.as_ref(), index, &mut std::io::stdout().lock())?,
            };
            report(&m);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
