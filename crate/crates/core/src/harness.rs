//! Training and evaluation episodes for every policy.

use alloc::vec::Vec;

use crate::baselines::{fixed_platooning_size, random_coordination};
use crate::config::{PolicyKind, SimConfig};
use crate::coordination::{action_mask, ACTIONS};
use crate::drl::{coordination_net_spec, formation_net_spec, select_action, DqnAgent, Experience, Input, Network};
use crate::formation::{max_platoon_size, RewardNormalizer};
use crate::geometry::MovementId;
use crate::metrics::EpisodeMetrics;
use crate::rng::{self, domain, Rng};
use crate::sim::{Controller, Simulator, StepTrace};
use crate::{Error, Result};

/// Index space of calibration episodes.
pub const CALIBRATION_BASE: u64 = 1 << 32;
/// Index space of evaluation episodes.
pub const EVALUATION_BASE: u64 = 1 << 40;

/// Seed of episode `index` of a run seeded with `seed`.
pub fn episode_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_mul(0x0000_0100_0000_01B3).wrapping_add(index)
}

/// Both learning layers and the reward normalization they share.
#[derive(Debug, Clone)]
pub struct Agents {
    pub formation: DqnAgent,
    pub coordination: DqnAgent,
    pub normalizer: RewardNormalizer,
    /// Training episodes completed.
    pub episodes: u64,
}

impl Agents {
    /// Freshly initialized networks for `cfg`, seeded from `cfg.seed`.
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        let hyper = cfg.hyperparams();
        hyper.validate()?;
        let n = max_platoon_size(cfg.vehicle_length, cfg.platoon_headway, cfg.formation_length)?;
        let s = cfg.seed;
        let f_net = Network::new(formation_net_spec(n), &mut rng::stream(s, domain::INIT1, 0))?;
        let c_net = Network::new(coordination_net_spec(cfg.granularity, ACTIONS)?, &mut rng::stream(s, domain::INIT2, 0))?;
        Ok(Self {
            formation: DqnAgent::new(f_net, hyper, rng::stream(s, domain::LAYER1_EXPLORE, 0), rng::stream(s, domain::REPLAY1, 0)),
            coordination: DqnAgent::new(c_net, hyper, rng::stream(s, domain::LAYER2_EXPLORE, 0), rng::stream(s, domain::REPLAY2, 0)),
            normalizer: RewardNormalizer::default(),
            episodes: 0,
        })
    }
}

/// What the agents are doing during an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Random sizes and orders; reward factors feed the normalizer.
    Calibrate,
    /// Epsilon-greedy actions, replay and gradient steps.
    Train,
    /// Greedy actions, no learning.
    Evaluate,
}

enum Brains<'a> {
    None,
    Frozen(&'a Agents),
    Learning(&'a mut Agents),
}

/// Maps a policy and mode onto the simulator's decision hooks.
pub struct PolicyController<'a> {
    policy: PolicyKind,
    mode: Mode,
    brains: Brains<'a>,
    fixed_size: usize,
    sizes: Rng,
    orders: Rng,
    /// Never drawn from: greedy selection needs no randomness.
    greedy_rng: Rng,
}

impl<'a> PolicyController<'a> {
    fn new(cfg: &SimConfig, mode: Mode, brains: Brains<'a>, seed: u64) -> Self {
        Self {
            policy: cfg.policy,
            mode,
            brains,
            fixed_size: cfg.fixed_platoon_size,
            sizes: rng::stream(seed, domain::RANDOM_SIZE, 0),
            orders: rng::stream(seed, domain::RANDOM_ORDER, 0),
            greedy_rng: rng::stream(0, 0, 0),
        }
    }

    fn learns_sizes(&self) -> bool {
        self.mode != Mode::Calibrate && self.policy.learned_sizes()
    }

    fn learns_priorities(&self) -> bool {
        self.mode != Mode::Calibrate && self.policy.learned_priorities()
    }

    fn choose(&mut self, layer1: bool, state: Option<&Input>, mask: &[bool]) -> Result<usize> {
        let state = state.ok_or_else(|| Error::Protocol("learned decision without a state".into()))?;
        match &mut self.brains {
            Brains::Learning(a) => {
                let agent = if layer1 { &mut a.formation } else { &mut a.coordination };
                let action = agent.act(state, mask, true)?;
                agent.note_decision();
                agent.train_step()?;
                Ok(action)
            }
            Brains::Frozen(a) => {
                let agent = if layer1 { &a.formation } else { &a.coordination };
                select_action(&agent.q_values(state)?, mask, 0.0, &mut self.greedy_rng)
            }
            Brains::None => Err(Error::MissingCheckpoint(self.policy.name().into())),
        }
    }

    fn learner(&mut self, layer1: bool) -> Option<&mut DqnAgent> {
        match &mut self.brains {
            Brains::Learning(a) => Some(if layer1 { &mut a.formation } else { &mut a.coordination }),
            _ => None,
        }
    }
}

impl Controller for PolicyController<'_> {
    fn wants_formation_state(&self) -> bool {
        self.learns_sizes()
    }

    fn wants_coordination_state(&self) -> bool {
        self.learns_priorities()
    }

    fn platoon_size(&mut self, _lane: MovementId, state: Option<&Input>, n_max: usize) -> Result<usize> {
        use rand::Rng as _;
        if self.mode == Mode::Calibrate {
            return Ok(self.sizes.random_range(1..=n_max));
        }
        if self.policy.learned_sizes() {
            let mask = alloc::vec![true; n_max];
            return Ok(self.choose(true, state, &mask)? + 1);
        }
        Ok(fixed_platooning_size(self.fixed_size, n_max))
    }

    fn priority(&mut self, state: Option<&Input>, k: usize) -> Result<usize> {
        if self.learns_priorities() {
            return self.choose(false, state, &action_mask(k));
        }
        Ok(random_coordination(k, &mut self.orders))
    }

    fn layer1_experience(&mut self, e: Experience) -> Result<()> {
        if let Some(agent) = self.learner(true) {
            agent.remember(e);
        }
        Ok(())
    }

    fn layer2_experience(&mut self, e: Experience) -> Result<()> {
        if let Some(agent) = self.learner(false) {
            agent.remember(e);
        }
        Ok(())
    }

    fn deadlock_punishment(&mut self, e: Experience) -> Result<()> {
        if let Some(agent) = self.learner(true) {
            agent.remember(e);
            agent.immediate_step()?;
        }
        Ok(())
    }
}

/// Random-action episodes that fix the reward normalization.
pub fn calibrate(cfg: &SimConfig, agents: &mut Agents) -> Result<Vec<EpisodeMetrics>> {
    let mut out = Vec::new();
    let mut norm = RewardNormalizer::default();
    for i in 0..cfg.calibration_episodes {
        let index = CALIBRATION_BASE + i;
        let seed = episode_seed(cfg.seed, index);
        let mut ctl = PolicyController::new(cfg, Mode::Calibrate, Brains::None, seed);
        let (m, n) = Simulator::new(cfg, index, seed, norm)?.run(&mut ctl)?;
        norm = n;
        out.push(m);
    }
    norm.finish()?;
    agents.normalizer = norm;
    Ok(out)
}

/// Next training episode; the normalizer must be calibrated.
pub fn train_episode(cfg: &SimConfig, agents: &mut Agents) -> Result<EpisodeMetrics> {
    if !agents.normalizer.calibrated {
        return Err(Error::Uncalibrated);
    }
    let index = agents.episodes;
    let seed = episode_seed(cfg.seed, index);
    let norm = agents.normalizer;
    let mut ctl = PolicyController::new(cfg, Mode::Train, Brains::Learning(agents), seed);
    let (m, _) = Simulator::new(cfg, index, seed, norm)?.run(&mut ctl)?;
    agents.episodes += 1;
    Ok(m)
}

fn frozen_controller<'a>(cfg: &SimConfig, agents: Option<&'a Agents>, index: u64) -> Result<(PolicyController<'a>, u64, RewardNormalizer)> {
    let learned = cfg.policy.learned_sizes() || cfg.policy.learned_priorities();
    let brains = match agents {
        Some(a) => Brains::Frozen(a),
        None if learned => return Err(Error::MissingCheckpoint(cfg.policy.name().into())),
        None => Brains::None,
    };
    let norm = agents.map(|a| a.normalizer).unwrap_or_default();
    let seed = episode_seed(cfg.seed, EVALUATION_BASE + index);
    Ok((PolicyController::new(cfg, Mode::Evaluate, brains, seed), seed, norm))
}

/// One episode of `cfg.policy` with frozen agents (required by the learned
/// policies) on the evaluation seed `index`.
pub fn evaluate_episode(cfg: &SimConfig, agents: Option<&Agents>, index: u64) -> Result<EpisodeMetrics> {
    let (mut ctl, seed, norm) = frozen_controller(cfg, agents, index)?;
    let (m, _) = Simulator::new(cfg, index, seed, norm)?.run(&mut ctl)?;
    Ok(m)
}

/// Same episode as [`evaluate_episode`], handing a snapshot of the state
/// after every step to `on_step`.
pub fn replay_episode(cfg: &SimConfig, agents: Option<&Agents>, index: u64, mut on_step: impl FnMut(&StepTrace)) -> Result<EpisodeMetrics> {
    let (mut ctl, seed, norm) = frozen_controller(cfg, agents, index)?;
    let mut sim = Simulator::new(cfg, index, seed, norm)?;
    while !sim.is_done() {
        sim.advance(&mut ctl)?;
        on_step(&sim.trace());
    }
    Ok(sim.finish(&mut ctl)?.0)
}

/// `episodes` evaluation episodes on common seeds.
pub fn evaluate(cfg: &SimConfig, agents: Option<&Agents>, episodes: u64) -> Result<Vec<EpisodeMetrics>> {
    (0..episodes).map(|i| evaluate_episode(cfg, agents, i)).collect()
}
