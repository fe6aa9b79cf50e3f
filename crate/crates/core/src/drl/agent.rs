//! Deep Q-learning agent: action selection, targets and training steps.

use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::network::{Network, Workspace};
use super::replay::ReplayBuffer;
use super::tensor::Input;
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Tabular temporal-difference rate; kept for reference, the network
    /// is trained with Adam at `adam.lr`.
    pub td_rate: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    /// Decisions observed before the first gradient step.
    pub observe: u64,
    /// Gradient steps between target-network syncs.
    pub target_sync: u64,
    pub replay_capacity: usize,
    pub adam: AdamConfig,
    /// Loss above which training aborts.
    pub divergence_limit: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            td_rate: 0.9,
            gamma: 0.9,
            epsilon: 0.1,
            batch_size: 32,
            observe: 100,
            target_sync: 200,
            replay_capacity: 1000,
            adam: AdamConfig::default(),
            divergence_limit: 1e6,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("td_rate", self.td_rate), ("gamma", self.gamma), ("epsilon", self.epsilon)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(alloc::format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.batch_size == 0 || self.replay_capacity == 0 || self.target_sync == 0 {
            return Err(Error::Config("batch size, replay capacity and sync period must be positive".into()));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::Config("optimizer step size must be positive".into()));
        }
        Ok(())
    }
}

/// One transition. `next` is `None` for terminal transitions and otherwise
/// carries the next state with its valid-action mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub state: Input,
    pub action: usize,
    pub reward: f64,
    pub next: Option<(Input, Vec<bool>)>,
}

/// Epsilon-greedy choice among valid actions; greedy ties go to the lowest
/// index.
pub fn select_action(q: &[f64], mask: &[bool], epsilon: f64, rng: &mut Rng) -> Result<usize> {
    let valid = mask.iter().filter(|m| **m).count();
    if valid == 0 || mask.len() != q.len() {
        return Err(Error::EmptyMask);
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        let k = rng.random_range(0..valid);
        return Ok(mask.iter().enumerate().filter(|(_, m)| **m).nth(k).expect("k < valid").0);
    }
    Ok(greedy(q, mask))
}

fn greedy(q: &[f64], mask: &[bool]) -> usize {
    let mut best = usize::MAX;
    for (i, (&v, &ok)) in q.iter().zip(mask).enumerate() {
        if ok && (best == usize::MAX || v > q[best]) {
            best = i;
        }
    }
    best
}

/// Bootstrapped target: `r` when terminal, else `r + gamma max_valid q'`.
pub fn td_target(reward: f64, next: Option<(&[f64], &[bool])>, gamma: f64) -> f64 {
    match next {
        None => reward,
        Some((q, mask)) => {
            let best = q.iter().zip(mask).filter(|(_, m)| **m).map(|(v, _)| *v).fold(f64::NEG_INFINITY, f64::max);
            if best.is_finite() {
                reward + gamma * best
            } else {
                reward
            }
        }
    }
}

/// Online network, target parameters, optimizer and replay for one layer.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub net: Network,
    pub target: Vec<f64>,
    pub adam: Adam,
    pub replay: ReplayBuffer<Experience>,
    pub hyper: Hyperparams,
    pub decisions: u64,
    pub grad_steps: u64,
    pub explore_rng: Rng,
    pub replay_rng: Rng,
    pub last_loss: Option<f64>,
    /// Target-network bootstrap value per replay slot, valid until the next
    /// sync or until the slot is overwritten.
    bootstrap: Vec<Option<f64>>,
    ws: Workspace,
    grads: Vec<f64>,
}

impl DqnAgent {
    pub fn new(net: Network, hyper: Hyperparams, explore_rng: Rng, replay_rng: Rng) -> Self {
        let n = net.param_count();
        Self {
            target: net.params.clone(),
            adam: Adam::new(hyper.adam, n),
            replay: ReplayBuffer::new(hyper.replay_capacity),
            net,
            hyper,
            decisions: 0,
            grad_steps: 0,
            explore_rng,
            replay_rng,
            last_loss: None,
            bootstrap: alloc::vec![None; hyper.replay_capacity],
            ws: Workspace::default(),
            grads: alloc::vec![0.0; n],
        }
    }

    /// Replaces weights, target weights and optimizer state, e.g. from a
    /// checkpoint. The replay memory is kept.
    pub fn restore(&mut self, params: Vec<f64>, target: Vec<f64>, adam: Adam, decisions: u64, grad_steps: u64) -> Result<()> {
        let n = self.net.param_count();
        if [params.len(), target.len(), adam.m.len(), adam.v.len()].iter().any(|&l| l != n) {
            return Err(Error::Shape(alloc::format!("restored state does not match the {n} network parameters")));
        }
        self.net.params = params;
        self.target = target;
        self.adam = adam;
        self.decisions = decisions;
        self.grad_steps = grad_steps;
        self.bootstrap.iter_mut().for_each(|b| *b = None);
        Ok(())
    }

    pub fn q_values(&self, state: &Input) -> Result<Vec<f64>> {
        self.net.forward(state)
    }

    /// Chooses an action, epsilon-greedy when `explore`, otherwise greedy.
    pub fn act(&mut self, state: &Input, mask: &[bool], explore: bool) -> Result<usize> {
        let q = self.q_values(state)?;
        let eps = if explore { self.hyper.epsilon } else { 0.0 };
        select_action(&q, mask, eps, &mut self.explore_rng)
    }

    pub fn note_decision(&mut self) {
        self.decisions += 1;
    }

    pub fn remember(&mut self, e: Experience) {
        let slot = self.replay.push(e);
        self.bootstrap[slot] = None;
    }

    pub fn sync_target(&mut self) {
        self.target.copy_from_slice(&self.net.params);
        self.bootstrap.iter_mut().for_each(|b| *b = None);
    }

    /// One gradient step when warm-up is over and a full batch is available.
    pub fn train_step(&mut self) -> Result<Option<f64>> {
        if self.decisions < self.hyper.observe || self.replay.len() < self.hyper.batch_size {
            return Ok(None);
        }
        self.gradient_step(self.hyper.batch_size).map(Some)
    }

    /// One gradient step regardless of warm-up, on up to a full batch.
    pub fn immediate_step(&mut self) -> Result<Option<f64>> {
        if self.replay.is_empty() {
            return Ok(None);
        }
        self.gradient_step(self.hyper.batch_size).map(Some)
    }

    fn gradient_step(&mut self, batch: usize) -> Result<f64> {
        let idx = self.replay.sample_indices(batch, &mut self.replay_rng);
        let b = idx.len() as f64;
        self.grads.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        let outputs = self.net.outputs();
        let mut dout = alloc::vec![0.0; outputs];
        for &i in &idx {
            let e = self.replay.get(i);
            let y = match (&e.next, self.bootstrap[i]) {
                (None, _) => e.reward,
                (Some(_), Some(b)) => e.reward + self.hyper.gamma * b,
                (Some((s2, mask)), None) => {
                    let q2 = self.net.forward_with(&self.target, s2, &mut self.ws)?;
                    let b = td_target(0.0, Some((&q2, mask)), 1.0);
                    self.bootstrap[i] = Some(b);
                    e.reward + self.hyper.gamma * b
                }
            };
            let q = self.net.forward_with(&self.net.params, &e.state, &mut self.ws)?;
            let err = q[e.action] - y;
            loss += err * err / b;
            dout.iter_mut().for_each(|d| *d = 0.0);
            dout[e.action] = 2.0 * err / b;
            self.net.backward(&self.net.params, &mut self.ws, &dout, &mut self.grads);
        }
        if !(loss <= self.hyper.divergence_limit) {
            return Err(Error::Diverged { loss, step: self.grad_steps });
        }
        self.adam.step(&mut self.net.params, &self.grads);
        self.grad_steps += 1;
        if self.grad_steps.is_multiple_of(self.hyper.target_sync) {
            self.sync_target();
        }
        self.last_loss = Some(loss);
        Ok(loss)
    }
}
