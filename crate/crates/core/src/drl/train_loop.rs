//! Episodic training loop for single-agent environments.

use alloc::vec::Vec;

use super::agent::{DqnAgent, Experience};
use super::tensor::Input;
use crate::Result;

/// An episodic environment with a discrete, possibly masked action set.
pub trait Environment {
    /// Starts an episode and returns the first state and its mask.
    fn reset(&mut self, episode: u64) -> (Input, Vec<bool>);
    /// Applies `action`; returns the reward and the next state, or `None`
    /// when the episode ended.
    fn step(&mut self, action: usize) -> (f64, Option<(Input, Vec<bool>)>);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeLog {
    pub reward: f64,
    pub steps: u64,
    pub grad_steps: u64,
}

/// Runs `episodes` episodes of at most `max_steps` decisions each, storing
/// every transition and taking one gradient step per decision once warm-up
/// is over.
pub fn train_loop<E: Environment>(env: &mut E, agent: &mut DqnAgent, episodes: u64, max_steps: u64) -> Result<Vec<EpisodeLog>> {
    let mut logs = Vec::new();
    for ep in 0..episodes {
        let (mut state, mut mask) = env.reset(ep);
        let mut total = 0.0;
        let mut steps = 0;
        while steps < max_steps {
            let a = agent.act(&state, &mask, true)?;
            agent.note_decision();
            let (r, next) = env.step(a);
            total += r;
            steps += 1;
            let done = next.is_none();
            agent.remember(Experience { state: state.clone(), action: a, reward: r, next: next.clone() });
            agent.train_step()?;
            match next {
                Some((s, m)) => {
                    state = s;
                    mask = m;
                }
                None => break,
            }
            if done {
                break;
            }
        }
        logs.push(EpisodeLog { reward: total, steps, grad_steps: agent.grad_steps });
    }
    Ok(logs)
}

/// Deterministic chain: states `0..n`, actions left (0) and right (1),
/// start at 0, reward 1 on reaching `n - 1`, which ends the episode.
#[derive(Debug, Clone)]
pub struct ChainMdp {
    pub n: usize,
    state: usize,
}

impl ChainMdp {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2);
        Self { n, state: 0 }
    }

    fn encode(&self, s: usize) -> Input {
        Input::Sparse { shape: super::tensor::Shape::flat(self.n), entries: alloc::vec![(s as u32, 1.0)] }
    }

    fn transition(&self, s: usize, a: usize) -> (usize, f64, bool) {
        let next = if a == 1 { s + 1 } else { s.saturating_sub(1) };
        let done = next == self.n - 1;
        (next, if done { 1.0 } else { 0.0 }, done)
    }

    /// Optimal action values by value iteration, indexed `[state][action]`.
    pub fn optimal_q(&self, gamma: f64) -> Vec<[f64; 2]> {
        let mut q = alloc::vec![[0.0; 2]; self.n];
        for _ in 0..10_000 {
            let mut next_q = q.clone();
            for s in 0..self.n - 1 {
                for a in 0..2 {
                    let (s2, r, done) = self.transition(s, a);
                    next_q[s][a] = if done { r } else { r + gamma * q[s2][0].max(q[s2][1]) };
                }
            }
            if next_q == q {
                break;
            }
            q = next_q;
        }
        q
    }

    /// Greedy action of `agent` in every non-terminal state.
    pub fn greedy_policy(&self, agent: &DqnAgent) -> Result<Vec<usize>> {
        (0..self.n - 1).map(|s| {
            let q = agent.q_values(&self.encode(s))?;
            Ok(if q[1] > q[0] { 1 } else { 0 })
        }).collect()
    }
}

impl Environment for ChainMdp {
    fn reset(&mut self, _: u64) -> (Input, Vec<bool>) {
        self.state = 0;
        (self.encode(0), alloc::vec![true, true])
    }

    fn step(&mut self, action: usize) -> (f64, Option<(Input, Vec<bool>)>) {
        let (s2, r, done) = self.transition(self.state, action);
        self.state = s2;
        (r, if done { None } else { Some((self.encode(s2), alloc::vec![true, true])) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drl::network::{LayerSpec, NetSpec, Network};
    use crate::drl::tensor::{Shape, Tensor};
    use crate::drl::{AdamConfig, Hyperparams};
    use crate::rng;

    /// Observation longer than the total number of decisions: no learning.
    struct Constant;

    impl Environment for Constant {
        fn reset(&mut self, _: u64) -> (Input, Vec<bool>) {
            (Input::Dense(Tensor::from_vec(Shape::flat(2), alloc::vec![1.0, 0.0]).unwrap()), alloc::vec![true, true])
        }

        fn step(&mut self, _: usize) -> (f64, Option<(Input, Vec<bool>)>) {
            (1.0, None)
        }
    }

    pub(crate) fn chain_agent(seed: u64) -> DqnAgent {
        let spec = NetSpec {
            input: Shape::flat(5),
            layers: alloc::vec![LayerSpec::Dense { out: 16, relu: true }, LayerSpec::Dense { out: 2, relu: false }],
        };
        let net = Network::new(spec, &mut rng::stream(seed, rng::domain::INIT1, 0)).unwrap();
        let hyper = Hyperparams {
            epsilon: 0.3,
            observe: 32,
            target_sync: 50,
            adam: AdamConfig { lr: 1e-2, ..AdamConfig::default() },
            ..Hyperparams::default()
        };
        DqnAgent::new(net, hyper, rng::stream(seed, rng::domain::LAYER1_EXPLORE, 0), rng::stream(seed, rng::domain::REPLAY1, 0))
    }

    #[test]
    fn chain_oracle_values() {
        let q = ChainMdp::new(5).optimal_q(0.9);
        assert!((q[3][1] - 1.0).abs() < 1e-12);
        assert!((q[0][1] - 0.729).abs() < 1e-12);
        assert!((q[0][0] - 0.6561).abs() < 1e-12);
        assert!((q[2][0] - 0.729).abs() < 1e-12);
    }

    #[test]
    fn chain_policy_becomes_optimal() {
        let mut ok = 0;
        for seed in 0..10 {
            let mut env = ChainMdp::new(5);
            let mut agent = chain_agent(seed);
            let mut steps = 0;
            while steps < 2000 {
                let logs = train_loop(&mut env, &mut agent, 1, 50).unwrap();
                steps += logs[0].steps;
            }
            let q = env.optimal_q(0.9);
            let best: Vec<usize> = q[..4].iter().map(|r| if r[1] > r[0] { 1 } else { 0 }).collect();
            if env.greedy_policy(&agent).unwrap() == best {
                ok += 1;
            }
        }
        assert!(ok >= 9, "{ok}/10");
    }

    #[test]
    fn no_gradient_steps_during_observation() {
        let spec = NetSpec { input: Shape::flat(2), layers: alloc::vec![LayerSpec::Dense { out: 2, relu: false }] };
        let net = Network::new(spec, &mut rng::stream(0, 1, 0)).unwrap();
        let before = net.params.clone();
        let hyper = Hyperparams { observe: 1000, batch_size: 4, adam: AdamConfig::default(), ..Hyperparams::default() };
        let mut agent = DqnAgent::new(net, hyper, rng::stream(0, 2, 0), rng::stream(0, 3, 0));
        let logs = train_loop(&mut Constant, &mut agent, 50, 10).unwrap();
        assert_eq!(logs.len(), 50);
        assert_eq!(agent.grad_steps, 0);
        assert_eq!(agent.net.params, before);
    }
}
