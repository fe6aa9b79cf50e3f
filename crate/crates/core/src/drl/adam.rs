//! Adam optimizer over a flat parameter vector.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, n: usize) -> Self {
        Self { config, m: alloc::vec![0.0; n], v: alloc::vec![0.0; n], t: 0 }
    }

    /// One bias-corrected update of `params` against `grads`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        self.t += 1;
        let bc1 = 1.0 - libm::pow(beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(beta2, self.t as f64);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (libm::sqrt(v_hat) + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut a = Adam::new(AdamConfig::default(), 3);
        let mut p = [1.0, -2.0, 3.0];
        for _ in 0..10 {
            a.step(&mut p, &[0.0; 3]);
        }
        assert_eq!(p, [1.0, -2.0, 3.0]);
    }

    #[test]
    fn three_step_trace_by_hand() {
        // Constant gradient g: m_t = (1 - b1^t) g, v_t = (1 - b2^t) g^2, so
        // the bias-corrected step is lr * g / (|g| + eps) every time.
        let mut a = Adam::new(AdamConfig::default(), 1);
        let mut p = [0.5];
        let g = 0.3;
        let step = 1e-3 * g / (0.3 + 1e-8);
        for k in 1..=3 {
            a.step(&mut p, &[g]);
            assert!((p[0] - (0.5 - k as f64 * step)).abs() < 1e-15, "step {k}: {}", p[0]);
        }
        // Moment values after three steps.
        let m3 = (1.0 - 0.9f64.powi(3)) * g;
        let v3 = (1.0 - 0.999f64.powi(3)) * g * g;
        assert!((a.m[0] - m3).abs() < 1e-15);
        assert!((a.v[0] - v3).abs() < 1e-15);
    }

    #[test]
    fn quadratic_bowl_converges() {
        let centre = [3.0, -1.0, 0.5, 2.0];
        let scale = [1.0, 4.0, 0.5, 2.0];
        let mut p = [0.0; 4];
        let mut a = Adam::new(AdamConfig { lr: 0.05, ..AdamConfig::default() }, 4);
        let mut reached = None;
        for it in 0..10_000 {
            let g: [f64; 4] = core::array::from_fn(|i| 2.0 * scale[i] * (p[i] - centre[i]));
            let norm = libm::sqrt(g.iter().map(|x| x * x).sum::<f64>());
            if norm < 1e-6 {
                reached = Some(it);
                break;
            }
            a.step(&mut p, &g);
        }
        assert!(reached.is_some(), "final {:?}", p);
    }
}
