//! Adam optimizer with bias correction.

use crate::error::{CoreError, Result};

/// Optimizer hyperparameters.
#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 2e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Per-parameter first/second moment buffers plus the shared step counter.
#[derive(Clone, Debug)]
pub struct AdamState {
    config: AdamConfig,
    step_count: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    /// Fresh state; moment buffers are sized on the first step.
    pub fn new(config: AdamConfig) -> Self {
        AdamState { config, step_count: 0, m: Vec::new(), v: Vec::new() }
    }

    /// Resume with a previously reached step count (moments restart at zero).
    pub fn with_step_count(config: AdamConfig, step_count: u64) -> Self {
        AdamState { config, step_count, m: Vec::new(), v: Vec::new() }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// One optimizer step over `(parameter, gradient)` pairs.
    ///
    /// The pair list must keep the same order and sizes across steps.
    pub fn step(&mut self, params: &mut [(&mut [f64], &[f64])]) -> Result<()> {
        if self.m.is_empty() {
            self.m = params.iter().map(|(p, _)| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(CoreError::config(format!(
                "adam: {} parameter slots registered, {} provided",
                self.m.len(),
                params.len()
            )));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.config;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);
        for (slot, (param, grad)) in params.iter_mut().enumerate() {
            if param.len() != grad.len() || param.len() != self.m[slot].len() {
                return Err(CoreError::shape(format!(
                    "adam: slot {slot} size mismatch (param {}, grad {}, state {})",
                    param.len(),
                    grad.len(),
                    self.m[slot].len()
                )));
            }
            let m = &mut self.m[slot];
            let v = &mut self.v[slot];
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                param[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
