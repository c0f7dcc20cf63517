use crate::error::{Error, Result};

use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moment buffers are tied to the parameter list
/// given at construction.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[Tensor]) -> Self {
        Self {
            config,
            m: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Updates `params` in place from their accumulated gradients. A missing
    /// gradient counts as zero.
    pub fn step(&mut self, params: &[Tensor]) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::ShapeMismatch(format!(
                "optimizer holds {} parameters, got {}",
                self.m.len(),
                params.len()
            )));
        }
        for (i, p) in params.iter().enumerate() {
            if p.numel() != self.m[i].len() {
                return Err(Error::ShapeMismatch(format!(
                    "parameter {i} has {} values, optimizer state {}",
                    p.numel(),
                    self.m[i].len()
                )));
            }
        }
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for (i, p) in params.iter().enumerate() {
            let grad = p.grad_ref();
            let Some(g) = grad.as_ref() else {
                // Moments still decay so the schedule matches a zero gradient.
                self.m[i].iter_mut().for_each(|m| *m *= c.beta1);
                self.v[i].iter_mut().for_each(|v| *v *= c.beta2);
                continue;
            };
            let mut values = p.values_mut();
            for (((w, &g), m), v) in values.iter_mut().zip(g).zip(&mut self.m[i]).zip(&mut self.v[i]) {
                *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
            }
        }
        Ok(())
    }
}
