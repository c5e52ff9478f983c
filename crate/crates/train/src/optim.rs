//! Base optimizers. They consume whatever gradient they are handed, raw or
//! perturbed.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerConfig {
    /// v ← μv + g; w ← w − η(g + μv) with Nesterov, w ← w − ηv without.
    SgdMomentum { momentum: f64, nesterov: bool },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerConfig {
    pub fn sgd_nesterov() -> Self {
        OptimizerConfig::SgdMomentum {
            momentum: 0.9,
            nesterov: true,
        }
    }

    pub fn adam() -> Self {
        OptimizerConfig::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            OptimizerConfig::SgdMomentum { momentum, .. } => (0.0..1.0).contains(&momentum),
            OptimizerConfig::Adam { beta1, beta2, eps } => {
                (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid optimizer settings {self:?}")))
        }
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::adam()
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, num_params: usize) -> Result<Self> {
        config.validate()?;
        let second = match config {
            OptimizerConfig::Adam { .. } => vec![0.0; num_params],
            OptimizerConfig::SgdMomentum { .. } => Vec::new(),
        };
        Ok(Self {
            config,
            first: vec![0.0; num_params],
            second,
            steps: 0,
        })
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), grad.len());
        self.steps += 1;
        match self.config {
            OptimizerConfig::SgdMomentum { momentum, nesterov } => {
                for ((w, v), &g) in params.iter_mut().zip(&mut self.first).zip(grad) {
                    *v = momentum * *v + g;
                    let d = if nesterov { g + momentum * *v } else { *v };
                    *w -= lr * d;
                }
            }
            OptimizerConfig::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.steps as i32);
                let c2 = 1.0 - beta2.powi(self.steps as i32);
                for (((w, m), v), &g) in params
                    .iter_mut()
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                    .zip(grad)
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                }
            }
        }
    }
}
