use serde::{Deserialize, Serialize};

use super::network::{Gradients, Network};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Method {
    pub fn adam() -> Self {
        Method::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    #[serde(flatten)]
    pub method: Method,
    pub learning_rate: f64,
}

impl OptimizerConfig {
    pub fn adam(learning_rate: f64) -> Self {
        OptimizerConfig {
            method: Method::adam(),
            learning_rate,
        }
    }

    pub fn sgd(learning_rate: f64, momentum: f64) -> Self {
        OptimizerConfig {
            method: Method::Sgd { momentum },
            learning_rate,
        }
    }
}

/// Optimizer with per-parameter moment buffers mirroring the network's
/// parameter tensors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    pub config: OptimizerConfig,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    steps: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, net: &Network) -> Self {
        let zeros: Vec<Vec<f64>> = net.param_tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        let second = match config.method {
            Method::Adam { .. } => zeros.clone(),
            Method::Sgd { .. } => Vec::new(),
        };
        Optimizer {
            config,
            first_moment: zeros,
            second_moment: second,
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::Divergence(format!(
                "non-finite gradient at optimizer step {}",
                self.steps + 1
            )));
        }
        let mut params = net.param_tensors_mut();
        if params.len() != grads.tensors.len()
            || params.len() != self.first_moment.len()
            || params
                .iter()
                .zip(&grads.tensors)
                .zip(&self.first_moment)
                .any(|((p, g), m)| p.len() != g.len() || p.len() != m.len())
        {
            return Err(Error::Contract(
                "gradient/buffer shapes do not mirror the parameters".into(),
            ));
        }
        self.steps += 1;
        let lr = self.config.learning_rate;
        match self.config.method {
            Method::Sgd { momentum } => {
                for ((p, g), v) in params.iter_mut().zip(&grads.tensors).zip(&mut self.first_moment) {
                    for j in 0..p.len() {
                        v[j] = momentum * v[j] + g[j];
                        p[j] -= lr * v[j];
                    }
                }
            }
            Method::Adam { beta1, beta2, eps } => {
                let t = self.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(&grads.tensors)
                    .zip(&mut self.first_moment)
                    .zip(&mut self.second_moment)
                {
                    for j in 0..p.len() {
                        m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                        v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                        let mhat = m[j] / c1;
                        let vhat = v[j] / c2;
                        p[j] -= lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}
