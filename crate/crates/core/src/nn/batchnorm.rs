//! Batch normalization with separate running statistics for real and
//! synthetic mini-batches and a single shared affine pair.

use serde::{Deserialize, Serialize};

use super::DomainTag;
use crate::linalg::Matrix;

pub const DEFAULT_MOMENTUM: f64 = 0.1;
pub const DEFAULT_EPS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    pub fn init(channels: usize) -> Self {
        RunningStats {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
        }
    }

    /// Exponential moving average towards a batch mean and unbiased variance.
    pub fn update(&mut self, momentum: f64, batch_mean: &[f64], batch_var_unbiased: &[f64]) {
        for (m, b) in self.mean.iter_mut().zip(batch_mean) {
            *m = (1.0 - momentum) * *m + momentum * b;
        }
        for (v, b) in self.var.iter_mut().zip(batch_var_unbiased) {
            *v = (1.0 - momentum) * *v + momentum * b;
        }
    }
}

/// How train-mode batches feed the running statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatsRouting {
    /// Real-tagged batches update `running_real`, synthetic ones `running_synt`.
    #[default]
    Dual,
    /// Every batch updates `running_real`; `running_synt` is never touched.
    Shared,
}

/// Which statistics a forward pass normalized with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StatsSource {
    Batch,
    RunningReal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualBatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_real: RunningStats,
    pub running_synt: RunningStats,
    pub momentum: f64,
    pub eps: f64,
    pub routing: StatsRouting,
}

pub(crate) struct BnTrainOutput {
    pub output: Matrix,
    pub normalized: Matrix,
    pub inv_std: Vec<f64>,
}

impl DualBatchNorm {
    pub fn new(channels: usize) -> Self {
        DualBatchNorm {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_real: RunningStats::init(channels),
            running_synt: RunningStats::init(channels),
            momentum: DEFAULT_MOMENTUM,
            eps: DEFAULT_EPS,
            routing: StatsRouting::Dual,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Batch statistics: mean and biased variance per channel.
    pub fn batch_stats(x: &Matrix) -> (Vec<f64>, Vec<f64>) {
        let (n, c) = (x.rows() as f64, x.cols());
        let mut mean = vec![0.0; c];
        for r in x.iter_rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; c];
        for r in x.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        var.iter_mut().for_each(|s| *s /= n);
        (mean, var)
    }

    /// Train-mode pass: normalize with the batch's own statistics and fold
    /// them into the running set selected by `tag` and the routing.
    /// Requires at least two rows (checked by the caller).
    pub(crate) fn forward_train(&mut self, x: &Matrix, tag: DomainTag) -> BnTrainOutput {
        let n = x.rows();
        let (mean, var) = Self::batch_stats(x);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let mut normalized = x.clone();
        let mut output = x.clone();
        for i in 0..n {
            let xn = normalized.row_mut(i);
            for j in 0..xn.len() {
                xn[j] = (xn[j] - mean[j]) * inv_std[j];
            }
            let out = output.row_mut(i);
            for j in 0..out.len() {
                out[j] = self.gamma[j] * normalized.get(i, j) + self.beta[j];
            }
        }
        let correction = n as f64 / (n as f64 - 1.0);
        let unbiased: Vec<f64> = var.iter().map(|v| v * correction).collect();
        let target = match (self.routing, tag) {
            (StatsRouting::Dual, DomainTag::Synthetic) => &mut self.running_synt,
            _ => &mut self.running_real,
        };
        target.update(self.momentum, &mean, &unbiased);
        BnTrainOutput {
            output,
            normalized,
            inv_std,
        }
    }

    /// Eval-mode pass: always normalizes with `running_real`.
    pub(crate) fn forward_eval(&self, x: &Matrix) -> (Matrix, Matrix, Vec<f64>) {
        let stats = &self.running_real;
        let inv_std: Vec<f64> = stats.var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let mut normalized = x.clone();
        for i in 0..x.rows() {
            let r = normalized.row_mut(i);
            for j in 0..r.len() {
                r[j] = (r[j] - stats.mean[j]) * inv_std[j];
            }
        }
        let mut output = normalized.clone();
        for i in 0..x.rows() {
            let r = output.row_mut(i);
            for j in 0..r.len() {
                r[j] = self.gamma[j] * r[j] + self.beta[j];
            }
        }
        (output, normalized, inv_std)
    }

    /// Returns `(dX, dgamma, dbeta)`. With batch statistics the input gradient
    /// includes the paths through the batch mean and variance.
    pub(crate) fn backward(
        &self,
        normalized: &Matrix,
        inv_std: &[f64],
        source: StatsSource,
        dy: &Matrix,
    ) -> (Matrix, Vec<f64>, Vec<f64>) {
        let (n, c) = (dy.rows(), dy.cols());
        let mut dgamma = vec![0.0; c];
        let mut dbeta = vec![0.0; c];
        for i in 0..n {
            for j in 0..c {
                dgamma[j] += dy.get(i, j) * normalized.get(i, j);
                dbeta[j] += dy.get(i, j);
            }
        }
        let mut dx = Matrix::zeros(n, c);
        match source {
            StatsSource::RunningReal => {
                for i in 0..n {
                    for j in 0..c {
                        dx.set(i, j, dy.get(i, j) * self.gamma[j] * inv_std[j]);
                    }
                }
            }
            StatsSource::Batch => {
                let nf = n as f64;
                // sum_i dxhat_i and sum_i dxhat_i * xhat_i per channel
                let mut sum_dxhat = vec![0.0; c];
                let mut sum_dxhat_xhat = vec![0.0; c];
                for i in 0..n {
                    for j in 0..c {
                        let dxhat = dy.get(i, j) * self.gamma[j];
                        sum_dxhat[j] += dxhat;
                        sum_dxhat_xhat[j] += dxhat * normalized.get(i, j);
                    }
                }
                for i in 0..n {
                    for j in 0..c {
                        let dxhat = dy.get(i, j) * self.gamma[j];
                        let v = inv_std[j] / nf
                            * (nf * dxhat - sum_dxhat[j] - normalized.get(i, j) * sum_dxhat_xhat[j]);
                        dx.set(i, j, v);
                    }
                }
            }
        }
        (dx, dgamma, dbeta)
    }
}
