use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sigmoid, softplus, Matrix};
use crate::nn::{Activation, Network, Optimizer, OptimizerConfig};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Share of each class held out to pick the epoch with the lowest
    /// held-out loss; 0 trains on everything and keeps the last epoch.
    pub holdout: f64,
    /// The kept epoch is the earliest whose held-out loss is within this
    /// many paired standard errors of the best one.
    pub tolerance_se: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            hidden: vec![32, 32],
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 64,
            holdout: 0.2,
            tolerance_se: 1.0,
        }
    }
}

/// Per-feature z-scoring; masked features are forced to zero afterwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub mask: Vec<bool>,
}

impl Normalizer {
    pub fn fit(rows: &[Vec<f64>], mask: Vec<bool>) -> Self {
        let dim = mask.len();
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..dim).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n).collect();
        let std = (0..dim)
            .map(|k| {
                let v = rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / n;
                v.sqrt()
            })
            .collect();
        Normalizer { mean, std, mask }
    }

    /// True when no unmasked feature varies.
    pub fn is_degenerate(&self) -> bool {
        self.std.iter().zip(&self.mask).all(|(s, &m)| !m || *s == 0.0)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, v)| {
                if !self.mask[k] {
                    0.0
                } else if self.std[k] > 0.0 {
                    (v - self.mean[k]) / self.std[k]
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Logistic MLP `x -> P(positive | x)` trained with class-balanced binary
/// cross-entropy, so that with equal-size pools it targets
/// `p_pos / (p_pos + p_neg)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryClassifier {
    pub normalizer: Normalizer,
    /// `None` is the constant one-half classifier.
    pub net: Option<Network>,
    /// Training-split loss after each epoch.
    pub epoch_losses: Vec<f64>,
    /// Epoch whose weights were kept.
    #[serde(default)]
    pub selected_epoch: usize,
}

impl BinaryClassifier {
    pub fn constant(dim: usize) -> Self {
        BinaryClassifier {
            normalizer: Normalizer {
                mean: vec![0.0; dim],
                std: vec![0.0; dim],
                mask: vec![false; dim],
            },
            net: None,
            epoch_losses: Vec::new(),
            selected_epoch: 0,
        }
    }

    pub fn fit(positive: &[Vec<f64>], negative: &[Vec<f64>], mask: Vec<bool>, cfg: &ClassifierConfig, seed: u64) -> Result<Self> {
        if positive.is_empty() || negative.is_empty() {
            return Err(Error::Contract("classifier needs both classes".into()));
        }
        let dim = mask.len();
        if positive.iter().chain(negative).any(|r| r.len() != dim || r.iter().any(|v| !v.is_finite())) {
            return Err(Error::Contract(format!("classifier rows must be finite and {dim}-wide")));
        }
        let all: Vec<Vec<f64>> = positive.iter().chain(negative).cloned().collect();
        let normalizer = Normalizer::fit(&all, mask);
        if normalizer.is_degenerate() {
            log::warn!("all discriminator features are identical; using the constant 0.5 classifier");
            let mut c = BinaryClassifier::constant(dim);
            c.normalizer = normalizer;
            return Ok(c);
        }

        let x: Vec<Vec<f64>> = all.iter().map(|r| normalizer.apply(r)).collect();
        let target: Vec<f64> = (0..all.len()).map(|i| f64::from(u8::from(i < positive.len()))).collect();
        // each class carries half of the total weight
        let (np, nn) = (positive.len() as f64, negative.len() as f64);
        let weight: Vec<f64> = target
            .iter()
            .map(|&t| if t == 1.0 { 0.5 * (np + nn) / np } else { 0.5 * (np + nn) / nn })
            .collect();

        let mut init = seed::stream(seed, "classifier/init");
        let mut dims = vec![dim];
        dims.extend(&cfg.hidden);
        dims.push(1);
        let mut net = Network::mlp(&dims, Activation::Tanh, false, &mut init);
        let mut opt = Optimizer::new(OptimizerConfig::adam(cfg.learning_rate), &net);
        let (train_idx, held_idx) = split_holdout(positive.len(), negative.len(), cfg.holdout, seed);
        let mut order_rng = seed::stream(seed, "classifier/order");
        let mut order = train_idx.clone();
        let subset = |idx: &[usize]| -> (Matrix, Vec<f64>, Vec<f64>) {
            let rows: Vec<&[f64]> = idx.iter().map(|&i| x[i].as_slice()).collect();
            (
                Matrix::from_rows(&rows),
                idx.iter().map(|&i| target[i]).collect(),
                idx.iter().map(|&i| weight[i]).collect(),
            )
        };
        let train_set = subset(&train_idx);
        let held_set = subset(&held_idx);
        let mut epoch_losses = Vec::with_capacity(cfg.epochs);
        // (per-row held-out losses, weights) per epoch
        let mut history: Vec<(Vec<f64>, Network)> = Vec::with_capacity(cfg.epochs);

        for _ in 0..cfg.epochs {
            order.shuffle(&mut order_rng);
            for idx in order.chunks(cfg.batch_size.max(1)) {
                let rows: Vec<&[f64]> = idx.iter().map(|&i| x[i].as_slice()).collect();
                let input = Matrix::from_rows(&rows);
                let pass = net.forward(&input, crate::nn::DomainTag::Real, crate::nn::Mode::Train)?;
                let wsum: f64 = idx.iter().map(|&i| weight[i]).sum();
                let mut g = Matrix::zeros(idx.len(), 1);
                for (r, &i) in idx.iter().enumerate() {
                    let z = pass.output.get(r, 0);
                    g.set(r, 0, weight[i] * (sigmoid(z) - target[i]) / wsum);
                }
                let back = net.backward(&pass.cache, &g)?;
                opt.step(&mut net, &back.gradients)?;
            }
            let loss = bce(&net.infer(&train_set.0)?, &train_set.1, &train_set.2);
            if !loss.is_finite() {
                return Err(Error::Divergence("discriminator loss is not finite".into()));
            }
            epoch_losses.push(loss);
            let held = if held_idx.is_empty() {
                Vec::new()
            } else {
                row_losses(&net.infer(&held_set.0)?, &held_set.1, &held_set.2)
            };
            history.push((held, net.clone()));
        }
        let (net, selected_epoch) = match select_epoch(&history, cfg.tolerance_se) {
            Some(e) => (history.swap_remove(e).1, e),
            None => (net, 0),
        };
        Ok(BinaryClassifier {
            normalizer,
            net: Some(net),
            epoch_losses,
            selected_epoch,
        })
    }

    pub fn logits(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let Some(net) = &self.net else {
            return Ok(vec![0.0; rows.len()]);
        };
        if rows.is_empty() {
            return Ok(Vec::new());
        }
        let x: Vec<Vec<f64>> = rows.iter().map(|r| self.normalizer.apply(r)).collect();
        Ok(net.infer(&Matrix::from_rows(&x))?.into_data())
    }

    pub fn probs(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self.logits(rows)?.into_iter().map(sigmoid).collect())
    }
}

/// Row indices for training and for the held-out split, stratified by class
/// (positives first). Classes too small to spare a row are not split.
fn split_holdout(n_pos: usize, n_neg: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = seed::stream(seed, "classifier/holdout");
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for (start, n) in [(0, n_pos), (n_pos, n_neg)] {
        let mut idx: Vec<usize> = (start..start + n).collect();
        idx.shuffle(&mut rng);
        let k = ((fraction * n as f64).floor() as usize).min(n.saturating_sub(1));
        let k = if n >= 5 { k } else { 0 };
        held.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    held.sort_unstable();
    (train, held)
}

/// Per-row weighted losses, scaled so that their plain mean is the
/// weighted mean loss.
fn row_losses(z: &Matrix, target: &[f64], weight: &[f64]) -> Vec<f64> {
    let scale = weight.len() as f64 / weight.iter().sum::<f64>();
    z.data()
        .iter()
        .zip(target)
        .zip(weight)
        .map(|((&z, &t), &w)| scale * w * (softplus(z) - t * z))
        .collect()
}

/// Earliest epoch whose held-out loss exceeds the best epoch's by at most
/// `tolerance` paired standard errors. Without a held-out split, the last.
fn select_epoch(history: &[(Vec<f64>, Network)], tolerance: f64) -> Option<usize> {
    if history.first()?.0.is_empty() {
        return Some(history.len() - 1);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let means: Vec<f64> = history.iter().map(|h| mean(&h.0)).collect();
    let best = (0..means.len()).min_by(|&a, &b| means[a].total_cmp(&means[b]))?;
    (0..=best).find(|&e| {
        let diff: Vec<f64> = history[e].0.iter().zip(&history[best].0).map(|(a, b)| a - b).collect();
        let m = mean(&diff);
        let var = diff.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (diff.len() as f64 - 1.0).max(1.0);
        m <= tolerance * (var / diff.len() as f64).sqrt()
    })
}

fn bce(z: &Matrix, target: &[f64], weight: &[f64]) -> f64 {
    let wsum: f64 = weight.iter().sum();
    z.data()
        .iter()
        .zip(target)
        .zip(weight)
        .map(|((&z, &t), &w)| w * (softplus(z) - t * z))
        .sum::<f64>()
        / wsum
}
