//! Training over real and synthetic pools with batch purity, dual
//! batch-norm routing, per-epoch validation and top-k checkpoint averaging.

mod batches;

use serde::{Deserialize, Serialize};

pub use batches::{make_batches, Batch, Batching, MixPolicy};

use crate::error::{Error, Result};
use crate::gapgen::{Origin, Sample};
use crate::linalg::Matrix;
use crate::metrics::MetricReport;
use crate::nn::{average_parameters, DomainTag, Mode, Network, Optimizer, OptimizerConfig, StatsRouting};
use crate::recognizer::TaskModel;
use crate::seed;

pub const DEFAULT_CHECKPOINT_K: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub mix_policy: MixPolicy,
    pub batching: Batching,
    /// Separate running statistics for real and synthetic batches.
    pub double_bn: bool,
    pub checkpoint_k: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            optimizer: OptimizerConfig::adam(3e-3),
            mix_policy: MixPolicy::default(),
            batching: Batching::Pure,
            double_bn: false,
            checkpoint_k: DEFAULT_CHECKPOINT_K,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.checkpoint_k == 0 {
            return Err(Error::Config("epochs, batch_size and checkpoint_k must be positive".into()));
        }
        if let MixPolicy::Interleaved { real_fraction: Some(f) } = self.mix_policy {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!("real_fraction {f} outside [0, 1]")));
            }
        }
        if self.double_bn && self.batching == Batching::Mixed {
            return Err(Error::Config("double BN needs pure batches".into()));
        }
        Ok(())
    }

    /// Routing actually used: double BN is switched off when no real data
    /// is trained on.
    pub fn effective_routing(&self) -> StatsRouting {
        let synth_only = matches!(self.mix_policy, MixPolicy::SynthOnly)
            || matches!(self.mix_policy, MixPolicy::Interleaved { real_fraction: Some(f) } if f <= 0.0);
        if self.double_bn && !synth_only {
            StatsRouting::Dual
        } else {
            StatsRouting::Shared
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Accuracy (keyword) or negative WER (sequence); higher is better.
    pub validation: f64,
    /// Index into [`TrainOutcome::snapshots`].
    pub checkpoint: usize,
}

pub struct TrainOutcome<M> {
    /// Average of the `checkpoint_k` best epochs.
    pub model: M,
    pub records: Vec<EpochRecord>,
    /// Epochs that went into the average, best first.
    pub selected: Vec<usize>,
    /// Network after every epoch.
    pub snapshots: Vec<Network>,
}

/// Sees every training batch just before its forward pass.
pub trait BatchObserver {
    fn observe(&mut self, epoch: usize, tag: DomainTag, input: &Matrix, net: &Network);
}

/// Indices of the `k` best records by validation, ties to earlier epochs.
pub fn select_best(records: &[EpochRecord], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        records[b]
            .validation
            .total_cmp(&records[a].validation)
            .then(records[a].epoch.cmp(&records[b].epoch))
    });
    order.truncate(k);
    order
}

pub fn train<M: TaskModel>(model: M, real: &[Sample], synth: &[Sample], val: &[Sample], cfg: &TrainConfig) -> Result<TrainOutcome<M>> {
    train_observed(model, real, synth, val, cfg, None)
}

pub fn train_observed<M: TaskModel>(
    mut model: M,
    real: &[Sample],
    synth: &[Sample],
    val: &[Sample],
    cfg: &TrainConfig,
    mut observer: Option<&mut dyn BatchObserver>,
) -> Result<TrainOutcome<M>> {
    cfg.validate()?;
    if val.is_empty() {
        return Err(Error::Contract("validation set is empty".into()));
    }
    if real.iter().any(|s| s.origin != Origin::Real) {
        return Err(Error::Contract("real pool contains synthetic samples".into()));
    }
    let routing = cfg.effective_routing();
    if cfg.double_bn && routing == StatsRouting::Shared {
        log::warn!("double BN is disabled without real training data; running_real will hold synthetic statistics");
    }
    model.network_mut().set_routing(routing);
    let has_bn = model.network().batch_norms().next().is_some();

    let mut opt = Optimizer::new(cfg.optimizer.clone(), model.network());
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut snapshots = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let epoch_seed = seed::derive(cfg.seed, &format!("batching/{epoch}"));
        let batches = make_batches(real.len(), synth.len(), cfg, epoch_seed)?;
        let (mut loss_sum, mut n_batches) = (0.0, 0usize);
        for batch in &batches {
            if has_bn && batch.members.len() < 2 {
                continue;
            }
            let samples: Vec<&Sample> = batch
                .members
                .iter()
                .map(|&(o, i)| match o {
                    Origin::Real => &real[i],
                    Origin::Synthetic => &synth[i],
                })
                .collect();
            let input = model.encode(&samples)?;
            if let Some(obs) = observer.as_deref_mut() {
                obs.observe(epoch, batch.tag, &input, model.network());
            }
            let pass = model.network_mut().forward(&input, batch.tag, Mode::Train)?;
            let (loss, grad) = model.loss_and_grad(&pass.output, &samples)?;
            if !loss.is_finite() {
                return Err(Error::Divergence(format!("loss {loss} at epoch {epoch}")));
            }
            let back = model.network().backward(&pass.cache, &grad)?;
            opt.step(model.network_mut(), &back.gradients)?;
            loss_sum += loss;
            n_batches += 1;
        }
        let validation = model.validation_score(val)?;
        log::debug!("epoch {epoch}: loss {:.4} validation {validation:.4}", loss_sum / n_batches.max(1) as f64);
        records.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n_batches.max(1) as f64,
            validation,
            checkpoint: snapshots.len(),
        });
        snapshots.push(model.network().clone());
    }

    let selected = select_best(&records, cfg.checkpoint_k);
    let chosen: Vec<Network> = selected.iter().map(|&i| snapshots[records[i].checkpoint].clone()).collect();
    *model.network_mut() = average_parameters(&chosen)?;
    Ok(TrainOutcome {
        model,
        records,
        selected,
        snapshots,
    })
}

/// Test metrics in eval mode (real statistics only).
pub fn evaluate<M: TaskModel>(model: &M, test: &[Sample]) -> Result<MetricReport> {
    model.evaluate(test)
}
