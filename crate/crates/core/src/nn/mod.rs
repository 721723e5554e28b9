//! Minimal dense network core with hand-derived gradients.
//!
//! The one non-standard piece is [`DualBatchNorm`]: batch normalization that
//! keeps one set of running statistics for real mini-batches and another for
//! synthetic ones while sharing a single `gamma`/`beta` pair. Inference always
//! normalizes with the real statistics.

mod batchnorm;
mod checkpoint;
mod layers;
mod network;
mod optim;

use serde::{Deserialize, Serialize};

pub use batchnorm::{DualBatchNorm, RunningStats, StatsRouting, StatsSource, DEFAULT_EPS, DEFAULT_MOMENTUM};
pub use checkpoint::{BnStats, Checkpoint, ParamTensor, FORMAT as CHECKPOINT_FORMAT};
pub use layers::{Activation, Dense};
pub use network::{average_parameters, Backward, ForwardCache, ForwardPass, Gradients, Layer, LayerSpec, Network};
pub use optim::{Method, Optimizer, OptimizerConfig};

/// Origin of a training mini-batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainTag {
    Real,
    Synthetic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}
