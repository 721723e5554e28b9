//! Versioned JSON checkpoints (`nn/1`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::batchnorm::{DualBatchNorm, RunningStats};
use super::layers::{Activation, Dense};
use super::network::{Layer, LayerSpec, Network};
use super::optim::Optimizer;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const FORMAT: &str = "nn/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BnStats {
    pub layer: usize,
    pub real: RunningStats,
    pub synthetic: RunningStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    /// Free-form header, e.g. the task and alphabet of a recognizer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub header: Option<serde_json::Value>,
    pub architecture: Vec<LayerSpec>,
    pub parameters: Vec<ParamTensor>,
    pub running_stats: Vec<BnStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<Optimizer>,
}

impl Checkpoint {
    pub fn from_network(net: &Network) -> Self {
        let mut parameters = Vec::new();
        let mut running_stats = Vec::new();
        for (i, l) in net.layers.iter().enumerate() {
            match l {
                Layer::Dense(d) => {
                    parameters.push(ParamTensor {
                        name: format!("{i}.weight"),
                        shape: vec![d.outputs(), d.inputs()],
                        values: d.weights.data().to_vec(),
                    });
                    parameters.push(ParamTensor {
                        name: format!("{i}.bias"),
                        shape: vec![d.outputs()],
                        values: d.bias.clone(),
                    });
                }
                Layer::BatchNorm(bn) => {
                    parameters.push(ParamTensor {
                        name: format!("{i}.gamma"),
                        shape: vec![bn.channels()],
                        values: bn.gamma.clone(),
                    });
                    parameters.push(ParamTensor {
                        name: format!("{i}.beta"),
                        shape: vec![bn.channels()],
                        values: bn.beta.clone(),
                    });
                    running_stats.push(BnStats {
                        layer: i,
                        real: bn.running_real.clone(),
                        synthetic: bn.running_synt.clone(),
                    });
                }
                Layer::Activation(_) => {}
            }
        }
        Checkpoint {
            format: FORMAT.to_string(),
            header: None,
            architecture: net.architecture(),
            parameters,
            running_stats,
            optimizer: None,
        }
    }

    pub fn with_header(mut self, header: serde_json::Value) -> Self {
        self.header = Some(header);
        self
    }

    /// Adds one key to an object header, creating the header if absent.
    pub fn with_header_field(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        let mut h = match self.header.take() {
            Some(serde_json::Value::Object(m)) => m,
            _ => serde_json::Map::new(),
        };
        h.insert(key.to_string(), value.into());
        self.header = Some(serde_json::Value::Object(h));
        self
    }

    pub fn with_optimizer(mut self, opt: Optimizer) -> Self {
        self.optimizer = Some(opt);
        self
    }

    pub fn to_network(&self) -> Result<Network> {
        if self.format != FORMAT {
            return Err(Error::Config(format!(
                "checkpoint format {:?}, expected {FORMAT:?}",
                self.format
            )));
        }
        let mut params = self.parameters.iter();
        let mut stats = self.running_stats.iter();
        let mut next = |expect: usize| -> Result<Vec<f64>> {
            let t = params
                .next()
                .ok_or_else(|| Error::Config("checkpoint is missing parameters".into()))?;
            if t.values.len() != expect {
                return Err(Error::Config(format!("tensor {} has wrong size", t.name)));
            }
            Ok(t.values.clone())
        };
        let mut layers = Vec::with_capacity(self.architecture.len());
        for (i, spec) in self.architecture.iter().enumerate() {
            layers.push(match *spec {
                LayerSpec::Dense { inputs, outputs } => Layer::Dense(Dense {
                    weights: Matrix::from_vec(outputs, inputs, next(inputs * outputs)?),
                    bias: next(outputs)?,
                }),
                LayerSpec::Tanh => Layer::Activation(Activation::Tanh),
                LayerSpec::Relu => Layer::Activation(Activation::Relu),
                LayerSpec::Sigmoid => Layer::Activation(Activation::Sigmoid),
                LayerSpec::BatchNorm {
                    channels,
                    momentum,
                    eps,
                    routing,
                } => {
                    let gamma = next(channels)?;
                    let beta = next(channels)?;
                    let s = stats
                        .next()
                        .filter(|s| s.layer == i)
                        .ok_or_else(|| Error::Config(format!("layer {i} lacks running stats")))?;
                    Layer::BatchNorm(DualBatchNorm {
                        gamma,
                        beta,
                        running_real: s.real.clone(),
                        running_synt: s.synthetic.clone(),
                        momentum,
                        eps,
                        routing,
                    })
                }
            });
        }
        Network::new(layers).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}
