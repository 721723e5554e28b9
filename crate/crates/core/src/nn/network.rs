use serde::{Deserialize, Serialize};

use super::batchnorm::{DualBatchNorm, StatsRouting, StatsSource};
use super::layers::{Activation, Dense};
use super::{DomainTag, Mode};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::seed::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Layer {
    Dense(Dense),
    Activation(Activation),
    BatchNorm(DualBatchNorm),
}

/// Shape-only description of a layer; two networks with equal descriptors
/// can be averaged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense { inputs: usize, outputs: usize },
    Tanh,
    Relu,
    Sigmoid,
    BatchNorm {
        channels: usize,
        momentum: f64,
        eps: f64,
        routing: StatsRouting,
    },
}

impl Layer {
    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Dense(d) => LayerSpec::Dense {
                inputs: d.inputs(),
                outputs: d.outputs(),
            },
            Layer::Activation(Activation::Tanh) => LayerSpec::Tanh,
            Layer::Activation(Activation::Relu) => LayerSpec::Relu,
            Layer::Activation(Activation::Sigmoid) => LayerSpec::Sigmoid,
            Layer::BatchNorm(bn) => LayerSpec::BatchNorm {
                channels: bn.channels(),
                momentum: bn.momentum,
                eps: bn.eps,
                routing: bn.routing,
            },
        }
    }
}

#[derive(Clone, Debug)]
enum LayerCache {
    Dense { input: Matrix },
    Activation { input: Matrix, output: Matrix },
    BatchNorm {
        normalized: Matrix,
        inv_std: Vec<f64>,
        source: StatsSource,
    },
}

/// Everything [`Network::backward`] needs from a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    mode: Mode,
    layers: Vec<LayerCache>,
    rows: usize,
}

impl ForwardCache {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Statistics each batch-norm layer normalized with, in layer order.
    pub fn stats_sources(&self) -> Vec<StatsSource> {
        self.layers
            .iter()
            .filter_map(|c| match c {
                LayerCache::BatchNorm { source, .. } => Some(*source),
                _ => None,
            })
            .collect()
    }
}

pub struct ForwardPass {
    pub output: Matrix,
    pub cache: ForwardCache,
}

/// Parameter gradients in [`Network::param_tensors`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub struct Backward {
    pub gradients: Gradients,
    pub input_grad: Matrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let net = Network { layers };
        net.check_dims()?;
        Ok(net)
    }

    /// Multilayer perceptron over `dims` (input, hidden..., output). Every
    /// hidden layer is `Dense -> [BatchNorm] -> activation`.
    pub fn mlp(dims: &[usize], activation: Activation, batch_norm: bool, rng: &mut Rng) -> Self {
        assert!(dims.len() >= 2, "an mlp needs input and output sizes");
        let mut layers = Vec::new();
        for w in dims.windows(2).take(dims.len() - 2) {
            layers.push(Layer::Dense(Dense::new(w[0], w[1], rng)));
            if batch_norm {
                layers.push(Layer::BatchNorm(DualBatchNorm::new(w[1])));
            }
            layers.push(Layer::Activation(activation));
        }
        let n = dims.len();
        layers.push(Layer::Dense(Dense::new(dims[n - 2], dims[n - 1], rng)));
        Network { layers }
    }

    fn check_dims(&self) -> Result<()> {
        let mut width: Option<usize> = None;
        for (i, l) in self.layers.iter().enumerate() {
            let (inp, out) = match l {
                Layer::Dense(d) => {
                    if d.bias.len() != d.outputs() {
                        return Err(Error::Contract(format!("layer {i}: bias length mismatch")));
                    }
                    (Some(d.inputs()), Some(d.outputs()))
                }
                Layer::BatchNorm(bn) => (Some(bn.channels()), Some(bn.channels())),
                Layer::Activation(_) => (None, None),
            };
            if let (Some(w), Some(inp)) = (width, inp) {
                if w != inp {
                    return Err(Error::Contract(format!(
                        "layer {i} expects width {inp}, previous layer gives {w}"
                    )));
                }
            }
            if out.is_some() {
                width = out;
            }
        }
        Ok(())
    }

    pub fn architecture(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.layers.iter().find_map(|l| match l {
            Layer::Dense(d) => Some(d.inputs()),
            Layer::BatchNorm(bn) => Some(bn.channels()),
            Layer::Activation(_) => None,
        })
    }

    pub fn output_dim(&self) -> Option<usize> {
        self.layers.iter().rev().find_map(|l| match l {
            Layer::Dense(d) => Some(d.outputs()),
            Layer::BatchNorm(bn) => Some(bn.channels()),
            Layer::Activation(_) => None,
        })
    }

    pub fn batch_norms(&self) -> impl Iterator<Item = &DualBatchNorm> {
        self.layers.iter().filter_map(|l| match l {
            Layer::BatchNorm(bn) => Some(bn),
            _ => None,
        })
    }

    pub fn set_routing(&mut self, routing: StatsRouting) {
        for l in &mut self.layers {
            if let Layer::BatchNorm(bn) = l {
                bn.routing = routing;
            }
        }
    }

    /// Parameter tensors in a fixed order: per layer, dense weights then
    /// bias, batch-norm gamma then beta.
    pub fn param_tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            match l {
                Layer::Dense(d) => {
                    out.push(d.weights.data());
                    out.push(&d.bias);
                }
                Layer::BatchNorm(bn) => {
                    out.push(&bn.gamma);
                    out.push(&bn.beta);
                }
                Layer::Activation(_) => {}
            }
        }
        out
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            match l {
                Layer::Dense(d) => {
                    out.push(d.weights.data_mut());
                    out.push(&mut d.bias);
                }
                Layer::BatchNorm(bn) => {
                    out.push(&mut bn.gamma);
                    out.push(&mut bn.beta);
                }
                Layer::Activation(_) => {}
            }
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.param_tensors().iter().map(|t| t.len()).sum()
    }

    fn check_input(&self, input: &Matrix) -> Result<()> {
        if input.rows() == 0 {
            return Err(Error::Contract("empty batch".into()));
        }
        if let Some(d) = self.input_dim() {
            if input.cols() != d {
                return Err(Error::Contract(format!(
                    "input width {} but network expects {d}",
                    input.cols()
                )));
            }
        }
        Ok(())
    }

    /// Forward pass. In `Train` mode batch-norm layers normalize with the
    /// batch statistics and update the running set chosen by `tag`; in `Eval`
    /// mode they use `running_real` whatever the tag and nothing is mutated.
    pub fn forward(&mut self, input: &Matrix, tag: DomainTag, mode: Mode) -> Result<ForwardPass> {
        match mode {
            Mode::Eval => self.infer_traced(input),
            Mode::Train => self.forward_train(input, tag),
        }
    }

    fn forward_train(&mut self, input: &Matrix, tag: DomainTag) -> Result<ForwardPass> {
        self.check_input(input)?;
        if input.rows() < 2 {
            if let Some(i) = self.layers.iter().position(|l| matches!(l, Layer::BatchNorm(_))) {
                return Err(Error::DegenerateBatch {
                    layer: i,
                    rows: input.rows(),
                });
            }
        }
        let mut x = input.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &mut self.layers {
            match layer {
                Layer::Dense(d) => {
                    let y = d.forward(&x);
                    caches.push(LayerCache::Dense { input: x });
                    x = y;
                }
                Layer::Activation(a) => {
                    let y = a.forward(&x);
                    caches.push(LayerCache::Activation {
                        input: x,
                        output: y.clone(),
                    });
                    x = y;
                }
                Layer::BatchNorm(bn) => {
                    let out = bn.forward_train(&x, tag);
                    caches.push(LayerCache::BatchNorm {
                        normalized: out.normalized,
                        inv_std: out.inv_std,
                        source: StatsSource::Batch,
                    });
                    x = out.output;
                }
            }
        }
        Ok(ForwardPass {
            output: x,
            cache: ForwardCache {
                mode: Mode::Train,
                layers: caches,
                rows: input.rows(),
            },
        })
    }

    /// Eval-mode forward keeping the cache (and its statistics trace).
    pub fn infer_traced(&self, input: &Matrix) -> Result<ForwardPass> {
        self.check_input(input)?;
        let mut x = input.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            match layer {
                Layer::Dense(d) => {
                    let y = d.forward(&x);
                    caches.push(LayerCache::Dense { input: x });
                    x = y;
                }
                Layer::Activation(a) => {
                    let y = a.forward(&x);
                    caches.push(LayerCache::Activation {
                        input: x,
                        output: y.clone(),
                    });
                    x = y;
                }
                Layer::BatchNorm(bn) => {
                    let (y, normalized, inv_std) = bn.forward_eval(&x);
                    caches.push(LayerCache::BatchNorm {
                        normalized,
                        inv_std,
                        source: StatsSource::RunningReal,
                    });
                    x = y;
                }
            }
        }
        Ok(ForwardPass {
            output: x,
            cache: ForwardCache {
                mode: Mode::Eval,
                layers: caches,
                rows: input.rows(),
            },
        })
    }

    /// Read-only eval-mode forward.
    pub fn infer(&self, input: &Matrix) -> Result<Matrix> {
        self.check_input(input)?;
        let mut x = input.clone();
        for layer in &self.layers {
            x = match layer {
                Layer::Dense(d) => d.forward(&x),
                Layer::Activation(a) => a.forward(&x),
                Layer::BatchNorm(bn) => bn.forward_eval(&x).0,
            };
        }
        Ok(x)
    }

    /// Gradients of a loss w.r.t. every parameter and the input, given
    /// `grad_output = dLoss/dOutput` and the cache of the matching forward.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &Matrix) -> Result<Backward> {
        if cache.layers.len() != self.layers.len() {
            return Err(Error::Contract(format!(
                "cache holds {} layers, network has {}",
                cache.layers.len(),
                self.layers.len()
            )));
        }
        if grad_output.rows() != cache.rows || Some(grad_output.cols()) != self.output_dim() {
            return Err(Error::Contract("loss gradient shape does not match output".into()));
        }
        let mut grads_rev: Vec<Vec<f64>> = Vec::new();
        let mut dy = grad_output.clone();
        for (layer, lc) in self.layers.iter().zip(&cache.layers).rev() {
            dy = match (layer, lc) {
                (Layer::Dense(d), LayerCache::Dense { input }) => {
                    let (dx, dw, db) = d.backward(input, &dy);
                    grads_rev.push(db);
                    grads_rev.push(dw);
                    dx
                }
                (Layer::Activation(a), LayerCache::Activation { input, output }) => {
                    a.backward(input, output, &dy)
                }
                (
                    Layer::BatchNorm(bn),
                    LayerCache::BatchNorm {
                        normalized,
                        inv_std,
                        source,
                    },
                ) => {
                    let (dx, dg, db) = bn.backward(normalized, inv_std, *source, &dy);
                    grads_rev.push(db);
                    grads_rev.push(dg);
                    dx
                }
                _ => return Err(Error::Contract("cache does not match layer types".into())),
            };
        }
        grads_rev.reverse();
        Ok(Backward {
            gradients: Gradients { tensors: grads_rev },
            input_grad: dy,
        })
    }
}

/// Arithmetic mean of every parameter tensor and both running-statistic
/// sets. Computed as `first + mean(x_i - first)` so that averaging identical
/// networks returns them unchanged.
pub fn average_parameters(nets: &[Network]) -> Result<Network> {
    let first = nets
        .first()
        .ok_or_else(|| Error::Contract("cannot average zero networks".into()))?;
    let arch = first.architecture();
    if nets.iter().any(|n| n.architecture() != arch) {
        return Err(Error::Contract("architectures differ".into()));
    }
    let k = nets.len() as f64;
    let avg = |select: &dyn Fn(&Network) -> Vec<&[f64]>| -> Vec<Vec<f64>> {
        let base = select(first);
        base.iter()
            .enumerate()
            .map(|(t, b)| {
                (0..b.len())
                    .map(|j| {
                        let dev: f64 = nets.iter().map(|n| select(n)[t][j] - b[j]).sum();
                        b[j] + dev / k
                    })
                    .collect()
            })
            .collect()
    };
    let params = avg(&|n: &Network| n.param_tensors());
    let stats = avg(&running_tensors);
    let mut out = first.clone();
    for (dst, src) in out.param_tensors_mut().into_iter().zip(params) {
        dst.copy_from_slice(&src);
    }
    let mut it = stats.into_iter();
    for l in &mut out.layers {
        if let Layer::BatchNorm(bn) = l {
            bn.running_real.mean = it.next().expect("stats");
            bn.running_real.var = it.next().expect("stats");
            bn.running_synt.mean = it.next().expect("stats");
            bn.running_synt.var = it.next().expect("stats");
        }
    }
    Ok(out)
}

fn running_tensors(n: &Network) -> Vec<&[f64]> {
    let mut out: Vec<&[f64]> = Vec::new();
    for bn in n.batch_norms() {
        out.push(&bn.running_real.mean);
        out.push(&bn.running_real.var);
        out.push(&bn.running_synt.mean);
        out.push(&bn.running_synt.var);
    }
    out
}
