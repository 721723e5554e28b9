use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::ce::{cross_entropy, frame_cross_entropy};
use super::ctc::{ctc_loss, FramePosteriors};
use super::decode::greedy_decode;
use super::{Task, TaskModel};
use crate::error::{Error, Result};
use crate::gapgen::{Origin, Sample, TokenAlphabet};
use crate::linalg::Matrix;
use crate::metrics::{corpus_wer, MetricReport, Scored};
use crate::nn::{Activation, Checkpoint, Network};
use crate::par;
use crate::seed::Rng;

/// Rows per inference chunk when scoring whole datasets.
const EVAL_CHUNK: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub batch_norm: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: vec![32, 32],
            activation: Activation::Tanh,
            batch_norm: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TaskHeader {
    task: Task,
    alphabet: TokenAlphabet,
    frame_dim: usize,
    frames_per_token: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    keyword: Option<usize>,
}

fn header_of(ckpt: &Checkpoint) -> Result<TaskHeader> {
    let h = ckpt
        .header
        .clone()
        .ok_or_else(|| Error::Contract("checkpoint has no task header".into()))?;
    serde_json::from_value(h).map_err(|e| Error::Contract(format!("bad task header: {e}")))
}

fn check_real(data: &[Sample]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Contract("evaluation set is empty".into()));
    }
    if let Some(s) = data.iter().find(|s| s.origin != Origin::Real) {
        return Err(Error::Contract(format!("evaluation set contains synthetic sample {}", s.id)));
    }
    Ok(())
}

/// Per-frame CTC recognizer. Each frame is fed together with a one-hot of
/// its position inside the token (`t mod F`) so that a frame-local model
/// can place blanks between repeated tokens.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceModel {
    pub net: Network,
    pub alphabet: TokenAlphabet,
    pub frame_dim: usize,
    pub frames_per_token: usize,
}

impl SequenceModel {
    pub fn new(alphabet: TokenAlphabet, frame_dim: usize, frames_per_token: usize, cfg: &ModelConfig, rng: &mut Rng) -> Self {
        let mut dims = vec![frame_dim + frames_per_token];
        dims.extend(&cfg.hidden);
        dims.push(alphabet.len() + 1);
        SequenceModel {
            net: Network::mlp(&dims, cfg.activation, cfg.batch_norm, rng),
            alphabet,
            frame_dim,
            frames_per_token,
        }
    }

    pub fn vocab(&self) -> usize {
        self.alphabet.len()
    }

    pub fn blank(&self) -> usize {
        self.alphabet.len()
    }

    fn check_sample(&self, s: &Sample) -> Result<()> {
        if s.features.iter().any(|f| f.len() != self.frame_dim) {
            return Err(Error::Contract(format!("sample {} frame width != {}", s.id, self.frame_dim)));
        }
        Ok(())
    }

    /// Stacks all frames of `batch` and returns each sample's row range.
    pub fn encode_frames(&self, batch: &[&Sample]) -> Result<(Matrix, Vec<Range<usize>>)> {
        let width = self.frame_dim + self.frames_per_token;
        let total: usize = batch.iter().map(|s| s.num_frames()).sum();
        let mut data = Vec::with_capacity(total * width);
        let mut ranges = Vec::with_capacity(batch.len());
        for s in batch {
            self.check_sample(s)?;
            let start = ranges.last().map_or(0, |r: &Range<usize>| r.end);
            for (t, frame) in s.features.iter().enumerate() {
                data.extend_from_slice(frame);
                data.extend((0..self.frames_per_token).map(|k| f64::from(u8::from(k == t % self.frames_per_token))));
            }
            ranges.push(start..start + s.num_frames());
        }
        Ok((Matrix::from_vec(total, width, data), ranges))
    }

    /// Eval-mode posteriors for one sample.
    pub fn posteriors(&self, s: &Sample) -> Result<FramePosteriors> {
        let (x, _) = self.encode_frames(&[s])?;
        Ok(FramePosteriors::from_logits(&self.net.infer(&x)?))
    }

    /// Eval-mode posteriors for many samples, chunked and run in parallel.
    pub fn posteriors_many(&self, data: &[Sample]) -> Result<Vec<FramePosteriors>> {
        let chunks: Vec<&[Sample]> = data.chunks(EVAL_CHUNK).collect();
        let parts = par::map(&chunks, |chunk| -> Result<Vec<FramePosteriors>> {
            let refs: Vec<&Sample> = chunk.iter().collect();
            let (x, ranges) = self.encode_frames(&refs)?;
            let logits = self.net.infer(&x)?;
            Ok(ranges
                .into_iter()
                .map(|r| FramePosteriors::from_logits(&logits.slice_rows(r.start, r.end)))
                .collect())
        });
        let mut out = Vec::with_capacity(data.len());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }

    pub fn decode(&self, s: &Sample) -> Result<Vec<usize>> {
        Ok(greedy_decode(&self.posteriors(s)?))
    }

    /// Mean per-frame CE against the F-fold expanded label.
    pub fn frame_ce(&self, post: &FramePosteriors, y: &[usize]) -> Result<f64> {
        frame_cross_entropy(post, y, self.frames_per_token)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let header = TaskHeader {
            task: Task::Sequence,
            alphabet: self.alphabet.clone(),
            frame_dim: self.frame_dim,
            frames_per_token: self.frames_per_token,
            keyword: None,
        };
        Checkpoint::from_network(&self.net).with_header(serde_json::to_value(header).expect("header serializes"))
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let h = header_of(ckpt)?;
        if h.task != Task::Sequence {
            return Err(Error::Contract("checkpoint is not a sequence model".into()));
        }
        let net = ckpt.to_network()?;
        if net.input_dim() != Some(h.frame_dim + h.frames_per_token) || net.output_dim() != Some(h.alphabet.len() + 1) {
            return Err(Error::Contract("sequence checkpoint dimensions disagree with header".into()));
        }
        Ok(SequenceModel {
            net,
            alphabet: h.alphabet,
            frame_dim: h.frame_dim,
            frames_per_token: h.frames_per_token,
        })
    }
}

impl TaskModel for SequenceModel {
    fn task(&self) -> Task {
        Task::Sequence
    }

    fn network(&self) -> &Network {
        &self.net
    }

    fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    fn encode(&self, batch: &[&Sample]) -> Result<Matrix> {
        Ok(self.encode_frames(batch)?.0)
    }

    /// Mean CTC loss over the batch.
    fn loss_and_grad(&self, output: &Matrix, batch: &[&Sample]) -> Result<(f64, Matrix)> {
        let mut grad = Matrix::zeros(output.rows(), output.cols());
        let mut total = 0.0;
        let scale = 1.0 / batch.len() as f64;
        let mut start = 0;
        for s in batch {
            let end = start + s.num_frames();
            let post = FramePosteriors::from_logits(&output.slice_rows(start, end));
            let out = ctc_loss(&post, &s.tokens);
            if !out.feasible {
                return Err(Error::Contract(format!("sample {} has no CTC alignment", s.id)));
            }
            total += out.loss;
            for t in 0..out.grad.rows() {
                for (g, v) in grad.row_mut(start + t).iter_mut().zip(out.grad.row(t)) {
                    *g = v * scale;
                }
            }
            start = end;
        }
        Ok((total * scale, grad))
    }

    fn validation_score(&self, data: &[Sample]) -> Result<f64> {
        Ok(-self.evaluate_unchecked(data)?.primary())
    }

    fn evaluate(&self, data: &[Sample]) -> Result<MetricReport> {
        check_real(data)?;
        self.evaluate_unchecked(data)
    }
}

impl SequenceModel {
    fn evaluate_unchecked(&self, data: &[Sample]) -> Result<MetricReport> {
        let hyps: Vec<Vec<usize>> = self.posteriors_many(data)?.iter().map(greedy_decode).collect();
        let wer = corpus_wer(data.iter().zip(&hyps).map(|(s, h)| (s.tokens.as_slice(), h.as_slice())))?;
        Ok(MetricReport::Sequence { wer })
    }
}

/// Two-class detector for one keyword token over mean-pooled frames.
#[derive(Clone, Debug, PartialEq)]
pub struct KeywordModel {
    pub net: Network,
    pub alphabet: TokenAlphabet,
    pub keyword: usize,
    pub frame_dim: usize,
    pub frames_per_token: usize,
}

impl KeywordModel {
    pub fn new(alphabet: TokenAlphabet, keyword: usize, frame_dim: usize, frames_per_token: usize, cfg: &ModelConfig, rng: &mut Rng) -> Self {
        let mut dims = vec![frame_dim];
        dims.extend(&cfg.hidden);
        dims.push(2);
        KeywordModel {
            net: Network::mlp(&dims, cfg.activation, cfg.batch_norm, rng),
            alphabet,
            keyword,
            frame_dim,
            frames_per_token,
        }
    }

    pub fn label(&self, s: &Sample) -> usize {
        usize::from(s.tokens.contains(&self.keyword))
    }

    /// Detection score `logit(keyword) - logit(other)` per sample, eval mode.
    pub fn scores(&self, data: &[Sample]) -> Result<Vec<f64>> {
        let chunks: Vec<&[Sample]> = data.chunks(EVAL_CHUNK).collect();
        let parts = par::map(&chunks, |chunk| -> Result<Vec<f64>> {
            let refs: Vec<&Sample> = chunk.iter().collect();
            let logits = self.net.infer(&self.encode(&refs)?)?;
            Ok(logits.iter_rows().map(|r| r[1] - r[0]).collect())
        });
        let mut out = Vec::with_capacity(data.len());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let header = TaskHeader {
            task: Task::Keyword,
            alphabet: self.alphabet.clone(),
            frame_dim: self.frame_dim,
            frames_per_token: self.frames_per_token,
            keyword: Some(self.keyword),
        };
        Checkpoint::from_network(&self.net).with_header(serde_json::to_value(header).expect("header serializes"))
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let h = header_of(ckpt)?;
        if h.task != Task::Keyword {
            return Err(Error::Contract("checkpoint is not a keyword model".into()));
        }
        let net = ckpt.to_network()?;
        if net.input_dim() != Some(h.frame_dim) || net.output_dim() != Some(2) {
            return Err(Error::Contract("keyword checkpoint dimensions disagree with header".into()));
        }
        Ok(KeywordModel {
            net,
            alphabet: h.alphabet,
            keyword: h.keyword.unwrap_or(0),
            frame_dim: h.frame_dim,
            frames_per_token: h.frames_per_token,
        })
    }
}

impl TaskModel for KeywordModel {
    fn task(&self) -> Task {
        Task::Keyword
    }

    fn network(&self) -> &Network {
        &self.net
    }

    fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    fn encode(&self, batch: &[&Sample]) -> Result<Matrix> {
        let mut data = Vec::with_capacity(batch.len() * self.frame_dim);
        for s in batch {
            let m = s.mean_frame();
            if m.len() != self.frame_dim {
                return Err(Error::Contract(format!("sample {} frame width != {}", s.id, self.frame_dim)));
            }
            data.extend(m);
        }
        Ok(Matrix::from_vec(batch.len(), self.frame_dim, data))
    }

    /// Mean two-class cross-entropy.
    fn loss_and_grad(&self, output: &Matrix, batch: &[&Sample]) -> Result<(f64, Matrix)> {
        let scale = 1.0 / batch.len() as f64;
        let mut grad = Matrix::zeros(output.rows(), 2);
        let mut total = 0.0;
        for (i, s) in batch.iter().enumerate() {
            let (loss, g) = cross_entropy(output.row(i), self.label(s));
            total += loss;
            for (d, v) in grad.row_mut(i).iter_mut().zip(g) {
                *d = v * scale;
            }
        }
        Ok((total * scale, grad))
    }

    /// Accuracy at the argmax decision.
    fn validation_score(&self, data: &[Sample]) -> Result<f64> {
        let scores = self.scores(data)?;
        let correct = data
            .iter()
            .zip(&scores)
            .filter(|(s, &sc)| (sc > 0.0) == (self.label(s) == 1))
            .count();
        Ok(correct as f64 / data.len().max(1) as f64)
    }

    fn evaluate(&self, data: &[Sample]) -> Result<MetricReport> {
        check_real(data)?;
        let scores = self.scores(data)?;
        MetricReport::keyword(
            data.iter()
                .zip(scores)
                .map(|(s, score)| Scored {
                    score,
                    positive: self.label(s) == 1,
                })
                .collect(),
        )
    }
}
