//! Keyword detector and CTC sequence recognizer.
//!
//! Blank is always the last output column (index `V`).

mod ce;
mod ctc;
mod decode;
mod models;

use serde::{Deserialize, Serialize};

pub use ce::{cross_entropy, frame_cross_entropy};
pub use ctc::{ctc_loss, min_frames, CtcOutput, FramePosteriors};
pub use decode::greedy_decode;
pub use models::{KeywordModel, ModelConfig, SequenceModel};

use crate::error::Result;
use crate::gapgen::Sample;
use crate::linalg::Matrix;
use crate::metrics::MetricReport;
use crate::nn::Network;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Keyword,
    Sequence,
}

/// What the trainer needs from a recognizer.
pub trait TaskModel: Clone + Send + Sync {
    fn task(&self) -> Task;
    fn network(&self) -> &Network;
    fn network_mut(&mut self) -> &mut Network;
    /// Network input for a batch.
    fn encode(&self, batch: &[&Sample]) -> Result<Matrix>;
    /// Batch loss and its gradient w.r.t. the network output.
    fn loss_and_grad(&self, output: &Matrix, batch: &[&Sample]) -> Result<(f64, Matrix)>;
    /// Higher is better. Eval mode.
    fn validation_score(&self, data: &[Sample]) -> Result<f64>;
    /// Test metrics; rejects synthetic samples.
    fn evaluate(&self, data: &[Sample]) -> Result<MetricReport>;
}

#[cfg(test)]
mod tests {
    use rand::Rng as _;

    use super::*;
    use crate::gapgen::{sample_real, Origin, TokenAlphabet, WorldSpec};
    use crate::linalg::log_softmax_rows;
    use crate::oracle::{brute_force_ctc_probability, max_relative_error, numeric_gradient};
    use crate::seed;

    fn random_logits(t: usize, c: usize, rng: &mut seed::Rng) -> Matrix {
        Matrix::from_vec(t, c, (0..t * c).map(|_| rng.random_range(-3.0..3.0)).collect())
    }

    fn loss_of(logits: &[f64], t: usize, c: usize, y: &[usize]) -> f64 {
        ctc_loss(&FramePosteriors::from_logits(&Matrix::from_vec(t, c, logits.to_vec())), y).loss
    }

    #[test]
    fn ctc_single_frame() {
        let lp = log_softmax_rows(&Matrix::from_rows(&[[0.3, -1.0, 0.5]]));
        let post = FramePosteriors::from_log_probs(lp.clone()).unwrap();
        let out = ctc_loss(&post, &[0]);
        assert!((out.loss + lp.get(0, 0)).abs() < 1e-12);
    }

    #[test]
    fn ctc_two_frames_three_paths() {
        let lp = log_softmax_rows(&Matrix::from_rows(&[[0.3, -1.0, 0.5], [1.2, 0.1, -0.4]]));
        let p = |t: usize, k: usize| lp.get(t, k).exp();
        let blank = 2;
        let expected = p(0, 0) * p(1, 0) + p(0, 0) * p(1, blank) + p(0, blank) * p(1, 0);
        let out = ctc_loss(&FramePosteriors::from_log_probs(lp).unwrap(), &[0]);
        assert!((out.loss + expected.ln()).abs() < 1e-12);
    }

    #[test]
    fn ctc_matches_enumeration_and_finite_differences() {
        let mut rng = seed::rng(21);
        for _ in 0..200 {
            let v = rng.random_range(1..=4);
            let c = v + 1;
            let t = rng.random_range(1..=6);
            let len = rng.random_range(0..=3);
            let y: Vec<usize> = (0..len).map(|_| rng.random_range(0..v)).collect();
            let logits = random_logits(t, c, &mut rng);
            let post = FramePosteriors::from_logits(&logits);
            let out = ctc_loss(&post, &y);
            let brute = brute_force_ctc_probability(post.log_probs(), &y, v);
            if t < min_frames(&y) {
                assert!(!out.feasible && out.loss.is_infinite() && brute == 0.0);
                continue;
            }
            assert!((out.loss - (-brute.ln())).abs() < 1e-9, "{} vs {}", out.loss, -brute.ln());
            let numeric = numeric_gradient(|l| loss_of(l, t, c, &y), logits.data(), 1e-5);
            assert!(max_relative_error(out.grad.data(), &numeric) < 1e-4);
        }
    }

    #[test]
    fn ctc_infeasible_is_flagged() {
        let post = FramePosteriors::from_logits(&Matrix::zeros(2, 3));
        let out = ctc_loss(&post, &[0, 0]);
        assert!(!out.feasible && out.loss == f64::INFINITY);
        assert!(out.grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn one_hot_alignment_gives_zero_loss_and_exact_decode() {
        // alignment a a blank a b for y = (a, a, b)
        let path = [0usize, 0, 2, 0, 1];
        let mut lp = Matrix::filled(5, 3, f64::NEG_INFINITY);
        for (t, &k) in path.iter().enumerate() {
            lp.set(t, k, 0.0);
        }
        let post = FramePosteriors::from_log_probs(lp).unwrap();
        assert_eq!(ctc_loss(&post, &[0, 0, 1]).loss, 0.0);
        assert_eq!(greedy_decode(&post), vec![0, 0, 1]);
    }

    fn argmax_post(path: &[usize], classes: usize) -> FramePosteriors {
        let mut logits = Matrix::zeros(path.len(), classes);
        for (t, &k) in path.iter().enumerate() {
            logits.set(t, k, 5.0);
        }
        FramePosteriors::from_logits(&logits)
    }

    #[test]
    fn greedy_decode_examples() {
        assert_eq!(greedy_decode(&argmax_post(&[0, 0, 2, 1], 3)), vec![0, 1]);
        assert_eq!(greedy_decode(&argmax_post(&[2, 2, 2], 3)), Vec::<usize>::new());
        assert_eq!(greedy_decode(&argmax_post(&[0, 2, 0], 3)), vec![0, 0]);
        // exact tie goes to the lowest index
        assert_eq!(greedy_decode(&FramePosteriors::from_logits(&Matrix::zeros(1, 3))), vec![0]);
    }

    #[test]
    fn cross_entropy_examples() {
        let (l, _) = cross_entropy(&[0.0, 0.0], 1);
        assert!((l - 2f64.ln()).abs() < 1e-15);
        let (l, _) = cross_entropy(&[800.0, -800.0], 0);
        assert!(l.abs() < 1e-300);
        let x = [0.3, -1.2, 2.0, 0.1];
        let (_, g) = cross_entropy(&x, 2);
        let num = numeric_gradient(|z| cross_entropy(z, 2).0, &x, 1e-5);
        assert!(max_relative_error(&g, &num) < 1e-6);
    }

    #[test]
    fn frame_ce_expands_labels() {
        let lp = log_softmax_rows(&Matrix::from_rows(&[[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 2.0, 0.0]]));
        let post = FramePosteriors::from_log_probs(lp.clone()).unwrap();
        let ce = frame_cross_entropy(&post, &[0, 1], 2).unwrap();
        let hand = -(lp.get(0, 0) + lp.get(1, 0) + lp.get(2, 1) + lp.get(3, 1)) / 4.0;
        assert!((ce - hand).abs() < 1e-15);
        assert!(frame_cross_entropy(&post, &[0], 2).is_err());
    }

    #[test]
    fn rejects_unnormalized_posteriors() {
        assert!(FramePosteriors::from_log_probs(Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn batch_loss_gradient_matches_finite_differences() {
        let spec = WorldSpec::default_sequence();
        let data = sample_real(&spec, 3, 1).unwrap();
        let mut rng = seed::rng(2);
        let cfg = ModelConfig {
            hidden: vec![5],
            batch_norm: false,
            ..Default::default()
        };
        let model = SequenceModel::new(spec.alphabet.clone(), 2, 3, &cfg, &mut rng);
        let refs: Vec<&Sample> = data.iter().collect();
        let x = model.encode(&refs).unwrap();
        let out = model.network().infer(&x).unwrap();
        let (_, g) = model.loss_and_grad(&out, &refs).unwrap();
        let num = numeric_gradient(
            |o| model.loss_and_grad(&Matrix::from_vec(out.rows(), out.cols(), o.to_vec()), &refs).unwrap().0,
            out.data(),
            1e-5,
        );
        assert!(max_relative_error(g.data(), &num) < 1e-4);
    }

    #[test]
    fn evaluate_rejects_synthetic_and_is_idempotent() {
        let spec = WorldSpec::default_keyword();
        let mut data = sample_real(&spec, 50, 3).unwrap().samples;
        let mut rng = seed::rng(3);
        let model = KeywordModel::new(spec.alphabet.clone(), 0, 2, 3, &ModelConfig::default(), &mut rng);
        let a = model.evaluate(&data).unwrap();
        assert_eq!(a, model.evaluate(&data).unwrap());
        data[0].origin = Origin::Synthetic;
        assert!(model.evaluate(&data).is_err());
    }

    #[test]
    fn checkpoints_carry_task_header() {
        let spec = WorldSpec::default_sequence();
        let mut rng = seed::rng(4);
        let m = SequenceModel::new(spec.alphabet.clone(), 2, 3, &ModelConfig::default(), &mut rng);
        let ck = m.to_checkpoint();
        assert_eq!(ck.header.as_ref().unwrap()["task"], "sequence");
        assert_eq!(SequenceModel::from_checkpoint(&ck).unwrap(), m);
        assert!(KeywordModel::from_checkpoint(&ck).is_err());
        let k = KeywordModel::new(TokenAlphabet::letters(6), 2, 2, 1, &ModelConfig::default(), &mut rng);
        assert_eq!(KeywordModel::from_checkpoint(&k.to_checkpoint()).unwrap(), k);
    }
}
