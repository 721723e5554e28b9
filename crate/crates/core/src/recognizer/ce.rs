use super::ctc::FramePosteriors;
use crate::error::{Error, Result};
use crate::linalg::log_softmax;

/// `-ln softmax(logits)[label]` and its gradient w.r.t. the logits.
pub fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let lsm = log_softmax(logits);
    let mut grad: Vec<f64> = lsm.iter().map(|v| v.exp()).collect();
    grad[label] -= 1.0;
    (-lsm[label], grad)
}

/// Mean per-frame cross-entropy against the label expanded to frames, each
/// token repeated `frames_per_token` times.
pub fn frame_cross_entropy(post: &FramePosteriors, y: &[usize], frames_per_token: usize) -> Result<f64> {
    if post.frames() != frames_per_token * y.len() || y.is_empty() {
        return Err(Error::Contract(format!(
            "{} frames cannot be aligned to {} tokens at {frames_per_token} per token",
            post.frames(),
            y.len()
        )));
    }
    let lp = post.log_probs();
    let total: f64 = (0..post.frames())
        .map(|t| -lp.get(t, y[t / frames_per_token]))
        .sum();
    Ok(total / post.frames() as f64)
}
