//! CTC loss by the log-space forward-backward recursion.

use crate::error::{Error, Result};
use crate::linalg::{log_add_exp, log_softmax_rows, log_sum_exp, Matrix};

/// Per-frame log-probabilities over `V` tokens plus the blank (last column).
#[derive(Clone, Debug, PartialEq)]
pub struct FramePosteriors {
    log_probs: Matrix,
}

impl FramePosteriors {
    pub fn from_logits(logits: &Matrix) -> Self {
        FramePosteriors {
            log_probs: log_softmax_rows(logits),
        }
    }

    /// Wraps precomputed log-probabilities; each row must log-sum-exp to 0.
    pub fn from_log_probs(log_probs: Matrix) -> Result<Self> {
        for (t, row) in log_probs.iter_rows().enumerate() {
            let lse = log_sum_exp(row);
            if lse.abs() > 1e-9 {
                return Err(Error::Contract(format!(
                    "frame {t} log-probabilities sum to exp({lse})"
                )));
            }
        }
        Ok(FramePosteriors { log_probs })
    }

    pub fn frames(&self) -> usize {
        self.log_probs.rows()
    }

    pub fn classes(&self) -> usize {
        self.log_probs.cols()
    }

    pub fn blank(&self) -> usize {
        self.log_probs.cols() - 1
    }

    pub fn log_probs(&self) -> &Matrix {
        &self.log_probs
    }
}

#[derive(Clone, Debug)]
pub struct CtcOutput {
    /// `-ln P(y | x)`; `+inf` when no alignment exists.
    pub loss: f64,
    /// Gradient of `loss` w.r.t. the logits that produced the posteriors.
    pub grad: Matrix,
    pub feasible: bool,
}

/// Minimum number of frames a label needs: one per token plus one blank
/// between each pair of equal neighbours.
pub fn min_frames(y: &[usize]) -> usize {
    y.len() + y.windows(2).filter(|w| w[0] == w[1]).count()
}

pub fn ctc_loss(post: &FramePosteriors, y: &[usize]) -> CtcOutput {
    let lp = &post.log_probs;
    let (t_len, classes) = (lp.rows(), lp.cols());
    let blank = classes - 1;
    if t_len < min_frames(y) || (t_len == 0 && !y.is_empty()) {
        return CtcOutput {
            loss: f64::INFINITY,
            grad: Matrix::zeros(t_len, classes),
            feasible: false,
        };
    }
    if t_len == 0 {
        return CtcOutput {
            loss: 0.0,
            grad: Matrix::zeros(0, classes),
            feasible: true,
        };
    }

    let ext: Vec<usize> = (0..2 * y.len() + 1)
        .map(|s| if s % 2 == 0 { blank } else { y[s / 2] })
        .collect();
    let s_len = ext.len();
    let skip_ok = |s: usize| s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];

    let mut alpha = Matrix::filled(t_len, s_len, f64::NEG_INFINITY);
    alpha.set(0, 0, lp.get(0, blank));
    if s_len > 1 {
        alpha.set(0, 1, lp.get(0, ext[1]));
    }
    for t in 1..t_len {
        for s in 0..s_len {
            let mut a = alpha.get(t - 1, s);
            if s >= 1 {
                a = log_add_exp(a, alpha.get(t - 1, s - 1));
            }
            if skip_ok(s) {
                a = log_add_exp(a, alpha.get(t - 1, s - 2));
            }
            if a > f64::NEG_INFINITY {
                alpha.set(t, s, a + lp.get(t, ext[s]));
            }
        }
    }

    let mut beta = Matrix::filled(t_len, s_len, f64::NEG_INFINITY);
    let last = t_len - 1;
    beta.set(last, s_len - 1, lp.get(last, ext[s_len - 1]));
    if s_len > 1 {
        beta.set(last, s_len - 2, lp.get(last, ext[s_len - 2]));
    }
    for t in (0..last).rev() {
        for s in 0..s_len {
            let mut b = beta.get(t + 1, s);
            if s + 1 < s_len {
                b = log_add_exp(b, beta.get(t + 1, s + 1));
            }
            if s + 2 < s_len && skip_ok(s + 2) {
                b = log_add_exp(b, beta.get(t + 1, s + 2));
            }
            if b > f64::NEG_INFINITY {
                beta.set(t, s, b + lp.get(t, ext[s]));
            }
        }
    }

    let mut log_p = alpha.get(last, s_len - 1);
    if s_len > 1 {
        log_p = log_add_exp(log_p, alpha.get(last, s_len - 2));
    }
    if log_p == f64::NEG_INFINITY {
        return CtcOutput {
            loss: f64::INFINITY,
            grad: Matrix::zeros(t_len, classes),
            feasible: false,
        };
    }

    let mut grad = Matrix::zeros(t_len, classes);
    for t in 0..t_len {
        let mut occupancy = vec![f64::NEG_INFINITY; classes];
        for s in 0..s_len {
            let v = alpha.get(t, s) + beta.get(t, s) - lp.get(t, ext[s]);
            occupancy[ext[s]] = log_add_exp(occupancy[ext[s]], v);
        }
        for k in 0..classes {
            let gamma = (occupancy[k] - log_p).exp();
            grad.set(t, k, lp.get(t, k).exp() - gamma);
        }
    }
    CtcOutput {
        loss: -log_p,
        grad,
        feasible: true,
    }
}
