//! Oracle suites runnable from the command line.
//!
//! Each check compares an implementation against an independent reference
//! (path enumeration, finite differences, naive recursion, hand-computed
//! values) and reports a one-line verdict.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::{avg_far, det_curve, wer, DetCurve, DetPoint, Scored};
use crate::nn::{average_parameters, Activation, DomainTag, Mode, Network};
use crate::oracle::{brute_force_ctc_probability, max_relative_error, naive_edit_distance, numeric_gradient};
use crate::recognizer::{cross_entropy, ctc_loss, min_frames, FramePosteriors};
use crate::seed;

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {:<22} {}", self.name, self.detail)
    }
}

type Suite = fn() -> Result<String>;

const SUITES: [(&str, Suite); 7] = [
    ("ctc_enumeration", ctc_enumeration),
    ("ctc_gradient", ctc_gradient),
    ("network_gradient", network_gradient),
    ("cross_entropy_gradient", cross_entropy_gradient),
    ("wer_oracle", wer_oracle),
    ("det_avg_far", det_avg_far),
    ("checkpoint_average", checkpoint_average),
];

pub fn run() -> Vec<Check> {
    SUITES
        .iter()
        .map(|(name, f)| match f() {
            Ok(detail) => Check { name, passed: true, detail },
            Err(e) => Check { name, passed: false, detail: e.to_string() },
        })
        .collect()
}

fn fail(msg: String) -> Error {
    Error::Contract(msg)
}

fn random_matrix(rows: usize, cols: usize, rng: &mut seed::Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-3.0..3.0)).collect())
}

struct CtcCase {
    logits: Matrix,
    y: Vec<usize>,
    blank: usize,
}

fn ctc_cases(n: usize) -> Vec<CtcCase> {
    let mut rng = seed::rng(0x0c7c);
    (0..n)
        .map(|_| {
            let v = rng.random_range(1..=4);
            let t = rng.random_range(1..=6);
            let len = rng.random_range(0..=3);
            let y = (0..len).map(|_| rng.random_range(0..v)).collect();
            CtcCase { logits: random_matrix(t, v + 1, &mut rng), y, blank: v }
        })
        .collect()
}

fn ctc_enumeration() -> Result<String> {
    let mut worst: f64 = 0.0;
    let mut infeasible = 0;
    for c in ctc_cases(200) {
        let post = FramePosteriors::from_logits(&c.logits);
        let out = ctc_loss(&post, &c.y);
        let brute = brute_force_ctc_probability(post.log_probs(), &c.y, c.blank);
        if c.logits.rows() < min_frames(&c.y) {
            if out.feasible || brute != 0.0 {
                return Err(fail(format!("infeasible case y={:?} misreported", c.y)));
            }
            infeasible += 1;
            continue;
        }
        worst = worst.max((out.loss + brute.ln()).abs());
    }
    if worst >= 1e-9 {
        return Err(fail(format!("max |dp - brute| = {worst:.3e}")));
    }
    Ok(format!("200 instances, {infeasible} infeasible, max abs err {worst:.1e}"))
}

fn ctc_gradient() -> Result<String> {
    let mut worst: f64 = 0.0;
    for c in ctc_cases(200) {
        if c.logits.rows() < min_frames(&c.y) {
            continue;
        }
        let (t, k) = (c.logits.rows(), c.logits.cols());
        let analytic = ctc_loss(&FramePosteriors::from_logits(&c.logits), &c.y).grad;
        let numeric = numeric_gradient(
            |l| ctc_loss(&FramePosteriors::from_logits(&Matrix::from_vec(t, k, l.to_vec())), &c.y).loss,
            c.logits.data(),
            1e-5,
        );
        worst = worst.max(max_relative_error(analytic.data(), &numeric));
    }
    if worst >= 1e-4 {
        return Err(fail(format!("max relative error {worst:.3e}")));
    }
    Ok(format!("max relative error {worst:.1e}"))
}

fn network_gradient() -> Result<String> {
    let mut rng = seed::rng(0x9ad);
    let mut worst: f64 = 0.0;
    for act in [Activation::Tanh, Activation::Relu, Activation::Sigmoid] {
        for bn in [false, true] {
            for tag in [DomainTag::Real, DomainTag::Synthetic] {
                let net = Network::mlp(&[3, 5, 4, 2], act, bn, &mut rng);
                let x = random_matrix(8, 3, &mut rng);
                let w = random_matrix(8, 2, &mut rng);
                let loss = |n: &mut Network| -> Result<f64> {
                    let y = n.forward(&x, tag, Mode::Train)?.output;
                    Ok(y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum())
                };
                let mut probe = net.clone();
                let pass = probe.forward(&x, tag, Mode::Train)?;
                let analytic = probe.backward(&pass.cache, &w)?.gradients.tensors.concat();
                let flat = net.param_tensors().concat();
                let numeric = numeric_gradient(
                    |theta| {
                        let mut n = net.clone();
                        let mut off = 0;
                        for t in n.param_tensors_mut() {
                            t.copy_from_slice(&theta[off..off + t.len()]);
                            off += t.len();
                        }
                        loss(&mut n).unwrap_or(f64::NAN)
                    },
                    &flat,
                    1e-5,
                );
                worst = worst.max(max_relative_error(&analytic, &numeric));
            }
        }
    }
    if worst.is_nan() || worst >= 1e-4 {
        return Err(fail(format!("max relative error {worst:.3e}")));
    }
    Ok(format!("12 dense/activation/batch-norm stacks, max relative error {worst:.1e}"))
}

fn cross_entropy_gradient() -> Result<String> {
    let mut rng = seed::rng(0xce);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = rng.random_range(2..6);
        let logits: Vec<f64> = (0..k).map(|_| rng.random_range(-4.0..4.0)).collect();
        let label = rng.random_range(0..k);
        let (_, grad) = cross_entropy(&logits, label);
        let numeric = numeric_gradient(|l| cross_entropy(l, label).0, &logits, 1e-5);
        worst = worst.max(max_relative_error(&grad, &numeric));
    }
    if worst >= 1e-4 {
        return Err(fail(format!("max relative error {worst:.3e}")));
    }
    Ok(format!("100 instances, max relative error {worst:.1e}"))
}

fn wer_oracle() -> Result<String> {
    let b = wer(&[0, 1, 2], &[0, 3, 2])?;
    if (b.substitutions, b.deletions, b.insertions) != (1, 0, 0) || (b.wer - 1.0 / 3.0).abs() > 1e-15 {
        return Err(fail(format!("(abc, axc) gave {b:?}")));
    }
    let b = wer(&[0, 1, 2], &[])?;
    if b.deletions != 3 || b.wer != 1.0 {
        return Err(fail(format!("(abc, -) gave {b:?}")));
    }
    if wer(&[], &[0]).is_ok() {
        return Err(fail("empty reference accepted".into()));
    }
    let mut rng = seed::rng(0x3e);
    for _ in 0..500 {
        let a: Vec<usize> = (0..rng.random_range(1..7)).map(|_| rng.random_range(0..3)).collect();
        let h: Vec<usize> = (0..rng.random_range(0..7)).map(|_| rng.random_range(0..3)).collect();
        let got = wer(&a, &h)?.edits();
        let want = naive_edit_distance(&a, &h);
        if got != want {
            return Err(fail(format!("{a:?} vs {h:?}: {got} edits, oracle {want}")));
        }
    }
    Ok("examples and 500 random pairs agree with naive edit distance".into())
}

fn det_avg_far() -> Result<String> {
    let s = |score, positive| Scored { score, positive };
    let perfect = det_curve(&[s(0.1, false), s(0.2, false), s(0.8, true), s(0.9, true)])?;
    if avg_far(&perfect, 0.05) != 0.0 {
        return Err(fail("perfect detector has nonzero avg_far".into()));
    }
    let point = |threshold, far, frr| DetPoint { threshold, far, frr };
    let stair = DetCurve {
        points: vec![
            point(0.0, 0.5, 0.0),
            point(1.0, 0.2, 0.01),
            point(2.0, 0.1, 0.03),
            point(f64::INFINITY, 0.0, 1.0),
        ],
    };
    let want = (0.5 * 0.01 + 0.2 * 0.02 + 0.1 * 0.02) / 0.05;
    let got = avg_far(&stair, 0.05);
    if (got - want).abs() > 1e-12 {
        return Err(fail(format!("staircase {got} vs hand integral {want}")));
    }
    let mut rng = seed::rng(0xde7);
    for _ in 0..1000 {
        let n = rng.random_range(2..40);
        let mut scores: Vec<Scored> =
            (0..n).map(|_| s(rng.random_range(0..10) as f64 / 3.0, rng.random_bool(0.5))).collect();
        scores[0].positive = true;
        scores[1].positive = false;
        let c = det_curve(&scores)?;
        let monotone = c
            .points
            .windows(2)
            .all(|w| w[1].threshold > w[0].threshold && w[1].far <= w[0].far && w[1].frr >= w[0].frr);
        let v = avg_far(&c, 0.05);
        if !monotone || !(0.0..=1.0).contains(&v) {
            return Err(fail("DET curve not monotone or avg_far out of [0, 1]".into()));
        }
    }
    Ok("examples and 1000 random score sets".into())
}

fn checkpoint_average() -> Result<String> {
    let mut rng = seed::rng(0xa5);
    let net = Network::mlp(&[3, 6, 2], Activation::Tanh, true, &mut rng);
    let avg = average_parameters(&vec![net.clone(); 10])?;
    let x = random_matrix(16, 3, &mut rng);
    if net.infer(&x)?.data() != avg.infer(&x)?.data() {
        return Err(fail("average of identical checkpoints changed outputs".into()));
    }
    Ok("10 identical checkpoints average to bit-identical outputs".into())
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_suites_pass() {
        for c in super::run() {
            assert!(c.passed, "{c}");
        }
    }
}
