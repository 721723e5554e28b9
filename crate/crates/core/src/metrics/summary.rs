use serde::{Deserialize, Serialize};

use super::det::{avg_far, det_curve, Scored};
use super::wer::WerBreakdown;
use crate::error::Result;

/// Seed-wise aggregate; `std` is the sample standard deviation (n - 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

pub fn mean_std(xs: &[f64]) -> MeanStd {
    let n = xs.len();
    if n == 0 {
        return MeanStd {
            mean: f64::NAN,
            std: f64::NAN,
            n,
        };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    MeanStd { mean, std, n }
}

pub const DEFAULT_FRR_MAX: f64 = 0.05;

/// Test-set result for either task. `primary` is the headline number (lower
/// is better for both).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum MetricReport {
    Sequence {
        wer: WerBreakdown,
    },
    Keyword {
        avg_far: f64,
        accuracy: f64,
        auc: f64,
        scores: Vec<Scored>,
    },
}

impl MetricReport {
    pub fn keyword(scores: Vec<Scored>) -> Result<Self> {
        let curve = det_curve(&scores)?;
        let correct = scores
            .iter()
            .filter(|s| (s.score > 0.0) == s.positive)
            .count();
        Ok(MetricReport::Keyword {
            avg_far: avg_far(&curve, DEFAULT_FRR_MAX),
            accuracy: correct as f64 / scores.len() as f64,
            auc: super::det::roc_auc(&scores)?,
            scores,
        })
    }

    pub fn primary(&self) -> f64 {
        match self {
            MetricReport::Sequence { wer } => wer.wer,
            MetricReport::Keyword { avg_far, .. } => *avg_far,
        }
    }

    pub fn primary_name(&self) -> &'static str {
        match self {
            MetricReport::Sequence { .. } => "wer",
            MetricReport::Keyword { .. } => "avg_far",
        }
    }
}

/// `%.6g`-style rendering used in CSV output so files compare byte-exactly.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..6).contains(&exp) {
        let s = format!("{:.5e}", x);
        return s;
    }
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{:.*}", decimals, x);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Percentage with one decimal, as in the result tables.
pub fn percent(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}
