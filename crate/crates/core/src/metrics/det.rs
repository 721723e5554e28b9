use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

/// Operating points ordered by increasing threshold. A score is accepted
/// when `score >= threshold`; the last point (threshold `+inf`) accepts
/// nothing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetCurve {
    pub points: Vec<DetPoint>,
}

/// One scored trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub score: f64,
    pub positive: bool,
}

pub fn det_curve(scores: &[Scored]) -> Result<DetCurve> {
    let positives = scores.iter().filter(|s| s.positive).count();
    let negatives = scores.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Contract(format!(
            "DET curve needs both classes, got {positives} positive / {negatives} negative"
        )));
    }
    if scores.iter().any(|s| s.score.is_nan()) {
        return Err(Error::Contract("NaN score".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score));

    // Sweep upward: at threshold t everything strictly below t is rejected.
    let (np, nn) = (positives as f64, negatives as f64);
    let mut points = Vec::new();
    let (mut rejected_pos, mut rejected_neg) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].score;
        points.push(DetPoint {
            threshold: t,
            far: (negatives - rejected_neg) as f64 / nn,
            frr: rejected_pos as f64 / np,
        });
        while i < sorted.len() && sorted[i].score == t {
            if sorted[i].positive {
                rejected_pos += 1;
            } else {
                rejected_neg += 1;
            }
            i += 1;
        }
    }
    points.push(DetPoint {
        threshold: f64::INFINITY,
        far: 0.0,
        frr: 1.0,
    });
    Ok(DetCurve { points })
}

impl DetCurve {
    /// Smallest FAR among points with FRR <= `frr`.
    pub fn far_at(&self, frr: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.frr <= frr)
            .map(|p| p.far)
            .fold(1.0, f64::min)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut s = String::from("threshold,far,frr\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{}\n", p.threshold, p.far, p.frr));
        }
        f.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Mean FAR over FRR in `[0, frr_max]`, integrating the lower envelope
/// `frr -> far_at(frr)`, a right-continuous step function.
pub fn avg_far(curve: &DetCurve, frr_max: f64) -> f64 {
    if frr_max <= 0.0 {
        return curve.far_at(0.0);
    }
    let mut knots: Vec<f64> = curve
        .points
        .iter()
        .map(|p| p.frr)
        .filter(|&f| f > 0.0 && f < frr_max)
        .collect();
    knots.push(0.0);
    knots.push(frr_max);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let area: f64 = knots
        .windows(2)
        .map(|w| (w[1] - w[0]) * curve.far_at(w[0]))
        .sum();
    area / frr_max
}

/// Probability that a random positive outscores a random negative (ties
/// count one half).
pub fn roc_auc(scores: &[Scored]) -> Result<f64> {
    let pos: Vec<f64> = scores.iter().filter(|s| s.positive).map(|s| s.score).collect();
    let neg: Vec<f64> = scores.iter().filter(|s| !s.positive).map(|s| s.score).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Contract("AUC needs both classes".into()));
    }
    let mut all: Vec<(f64, bool)> = scores.iter().map(|s| (s.score, s.positive)).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Mann-Whitney with midranks
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let mid = (i + j + 1) as f64 / 2.0;
        rank_sum += mid * all[i..j].iter().filter(|x| x.1).count() as f64;
        i = j;
    }
    let (np, nn) = (pos.len() as f64, neg.len() as f64);
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}
