use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gapgen::Sample;
use crate::metrics::wer;
use crate::recognizer::{ctc_loss, greedy_decode, FramePosteriors, SequenceModel};

/// Cap on the CTC feature, also used when no alignment exists.
pub const CTC_MAX: f64 = 50.0;

/// Discrepancy between a reference recognizer's output and a sample's label.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub ce_loss: f64,
    pub ctc_loss: f64,
    pub wer: f64,
    pub len_y: f64,
    pub len_yhat: f64,
}

impl FeatureVector {
    pub const DIM: usize = 5;
    pub const NAMES: [&'static str; 5] = ["ce_loss", "ctc_loss", "wer", "len_y", "len_yhat"];

    pub fn to_array(&self) -> [f64; 5] {
        [self.ce_loss, self.ctc_loss, self.wer, self.len_y, self.len_yhat]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

pub fn features_from_posteriors(reference: &SequenceModel, post: &FramePosteriors, s: &Sample) -> Result<FeatureVector> {
    let yhat = greedy_decode(post);
    let ctc = ctc_loss(post, &s.tokens);
    Ok(FeatureVector {
        ce_loss: reference.frame_ce(post, &s.tokens)?,
        ctc_loss: if ctc.feasible { ctc.loss.min(CTC_MAX) } else { CTC_MAX },
        wer: wer(&s.tokens, &yhat)?.wer,
        len_y: s.tokens.len() as f64,
        len_yhat: yhat.len() as f64,
    })
}

/// Φ for one sample under the frozen reference recognizer.
pub fn compute_features(reference: &SequenceModel, s: &Sample) -> Result<FeatureVector> {
    features_from_posteriors(reference, &reference.posteriors(s)?, s)
}

/// Φ for many samples; inference runs in parallel chunks.
pub fn compute_features_many(reference: &SequenceModel, data: &[Sample]) -> Result<Vec<FeatureVector>> {
    let posts = reference.posteriors_many(data)?;
    data.iter()
        .zip(&posts)
        .map(|(s, p)| features_from_posteriors(reference, p, s))
        .collect()
}
