use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA: &str = "gapgen/1";

/// Symbol used when rendering the CTC blank; never a member of an alphabet.
pub const BLANK_SYMBOL: &str = "<blank>";

const SUM_TOL: f64 = 1e-9;

fn schema_default() -> String {
    SCHEMA.to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenAlphabet {
    pub tokens: Vec<String>,
}

impl TokenAlphabet {
    /// Alphabet `a, b, c, ...` of size `v`.
    pub fn letters(v: usize) -> Self {
        TokenAlphabet {
            tokens: (0..v)
                .map(|i| char::from(b'a' + i as u8).to_string())
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Index of the CTC blank: one past the last token.
    pub fn blank(&self) -> usize {
        self.tokens.len()
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.tokens.len();
        if !(2..=16).contains(&v) {
            return Err(Error::Config(format!(
                "alphabet size {v} outside [2, 16]"
            )));
        }
        let distinct: BTreeSet<&str> = self.tokens.iter().map(String::as_str).collect();
        if distinct.len() != v {
            return Err(Error::Config("alphabet tokens are not distinct".into()));
        }
        if distinct.contains(BLANK_SYMBOL) {
            return Err(Error::Config(format!(
                "alphabet must not contain the reserved blank symbol {BLANK_SYMBOL}"
            )));
        }
        Ok(())
    }
}

/// One speaking style: a per-token frame mean and an isotropic covariance
/// `frame_cov_scale * noise_sigma^2 * I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StyleComponent {
    pub id: u32,
    /// `V` rows of dimension `d`.
    pub frame_mean: Vec<Vec<f64>>,
    pub frame_cov_scale: f64,
    pub weight: f64,
}

/// Label prior: a length distribution over `[min_len, max_len]` and i.i.d.
/// tokens drawn from `token_probs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenPrior {
    pub min_len: usize,
    pub max_len: usize,
    pub length_probs: Vec<f64>,
    pub token_probs: Vec<f64>,
}

impl TokenPrior {
    pub fn uniform(vocab: usize, min_len: usize, max_len: usize) -> Self {
        let n_len = max_len - min_len + 1;
        TokenPrior {
            min_len,
            max_len,
            length_probs: vec![1.0 / n_len as f64; n_len],
            token_probs: vec![1.0 / vocab as f64; vocab],
        }
    }

    fn validate(&self, vocab: usize) -> Result<()> {
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::Config(format!(
                "length range [{}, {}] invalid",
                self.min_len, self.max_len
            )));
        }
        if self.length_probs.len() != self.max_len - self.min_len + 1 {
            return Err(Error::Config(
                "length_probs must have one entry per admissible length".into(),
            ));
        }
        if self.token_probs.len() != vocab {
            return Err(Error::Config(format!(
                "token_probs has {} entries for an alphabet of {vocab}",
                self.token_probs.len()
            )));
        }
        check_distribution("length_probs", &self.length_probs)?;
        check_distribution("token_probs", &self.token_probs)
    }
}

fn check_distribution(name: &str, p: &[f64]) -> Result<()> {
    if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Config(format!("{name} has entries outside [0, 1]")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SUM_TOL {
        return Err(Error::Config(format!("{name} sums to {sum}, not 1")));
    }
    Ok(())
}

/// Parametric joint distribution over (frame sequence, token sequence).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    #[serde(default = "schema_default")]
    pub schema: String,
    pub alphabet: TokenAlphabet,
    pub frame_dim: usize,
    pub frames_per_token: usize,
    pub noise_sigma: f64,
    pub token_prior: TokenPrior,
    pub styles: Vec<StyleComponent>,
}

impl WorldSpec {
    pub fn vocab(&self) -> usize {
        self.alphabet.len()
    }

    pub fn style_ids(&self) -> Vec<u32> {
        self.styles.iter().map(|s| s.id).collect()
    }

    /// Largest per-frame standard deviation over all styles.
    pub fn max_frame_std(&self) -> f64 {
        self.styles
            .iter()
            .map(|s| self.noise_sigma * s.frame_cov_scale.sqrt())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(Error::Config(format!(
                "world schema {:?}, expected {SCHEMA:?}",
                self.schema
            )));
        }
        self.alphabet.validate()?;
        let v = self.vocab();
        if self.frame_dim == 0 || self.frames_per_token == 0 {
            return Err(Error::Config(
                "frame_dim and frames_per_token must be positive".into(),
            ));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise_sigma must be positive".into()));
        }
        self.token_prior.validate(v)?;
        if self.styles.is_empty() {
            return Err(Error::Config("world needs at least one style".into()));
        }
        let mut ids = BTreeSet::new();
        for s in &self.styles {
            if !ids.insert(s.id) {
                return Err(Error::Config(format!("duplicate style id {}", s.id)));
            }
            check_style_shape(s.id, &s.frame_mean, v, self.frame_dim)?;
            if !(s.frame_cov_scale > 0.0 && s.frame_cov_scale.is_finite()) {
                return Err(Error::Config(format!(
                    "style {} has non-positive cov scale",
                    s.id
                )));
            }
        }
        let weights: Vec<f64> = self.styles.iter().map(|s| s.weight).collect();
        check_distribution("style weights", &weights)
    }
}

fn check_style_shape(id: u32, means: &[Vec<f64>], vocab: usize, dim: usize) -> Result<()> {
    if means.len() != vocab || means.iter().any(|m| m.len() != dim) {
        return Err(Error::Config(format!(
            "style {id} frame_mean must be {vocab} rows of dimension {dim}"
        )));
    }
    if means.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("style {id} has non-finite means")));
    }
    Ok(())
}

/// A style that only the synthetic generator emits, placed outside the
/// support of the real world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactStyle {
    pub id: u32,
    pub frame_mean: Vec<Vec<f64>>,
    pub frame_cov_scale: f64,
}

impl ArtifactStyle {
    /// Content-free artifact: every token shares one mean placed `sigmas`
    /// frame standard deviations beyond the furthest base mean along the
    /// first axis. The id is one past the largest base style id.
    pub fn far_from(base: &WorldSpec, sigmas: f64) -> Self {
        let means = base.styles.iter().flat_map(|s| s.frame_mean.iter());
        let max_first = means.clone().map(|m| m[0]).fold(f64::NEG_INFINITY, f64::max);
        let mut centre = vec![0.0; base.frame_dim];
        let mut count = 0.0;
        for m in means {
            for (c, v) in centre.iter_mut().zip(m) {
                *c += v;
            }
            count += 1.0;
        }
        for c in centre.iter_mut() {
            *c /= count;
        }
        centre[0] = max_first + sigmas * base.max_frame_std();
        ArtifactStyle {
            id: base.styles.iter().map(|s| s.id).max().unwrap_or(0) + 1,
            frame_mean: vec![centre; base.vocab()],
            frame_cov_scale: 1.0,
        }
    }
}

/// Distorted version of a base world: one knob per gap region (artifacts,
/// over/under-sampling, missing styles, content errors) plus a shift applied
/// to every synthetic style mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSpec {
    #[serde(default = "schema_default")]
    pub schema: String,
    pub base: WorldSpec,
    #[serde(default)]
    pub artifact_weight: f64,
    #[serde(default)]
    pub artifact: Option<ArtifactStyle>,
    /// Multiplicative factor per base style (same order); empty means all 1.
    #[serde(default)]
    pub style_reweight: Vec<f64>,
    #[serde(default)]
    pub dropped_styles: Vec<u32>,
    #[serde(default)]
    pub label_corruption_rate: f64,
    /// Offset added to every non-artifact synthetic frame mean; empty means zero.
    #[serde(default)]
    pub style_shift: Vec<f64>,
}

impl GapSpec {
    /// The gap that changes nothing.
    pub fn identity(base: WorldSpec) -> Self {
        GapSpec {
            schema: SCHEMA.to_string(),
            base,
            artifact_weight: 0.0,
            artifact: None,
            style_reweight: Vec::new(),
            dropped_styles: Vec::new(),
            label_corruption_rate: 0.0,
            style_shift: Vec::new(),
        }
    }

    pub fn with_artifacts(mut self, weight: f64, sigmas: f64) -> Self {
        self.artifact = Some(ArtifactStyle::far_from(&self.base, sigmas));
        self.artifact_weight = weight;
        self
    }

    pub fn with_reweight(mut self, factors: Vec<f64>) -> Self {
        self.style_reweight = factors;
        self
    }

    pub fn with_dropped(mut self, ids: Vec<u32>) -> Self {
        self.dropped_styles = ids;
        self
    }

    pub fn with_corruption(mut self, rate: f64) -> Self {
        self.label_corruption_rate = rate;
        self
    }

    pub fn with_shift(mut self, shift: Vec<f64>) -> Self {
        self.style_shift = shift;
        self
    }

    pub fn reweight_factor(&self, index: usize) -> f64 {
        self.style_reweight.get(index).copied().unwrap_or(1.0)
    }

    pub fn is_identity(&self) -> bool {
        self.artifact_weight == 0.0
            && self.style_reweight.iter().all(|&f| f == 1.0)
            && self.dropped_styles.is_empty()
            && self.label_corruption_rate == 0.0
            && self.style_shift.iter().all(|&s| s == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(Error::Config(format!(
                "gap schema {:?}, expected {SCHEMA:?}",
                self.schema
            )));
        }
        self.base.validate()?;
        if !(0.0..=0.5).contains(&self.artifact_weight) {
            return Err(Error::Config(format!(
                "artifact_weight {} outside [0, 0.5]",
                self.artifact_weight
            )));
        }
        if self.artifact_weight > 0.0 && self.artifact.is_none() {
            return Err(Error::Config(
                "artifact_weight > 0 requires an artifact style".into(),
            ));
        }
        if let Some(a) = &self.artifact {
            if self.base.styles.iter().any(|s| s.id == a.id) {
                return Err(Error::Config(format!(
                    "artifact style id {} collides with a base style",
                    a.id
                )));
            }
            check_style_shape(a.id, &a.frame_mean, self.base.vocab(), self.base.frame_dim)?;
            if !(a.frame_cov_scale > 0.0 && a.frame_cov_scale.is_finite()) {
                return Err(Error::Config("artifact cov scale must be positive".into()));
            }
        }
        if !self.style_reweight.is_empty() && self.style_reweight.len() != self.base.styles.len()
        {
            return Err(Error::Config(
                "style_reweight needs one factor per base style".into(),
            ));
        }
        if self
            .style_reweight
            .iter()
            .any(|f| !(f.is_finite() && *f >= 0.0))
        {
            return Err(Error::Config("reweight factors must be finite and >= 0".into()));
        }
        let ids = self.base.style_ids();
        if let Some(bad) = self.dropped_styles.iter().find(|d| !ids.contains(d)) {
            return Err(Error::Config(format!(
                "dropped style {bad} is not a base style"
            )));
        }
        if !(0.0..=0.5).contains(&self.label_corruption_rate) {
            return Err(Error::Config(format!(
                "label_corruption_rate {} outside [0, 0.5]",
                self.label_corruption_rate
            )));
        }
        if !self.style_shift.is_empty() && self.style_shift.len() != self.base.frame_dim {
            return Err(Error::Config("style_shift must match frame_dim".into()));
        }
        let kept_mass: f64 = self
            .base
            .styles
            .iter()
            .enumerate()
            .filter(|(_, s)| !self.dropped_styles.contains(&s.id))
            .map(|(i, s)| s.weight * self.reweight_factor(i))
            .sum();
        if kept_mass <= 0.0 {
            return Err(Error::Config(
                "gap leaves no base style with positive mass".into(),
            ));
        }
        Ok(())
    }
}
