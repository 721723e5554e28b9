use std::path::Path;

use serde::{Deserialize, Serialize};

use super::classifier::{BinaryClassifier, ClassifierConfig};
use super::features::{compute_features_many, FeatureVector};
use crate::error::{Error, Result};
use crate::gapgen::{Sample, World};
use crate::nn::Checkpoint;
use crate::recognizer::SequenceModel;

pub const DISCRIMINATOR_FORMAT: &str = "disc/1";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    #[default]
    Full5,
    CeOnly,
}

impl FeatureMode {
    pub fn mask(self) -> Vec<bool> {
        match self {
            FeatureMode::Full5 => vec![true; FeatureVector::DIM],
            FeatureMode::CeOnly => vec![true, false, false, false, false],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscriminatorConfig {
    pub feature_mode: FeatureMode,
    #[serde(flatten)]
    pub classifier: ClassifierConfig,
}

/// Anything that can say how likely a synthetic candidate is to be real.
pub trait RatioEstimator: Sync {
    /// `D(x, y)` for each sample.
    fn d_values(&self, batch: &[Sample]) -> Result<Vec<f64>>;
}

/// `D(x, y) = D_θ(Φ(x, y))` with Φ computed by a frozen reference recognizer.
#[derive(Clone, Debug)]
pub struct Discriminator {
    pub reference: SequenceModel,
    pub feature_mode: FeatureMode,
    pub classifier: BinaryClassifier,
}

#[derive(Serialize, Deserialize)]
struct DiscriminatorFile {
    format: String,
    feature_mode: FeatureMode,
    classifier: BinaryClassifier,
    reference: Checkpoint,
}

impl Discriminator {
    /// The constant one-half discriminator.
    pub fn constant(reference: SequenceModel) -> Self {
        Discriminator {
            reference,
            feature_mode: FeatureMode::Full5,
            classifier: BinaryClassifier::constant(FeatureVector::DIM),
        }
    }

    /// Fits `D` with real samples as the positive class.
    pub fn train(reference: SequenceModel, real: &[Sample], synth: &[Sample], cfg: &DiscriminatorConfig, seed: u64) -> Result<Self> {
        if real.is_empty() || synth.is_empty() {
            return Err(Error::Contract("discriminator needs real and synthetic samples".into()));
        }
        let rows = |data: &[Sample]| -> Result<Vec<Vec<f64>>> {
            Ok(compute_features_many(&reference, data)?
                .iter()
                .map(|f| f.to_array().to_vec())
                .collect())
        };
        let (pos, neg) = (rows(real)?, rows(synth)?);
        let classifier = BinaryClassifier::fit(&pos, &neg, cfg.feature_mode.mask(), &cfg.classifier, seed)?;
        Ok(Discriminator {
            reference,
            feature_mode: cfg.feature_mode,
            classifier,
        })
    }

    pub fn features(&self, data: &[Sample]) -> Result<Vec<FeatureVector>> {
        compute_features_many(&self.reference, data)
    }

    pub fn d_of_features(&self, f: &[FeatureVector]) -> Result<Vec<f64>> {
        let rows: Vec<Vec<f64>> = f.iter().map(|v| v.to_array().to_vec()).collect();
        self.classifier.probs(&rows)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = DiscriminatorFile {
            format: DISCRIMINATOR_FORMAT.into(),
            feature_mode: self.feature_mode,
            classifier: self.classifier.clone(),
            reference: self.reference.to_checkpoint(),
        };
        let text = serde_json::to_string(&file).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: DiscriminatorFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        if file.format != DISCRIMINATOR_FORMAT {
            return Err(Error::Config(format!("{}: unknown format {:?}", path.display(), file.format)));
        }
        Ok(Discriminator {
            reference: SequenceModel::from_checkpoint(&file.reference)?,
            feature_mode: file.feature_mode,
            classifier: file.classifier,
        })
    }
}

impl RatioEstimator for Discriminator {
    fn d_values(&self, batch: &[Sample]) -> Result<Vec<f64>> {
        self.d_of_features(&self.features(batch)?)
    }
}

/// The Bayes-optimal discriminator `p_d / (p_d + p_g)` from exact densities.
#[derive(Clone, Debug)]
pub struct OracleRatio {
    pub real: World,
    pub synth: World,
}

impl OracleRatio {
    pub fn d_value(&self, s: &Sample) -> Result<f64> {
        let ld = self.real.log_density(&s.features, &s.tokens)?;
        let lg = self.synth.log_density(&s.features, &s.tokens)?;
        Ok(match (ld == f64::NEG_INFINITY, lg == f64::NEG_INFINITY) {
            (true, _) => 0.0,
            (false, true) => 1.0,
            _ => 1.0 / (1.0 + (lg - ld).exp()),
        })
    }
}

impl RatioEstimator for OracleRatio {
    fn d_values(&self, batch: &[Sample]) -> Result<Vec<f64>> {
        crate::par::map(batch, |s| self.d_value(s)).into_iter().collect()
    }
}

/// Always answers `d`.
#[derive(Clone, Copy, Debug)]
pub struct ConstantRatio(pub f64);

impl RatioEstimator for ConstantRatio {
    fn d_values(&self, batch: &[Sample]) -> Result<Vec<f64>> {
        Ok(vec![self.0; batch.len()])
    }
}
