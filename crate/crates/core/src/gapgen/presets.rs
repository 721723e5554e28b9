//! Built-in worlds and gaps used by the default experiments and tests.

use super::spec::{GapSpec, StyleComponent, TokenAlphabet, TokenPrior, WorldSpec, SCHEMA};

/// Token constellation on a circle, transformed per style by a rotation and
/// an offset.
fn constellation(vocab: usize, radius: f64, rotation: f64, offset: [f64; 2]) -> Vec<Vec<f64>> {
    (0..vocab)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / vocab as f64 + rotation;
            vec![
                radius * angle.cos() + offset[0],
                radius * angle.sin() + offset[1],
            ]
        })
        .collect()
}

/// Three styles; `spread` scales how far the rotated/offset styles move away
/// from the canonical one.
fn styles(vocab: usize, radius: f64, spread: f64, weights: [f64; 3]) -> Vec<StyleComponent> {
    let shapes = [
        (0.0, [0.0, 0.0], 1.0),
        (0.35, [0.7, -0.5], 1.4),
        (-0.4, [-0.6, 0.7], 0.8),
    ];
    shapes
        .iter()
        .zip(weights)
        .enumerate()
        .map(|(id, (&(rot, off, cov), weight))| StyleComponent {
            id: id as u32,
            frame_mean: constellation(vocab, radius, spread * rot, [spread * off[0], spread * off[1]]),
            frame_cov_scale: cov,
            weight,
        })
        .collect()
}

const SPREAD: f64 = 0.5;

impl WorldSpec {
    /// Sequence-recognition world: d=2, F=3, V=4, lengths 1..=4, three styles.
    pub fn default_sequence() -> Self {
        let vocab = 4;
        WorldSpec {
            schema: SCHEMA.to_string(),
            alphabet: TokenAlphabet::letters(vocab),
            frame_dim: 2,
            frames_per_token: 3,
            noise_sigma: 0.5,
            token_prior: TokenPrior::uniform(vocab, 1, 4),
            styles: styles(vocab, 2.0, SPREAD, [0.5, 0.3, 0.2]),
        }
    }

    /// Keyword world: one word per utterance from an alphabet of six, the
    /// keyword (token 0) drawn a quarter of the time.
    pub fn default_keyword() -> Self {
        let vocab = 6;
        let mut token_probs = vec![0.15; vocab];
        token_probs[0] = 0.25;
        WorldSpec {
            schema: SCHEMA.to_string(),
            alphabet: TokenAlphabet::letters(vocab),
            frame_dim: 2,
            frames_per_token: 3,
            noise_sigma: 0.6,
            token_prior: TokenPrior {
                min_len: 1,
                max_len: 1,
                length_probs: vec![1.0],
                token_probs,
            },
            styles: styles(vocab, 2.0, 1.0, [0.5, 0.3, 0.2]),
        }
    }

    /// Single style, single token length; handy for closed-form checks.
    pub fn single_style(vocab: usize, frames_per_token: usize) -> Self {
        WorldSpec {
            schema: SCHEMA.to_string(),
            alphabet: TokenAlphabet::letters(vocab),
            frame_dim: 2,
            frames_per_token,
            noise_sigma: 0.5,
            token_prior: TokenPrior::uniform(vocab, 1, 1),
            styles: vec![StyleComponent {
                id: 0,
                frame_mean: constellation(vocab, 2.0, 0.0, [0.0, 0.0]),
                frame_cov_scale: 1.0,
                weight: 1.0,
            }],
        }
    }
}

impl GapSpec {
    /// Gap of the default keyword experiment: content errors, artifacts,
    /// uneven style coverage and a systematic shift of synthetic frames.
    pub fn keyword_experiment(base: WorldSpec) -> Self {
        GapSpec::identity(base)
            .with_artifacts(0.4, 12.0)
            .with_reweight(vec![0.6, 1.0, 2.0])
            .with_corruption(0.3)
            .with_shift(vec![0.5, 0.3])
    }

    /// Same ingredients for the sequence experiment, with more label noise
    /// and a smaller shift.
    pub fn sequence_experiment(base: WorldSpec) -> Self {
        GapSpec::identity(base)
            .with_artifacts(0.3, 12.0)
            .with_reweight(vec![0.6, 1.0, 2.0])
            .with_corruption(0.5)
            .with_shift(vec![0.2, 0.1])
    }

    /// Gap whose distortion is entirely recoverable by rejection: artifacts
    /// plus over/under-sampled styles, nothing dropped, labels intact.
    pub fn recoverable(base: WorldSpec) -> Self {
        GapSpec::identity(base)
            .with_artifacts(0.25, 12.0)
            .with_reweight(vec![1.6, 1.0, 0.35])
    }
}
