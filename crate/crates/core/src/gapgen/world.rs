use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::dataset::{Origin, Sample};
use super::spec::{GapSpec, WorldSpec};
use crate::error::{Error, Result};
use crate::linalg::log_sum_exp;
use crate::seed::{self, Rng};

#[derive(Clone, Debug)]
struct Component {
    id: u32,
    weight: f64,
    log_weight: f64,
    /// `V x d` frame means.
    means: Vec<Vec<f64>>,
    std: f64,
}

/// A validated, ready-to-use mixture: sampling and exact log densities.
///
/// Built from a [`WorldSpec`] (the real distribution) or a [`GapSpec`] (the
/// synthetic generator). Both go through the same density code so an
/// identity gap reproduces the base density bit for bit.
#[derive(Clone, Debug)]
pub struct World {
    components: Vec<Component>,
    frame_dim: usize,
    frames_per_token: usize,
    vocab: usize,
    min_len: usize,
    max_len: usize,
    length_probs: Vec<f64>,
    token_probs: Vec<f64>,
    log_token_probs: Vec<f64>,
    corruption: f64,
    origin: Origin,
}

impl World {
    pub fn from_spec(spec: &WorldSpec) -> Result<Self> {
        spec.validate()?;
        let components = spec
            .styles
            .iter()
            .filter(|s| s.weight > 0.0)
            .map(|s| Component {
                id: s.id,
                weight: s.weight,
                log_weight: s.weight.ln(),
                means: s.frame_mean.clone(),
                std: spec.noise_sigma * s.frame_cov_scale.sqrt(),
            })
            .collect();
        Ok(Self::assemble(spec, components, 0.0, Origin::Real))
    }

    pub fn from_gap(gap: &GapSpec) -> Result<Self> {
        gap.validate()?;
        let base = &gap.base;
        if gap.is_identity() {
            let mut world = Self::from_spec(base)?;
            world.origin = Origin::Synthetic;
            return Ok(world);
        }
        let kept: Vec<(usize, f64)> = base
            .styles
            .iter()
            .enumerate()
            .filter(|(_, s)| !gap.dropped_styles.contains(&s.id))
            .map(|(i, s)| (i, s.weight * gap.reweight_factor(i)))
            .collect();
        let total: f64 = kept.iter().map(|(_, w)| w).sum();
        let base_mass = 1.0 - gap.artifact_weight;
        let shift = |m: &Vec<f64>| -> Vec<f64> {
            m.iter()
                .enumerate()
                .map(|(k, v)| v + gap.style_shift.get(k).copied().unwrap_or(0.0))
                .collect()
        };
        let mut components: Vec<Component> = kept
            .into_iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|(i, w)| {
                let s = &base.styles[i];
                let weight = base_mass * w / total;
                Component {
                    id: s.id,
                    weight,
                    log_weight: weight.ln(),
                    means: s.frame_mean.iter().map(shift).collect(),
                    std: base.noise_sigma * s.frame_cov_scale.sqrt(),
                }
            })
            .collect();
        if gap.artifact_weight > 0.0 {
            let a = gap.artifact.as_ref().expect("validated");
            components.push(Component {
                id: a.id,
                weight: gap.artifact_weight,
                log_weight: gap.artifact_weight.ln(),
                means: a.frame_mean.clone(),
                std: base.noise_sigma * a.frame_cov_scale.sqrt(),
            });
        }
        Ok(Self::assemble(
            base,
            components,
            gap.label_corruption_rate,
            Origin::Synthetic,
        ))
    }

    fn assemble(spec: &WorldSpec, components: Vec<Component>, corruption: f64, origin: Origin) -> Self {
        let p = &spec.token_prior;
        World {
            components,
            frame_dim: spec.frame_dim,
            frames_per_token: spec.frames_per_token,
            vocab: spec.vocab(),
            min_len: p.min_len,
            max_len: p.max_len,
            length_probs: p.length_probs.clone(),
            token_probs: p.token_probs.clone(),
            log_token_probs: p.token_probs.iter().map(|v| v.ln()).collect(),
            corruption,
            origin,
        }
    }

    pub fn frame_dim(&self) -> usize {
        self.frame_dim
    }

    pub fn frames_per_token(&self) -> usize {
        self.frames_per_token
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    /// `(style id, emission probability)` for every component with mass.
    pub fn style_weights(&self) -> Vec<(u32, f64)> {
        self.components.iter().map(|c| (c.id, c.weight)).collect()
    }

    /// Frame mean and standard deviation of `token` under style `id`.
    pub fn emission(&self, id: u32, token: usize) -> Option<(&[f64], f64)> {
        self.components
            .iter()
            .find(|c| c.id == id)
            .map(|c| (c.means[token].as_slice(), c.std))
    }

    pub fn length_probs(&self) -> (usize, &[f64]) {
        (self.min_len, &self.length_probs)
    }

    pub fn token_probs(&self) -> &[f64] {
        &self.token_probs
    }

    pub fn corruption(&self) -> f64 {
        self.corruption
    }

    /// Draws one sample with the given id.
    pub fn draw(&self, id: u64, rng: &mut Rng) -> Sample {
        let comp = &self.components[pick(rng, self.components.iter().map(|c| c.weight))];
        let len = self.min_len + pick(rng, self.length_probs.iter().copied());
        let truth: Vec<usize> = (0..len)
            .map(|_| pick(rng, self.token_probs.iter().copied()))
            .collect();
        let mut features = Vec::with_capacity(len * self.frames_per_token);
        for &tok in &truth {
            let mean = &comp.means[tok];
            for _ in 0..self.frames_per_token {
                let frame: Vec<f64> = mean
                    .iter()
                    .map(|m| {
                        let z: f64 = StandardNormal.sample(rng);
                        m + comp.std * z
                    })
                    .collect();
                features.push(frame);
            }
        }
        let tokens = if self.corruption > 0.0 {
            truth
                .iter()
                .map(|&tok| {
                    if rng.random::<f64>() < self.corruption {
                        let other = rng.random_range(0..self.vocab - 1);
                        if other >= tok {
                            other + 1
                        } else {
                            other
                        }
                    } else {
                        tok
                    }
                })
                .collect()
        } else {
            truth
        };
        Sample {
            id,
            features,
            tokens,
            origin: self.origin,
            style_id: comp.id,
        }
    }

    /// Endless deterministic stream of samples with ids `0, 1, 2, ...`.
    pub fn stream(&self, seed: u64) -> SampleStream<'_> {
        SampleStream {
            world: self,
            rng: seed::rng(seed),
            next_id: 0,
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Vec<Sample> {
        self.stream(seed).take(n).collect()
    }

    /// Exact `ln p(x, y)`, marginalising style and (for corrupted gaps) the
    /// uncorrupted label. `-inf` when `y` lies outside the prior support.
    pub fn log_density(&self, x: &[Vec<f64>], y: &[usize]) -> Result<f64> {
        let f = self.frames_per_token;
        if x.len() != f * y.len() {
            return Err(Error::Contract(format!(
                "{} frames for {} tokens at {f} frames per token",
                x.len(),
                y.len()
            )));
        }
        if let Some(bad) = x.iter().find(|fr| fr.len() != self.frame_dim) {
            return Err(Error::Contract(format!(
                "frame of dimension {}, expected {}",
                bad.len(),
                self.frame_dim
            )));
        }
        if y.len() < self.min_len || y.len() > self.max_len || y.iter().any(|&t| t >= self.vocab) {
            return Ok(f64::NEG_INFINITY);
        }
        let len_p = self.length_probs[y.len() - self.min_len];
        if len_p == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        let mut per_style = Vec::with_capacity(self.components.len());
        for comp in &self.components {
            let mut total = comp.log_weight;
            for (i, &label) in y.iter().enumerate() {
                let segment = &x[i * f..(i + 1) * f];
                total += self.segment_term(comp, segment, label);
            }
            per_style.push(total);
        }
        Ok(len_p.ln() + log_sum_exp(&per_style))
    }

    fn segment_term(&self, comp: &Component, segment: &[Vec<f64>], label: usize) -> f64 {
        if self.corruption == 0.0 {
            return self.log_token_probs[label] + segment_log_normal(segment, &comp.means[label], comp.std);
        }
        let keep = (1.0 - self.corruption).ln();
        let swap = (self.corruption / (self.vocab - 1) as f64).ln();
        let terms: Vec<f64> = (0..self.vocab)
            .map(|truth| {
                let k = if truth == label { keep } else { swap };
                self.log_token_probs[truth] + k + segment_log_normal(segment, &comp.means[truth], comp.std)
            })
            .collect();
        log_sum_exp(&terms)
    }
}

fn segment_log_normal(segment: &[Vec<f64>], mean: &[f64], std: f64) -> f64 {
    let var = std * std;
    let d = mean.len() as f64;
    let norm = -0.5 * d * (2.0 * PI * var).ln();
    segment
        .iter()
        .map(|frame| {
            let sq: f64 = frame.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
            norm - sq / (2.0 * var)
        })
        .sum()
}

/// Categorical draw by inverse CDF; weights need not be normalised.
fn pick(rng: &mut Rng, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let total: f64 = weights.clone().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

pub struct SampleStream<'a> {
    world: &'a World,
    rng: Rng,
    next_id: u64,
}

impl Iterator for SampleStream<'_> {
    type Item = Sample;

    fn next(&mut self) -> Option<Sample> {
        let s = self.world.draw(self.next_id, &mut self.rng);
        self.next_id += 1;
        Some(s)
    }
}

/// Owning variant of [`SampleStream`] for callers that need `'static`.
pub struct OwnedStream {
    world: World,
    rng: Rng,
    next_id: u64,
}

impl OwnedStream {
    pub fn new(world: World, seed: u64) -> Self {
        OwnedStream {
            world,
            rng: seed::rng(seed),
            next_id: 0,
        }
    }
}

impl Iterator for OwnedStream {
    type Item = Sample;

    fn next(&mut self) -> Option<Sample> {
        let s = self.world.draw(self.next_id, &mut self.rng);
        self.next_id += 1;
        Some(s)
    }
}
