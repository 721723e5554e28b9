use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::gapgen::Origin;
use crate::nn::DomainTag;
use crate::seed;

/// Which pools feed training and in what proportion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum MixPolicy {
    RealOnly,
    SynthOnly,
    /// `real_fraction = None` interleaves one pass over each pool,
    /// proportionally to their sizes. `Some(f)` keeps the epoch as long as
    /// that pass but makes `round(f * len)` of its batches real, cycling
    /// whichever pool runs short.
    Interleaved { real_fraction: Option<f64> },
}

impl Default for MixPolicy {
    fn default() -> Self {
        MixPolicy::Interleaved { real_fraction: None }
    }
}

/// How batches are assembled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Batching {
    /// Every batch holds one origin and carries its tag.
    #[default]
    Pure,
    /// The epoch's samples are shuffled together; batches are tagged Real.
    Mixed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub tag: DomainTag,
    /// `(pool, index into that pool)`.
    pub members: Vec<(Origin, usize)>,
}

impl Batch {
    pub fn is_pure(&self) -> bool {
        let want = match self.tag {
            DomainTag::Real => Origin::Real,
            DomainTag::Synthetic => Origin::Synthetic,
        };
        self.members.iter().all(|(o, _)| *o == want)
    }
}

type Members = Vec<(Origin, usize)>;

fn one_pass(n: usize, size: usize, rng: &mut seed::Rng, origin: Origin) -> Vec<Members> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(size).map(|c| c.iter().map(|&i| (origin, i)).collect()).collect()
}

/// `want` full batches drawn from back-to-back shuffles of the pool.
fn cycled(n: usize, want: usize, size: usize, rng: &mut seed::Rng, origin: Origin) -> Vec<Members> {
    let mut pool: Vec<usize> = Vec::new();
    let mut out = Vec::with_capacity(want);
    while out.len() < want {
        if pool.len() < size {
            let mut fresh: Vec<usize> = (0..n).collect();
            fresh.shuffle(rng);
            pool.extend(fresh);
        }
        out.push(pool.drain(..size.min(pool.len())).map(|i| (origin, i)).collect());
    }
    out
}

/// Merges two batch sequences so that each appears spread evenly over the
/// epoch: batch `i` of `a` sits at `(i + 0.5) / |a|`; ties go to `a`.
fn interleave<T>(a: Vec<T>, b: Vec<T>) -> Vec<(bool, T)> {
    let (na, nb) = (a.len(), b.len());
    let mut out = Vec::with_capacity(na + nb);
    let (mut ia, mut ib) = (a.into_iter().peekable(), b.into_iter().peekable());
    let (mut i, mut j) = (0usize, 0usize);
    loop {
        let take_a = match (ia.peek().is_some(), ib.peek().is_some()) {
            (false, false) => break,
            (true, false) => true,
            (false, true) => false,
            // compare (2i + 1) / 2na with (2j + 1) / 2nb exactly
            (true, true) => (2 * i + 1) * nb <= (2 * j + 1) * na,
        };
        if take_a {
            out.push((true, ia.next().unwrap()));
            i += 1;
        } else {
            out.push((false, ib.next().unwrap()));
            j += 1;
        }
    }
    out
}

/// One epoch of batches. Deterministic in `epoch_seed`.
pub fn make_batches(n_real: usize, n_synth: usize, cfg: &TrainConfig, epoch_seed: u64) -> Result<Vec<Batch>> {
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let b = cfg.batch_size;
    let (use_real, use_synth) = match cfg.mix_policy {
        MixPolicy::RealOnly => (true, false),
        MixPolicy::SynthOnly => (false, true),
        MixPolicy::Interleaved { real_fraction: Some(f) } if f >= 1.0 => (true, false),
        MixPolicy::Interleaved { real_fraction: Some(f) } if f <= 0.0 => (false, true),
        MixPolicy::Interleaved { .. } => (n_real > 0, n_synth > 0),
    };
    let n_real = if use_real { n_real } else { 0 };
    let n_synth = if use_synth { n_synth } else { 0 };
    if n_real == 0 && n_synth == 0 {
        return Err(Error::Contract(format!("no training samples under {:?}", cfg.mix_policy)));
    }

    let mut real_rng = seed::stream(epoch_seed, "real");
    let mut synth_rng = seed::stream(epoch_seed, "synthetic");
    let (real_batches, synth_batches) = match cfg.mix_policy {
        MixPolicy::Interleaved { real_fraction: Some(f) } if n_real > 0 && n_synth > 0 => {
            let total = n_real.div_ceil(b) + n_synth.div_ceil(b);
            let want_real = ((f * total as f64).round() as usize).clamp(1, total - 1);
            (
                cycled(n_real, want_real, b, &mut real_rng, Origin::Real),
                cycled(n_synth, total - want_real, b, &mut synth_rng, Origin::Synthetic),
            )
        }
        _ => (
            one_pass(n_real, b, &mut real_rng, Origin::Real),
            one_pass(n_synth, b, &mut synth_rng, Origin::Synthetic),
        ),
    };

    let ordered = interleave(real_batches, synth_batches);
    match cfg.batching {
        Batching::Pure => Ok(ordered
            .into_iter()
            .map(|(is_real, members)| Batch {
                tag: if is_real { DomainTag::Real } else { DomainTag::Synthetic },
                members,
            })
            .collect()),
        Batching::Mixed => {
            let mut all: Vec<(Origin, usize)> = ordered.into_iter().flat_map(|(_, m)| m).collect();
            all.shuffle(&mut seed::stream(epoch_seed, "mixed"));
            Ok(all
                .chunks(b)
                .map(|c| Batch {
                    tag: DomainTag::Real,
                    members: c.to_vec(),
                })
                .collect())
        }
    }
}
