use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::discriminator::RatioEstimator;
use crate::error::{Error, Result};
use crate::gapgen::Sample;
use crate::seed::{self, Rng};

pub const DEFAULT_CLAMP_EPS: f64 = 1e-6;
pub const DEFAULT_PILOT: usize = 200;

/// `D / (1 - D)` with `D` clamped to `[eps, 1 - eps]`.
pub fn density_ratio(d: f64, clamp_eps: f64) -> f64 {
    let d = d.clamp(clamp_eps, 1.0 - clamp_eps);
    d / (1.0 - d)
}

/// Largest ratio over a pilot batch of synthetic samples.
pub fn estimate_initial_m(est: &impl RatioEstimator, pilot: &[Sample], clamp_eps: f64) -> Result<f64> {
    if pilot.is_empty() {
        return Err(Error::Contract("pilot set is empty".into()));
    }
    Ok(est
        .d_values(pilot)?
        .into_iter()
        .map(|d| density_ratio(d, clamp_eps))
        .fold(f64::MIN_POSITIVE, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub pilot_size: usize,
    pub clamp_eps: f64,
    /// Abort when the acceptance rate over a window falls below this.
    pub floor: f64,
    pub floor_window: u64,
    /// Candidates scored per parallel chunk.
    pub chunk: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            pilot_size: DEFAULT_PILOT,
            clamp_eps: DEFAULT_CLAMP_EPS,
            floor: 1e-4,
            floor_window: 10_000,
            chunk: 512,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub decision: Decision,
    pub d: f64,
    pub r: f64,
    /// Bound after the update, i.e. the one the draw used.
    pub m: f64,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub n_seen: u64,
    pub n_accepted: u64,
    #[serde(rename = "initial_M")]
    pub initial_m: f64,
    #[serde(rename = "final_M")]
    pub final_m: f64,
    pub acceptance_rate: f64,
}

/// A curated sample: the candidate plus the numbers behind its acceptance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CuratedSample {
    #[serde(flatten)]
    pub sample: Sample,
    #[serde(rename = "D")]
    pub d: f64,
    pub r: f64,
    #[serde(rename = "M_at_decision")]
    pub m_at_decision: f64,
}

/// Serial accept/reject state machine. `M` only grows.
#[derive(Clone, Debug)]
pub struct RejectionSampler {
    m: f64,
    initial_m: f64,
    n_seen: u64,
    n_accepted: u64,
    target_n: u64,
    rng: Rng,
    cfg: SamplerConfig,
    window_seen: u64,
    window_accepted: u64,
    /// `(n_seen, M)` each time `M` changed, starting with the initial value.
    m_trace: Vec<(u64, f64)>,
}

impl RejectionSampler {
    pub fn new(initial_m: f64, target_n: u64, seed: u64, cfg: SamplerConfig) -> Result<Self> {
        if !(initial_m > 0.0 && initial_m.is_finite()) {
            return Err(Error::Contract(format!("initial M must be positive and finite, got {initial_m}")));
        }
        Ok(RejectionSampler {
            m: initial_m,
            initial_m,
            n_seen: 0,
            n_accepted: 0,
            target_n,
            rng: seed::stream(seed, "rejection"),
            cfg,
            window_seen: 0,
            window_accepted: 0,
            m_trace: vec![(0, initial_m)],
        })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn n_seen(&self) -> u64 {
        self.n_seen
    }

    pub fn n_accepted(&self) -> u64 {
        self.n_accepted
    }

    pub fn is_active(&self) -> bool {
        self.n_accepted < self.target_n
    }

    pub fn m_trace(&self) -> &[(u64, f64)] {
        &self.m_trace
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    /// Decides one candidate given its discriminator output: update `M`,
    /// then accept with probability `r / M`.
    pub fn decide(&mut self, d: f64) -> Result<DecisionRecord> {
        if !self.is_active() {
            return Err(Error::Contract("sampler already reached its target".into()));
        }
        let r = density_ratio(d, self.cfg.clamp_eps);
        if r > self.m {
            self.m = r;
            self.m_trace.push((self.n_seen, r));
        }
        let probability = r / self.m;
        let decision = if self.rng.random::<f64>() < probability {
            Decision::Accept
        } else {
            Decision::Reject
        };
        self.n_seen += 1;
        self.window_seen += 1;
        if decision == Decision::Accept {
            self.n_accepted += 1;
            self.window_accepted += 1;
        }
        if self.window_seen == self.cfg.floor_window {
            let rate = self.window_accepted as f64 / self.window_seen as f64;
            if rate < self.cfg.floor {
                return Err(Error::AcceptanceFloor {
                    rate,
                    floor: self.cfg.floor,
                    n_seen: self.n_seen,
                    n_accepted: self.n_accepted,
                    m: self.m,
                });
            }
            self.window_seen = 0;
            self.window_accepted = 0;
        }
        Ok(DecisionRecord {
            decision,
            d,
            r,
            m: self.m,
            probability,
        })
    }

    pub fn accept(&mut self, est: &impl RatioEstimator, s: &Sample) -> Result<DecisionRecord> {
        let d = est.d_values(std::slice::from_ref(s))?[0];
        self.decide(d)
    }

    pub fn report(&self) -> RunReport {
        RunReport {
            n_seen: self.n_seen,
            n_accepted: self.n_accepted,
            initial_m: self.initial_m,
            final_m: self.m,
            acceptance_rate: if self.n_seen == 0 {
                0.0
            } else {
                self.n_accepted as f64 / self.n_seen as f64
            },
        }
    }
}

/// Pulls candidates from `source` until `n` have been accepted. Candidates
/// are scored in parallel chunks but decided strictly in stream order, so
/// the result does not depend on the thread count.
pub fn sample_until(
    sampler: &mut RejectionSampler,
    est: &impl RatioEstimator,
    source: &mut impl Iterator<Item = Sample>,
    n: u64,
) -> Result<(Vec<CuratedSample>, RunReport)> {
    let mut out = Vec::with_capacity(n as usize);
    let chunk = sampler.cfg.chunk.max(1);
    while (out.len() as u64) < n {
        let candidates: Vec<Sample> = source.by_ref().take(chunk).collect();
        if candidates.is_empty() {
            return Err(Error::Contract(format!(
                "candidate source ran dry after {} samples with {} of {n} accepted",
                sampler.n_seen(),
                out.len()
            )));
        }
        let ds = est.d_values(&candidates)?;
        for (s, d) in candidates.into_iter().zip(ds) {
            let rec = sampler.decide(d)?;
            if rec.decision == Decision::Accept {
                out.push(CuratedSample {
                    sample: s,
                    d,
                    r: rec.r,
                    m_at_decision: rec.m,
                });
                if out.len() as u64 == n {
                    break;
                }
            }
        }
    }
    Ok((out, sampler.report()))
}
