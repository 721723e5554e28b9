use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Arm, Resolved, SynthSource};
use crate::error::{Error, Result};
use crate::gapgen::{OwnedStream, Sample, World};
use crate::metrics::MetricReport;
use crate::nn::Checkpoint;
use crate::ratio::{
    estimate_initial_m, sample_until, CuratedSample, Discriminator, RatioEstimator, RejectionSampler, RunReport,
};
use crate::recognizer::{KeywordModel, SequenceModel, Task, TaskModel};
use crate::seed::{self, derive};
use crate::trainer::{train, EpochRecord, MixPolicy, TrainConfig};

/// Every dataset one seed needs.
#[derive(Clone, Debug)]
pub struct SeedData {
    pub real_train: Vec<Sample>,
    pub real_val: Vec<Sample>,
    pub real_test: Vec<Sample>,
    pub synth_pool: Vec<Sample>,
}

pub fn real_world(r: &Resolved) -> Result<World> {
    World::from_spec(&r.world)
}

pub fn synth_world(r: &Resolved) -> Result<World> {
    World::from_gap(&r.gap)
}

/// The synthetic candidate stream; the pool is its prefix.
pub fn synth_stream(r: &Resolved, seed: u64) -> Result<OwnedStream> {
    Ok(OwnedStream::new(synth_world(r)?, derive(seed, "data/synth")))
}

pub fn generate_data(r: &Resolved, seed: u64) -> Result<SeedData> {
    let real = real_world(r)?;
    let s = &r.config.sizes;
    Ok(SeedData {
        real_train: real.sample(s.real_n, derive(seed, "data/real_train")),
        real_val: real.sample(s.val_n, derive(seed, "data/real_val")),
        real_test: real.sample(s.test_n, derive(seed, "data/real_test")),
        synth_pool: synth_stream(r, seed)?.take(s.synth_pool_n).collect(),
    })
}

/// The recognizer whose errors feed the discriminator, trained on the real
/// training split only.
pub fn train_reference(r: &Resolved, data: &SeedData, seed: u64) -> Result<SequenceModel> {
    let mut rng = seed::stream(seed, "init/reference");
    let model = SequenceModel::new(
        r.world.alphabet.clone(),
        r.world.frame_dim,
        r.world.frames_per_token,
        &r.config.reference.model,
        &mut rng,
    );
    let cfg = TrainConfig {
        mix_policy: MixPolicy::RealOnly,
        seed: derive(seed, "batching/reference"),
        ..r.config.reference.trainer.clone()
    };
    Ok(train(model, &data.real_train, &[], &data.real_val, &cfg)?.model)
}

/// Real side: the validation split; synthetic side: a fresh draw of the
/// same size from the generator.
pub fn train_discriminator(r: &Resolved, reference: SequenceModel, data: &SeedData, seed: u64) -> Result<Discriminator> {
    let synth = synth_world(r)?.sample(r.config.sizes.disc_synth_n, derive(seed, "data/disc_synth"));
    Discriminator::train(
        reference,
        &data.real_val,
        &synth,
        &r.config.discriminator,
        derive(seed, "discriminator"),
    )
}

#[derive(Clone, Debug)]
pub struct Curation {
    pub samples: Vec<CuratedSample>,
    pub report: RunReport,
}

pub fn curate(r: &Resolved, est: &impl RatioEstimator, seed: u64, n: usize) -> Result<Curation> {
    let cfg = r.config.sampler.clone();
    let mut sampler = if n == 0 {
        RejectionSampler::new(1.0, 0, derive(seed, "rejection"), cfg.clone())?
    } else {
        let pilot = synth_world(r)?.sample(cfg.pilot_size.max(1), derive(seed, "data/pilot"));
        let m0 = estimate_initial_m(est, &pilot, cfg.clamp_eps)?;
        RejectionSampler::new(m0, n as u64, derive(seed, "rejection"), cfg)?
    };
    let mut source = synth_stream(r, seed)?;
    let (samples, report) = sample_until(&mut sampler, est, &mut source, n as u64)?;
    Ok(Curation { samples, report })
}

#[derive(Clone, Debug)]
pub enum TaskNet {
    Keyword(KeywordModel),
    Sequence(SequenceModel),
}

impl TaskNet {
    pub fn fresh(r: &Resolved, seed: u64) -> Self {
        let mut rng = seed::stream(seed, "init/task");
        let w = &r.world;
        match r.config.task {
            Task::Keyword => TaskNet::Keyword(KeywordModel::new(
                w.alphabet.clone(),
                r.config.keyword,
                w.frame_dim,
                w.frames_per_token,
                &r.config.model,
                &mut rng,
            )),
            Task::Sequence => TaskNet::Sequence(SequenceModel::new(
                w.alphabet.clone(),
                w.frame_dim,
                w.frames_per_token,
                &r.config.model,
                &mut rng,
            )),
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        match self {
            TaskNet::Keyword(m) => m.to_checkpoint(),
            TaskNet::Sequence(m) => m.to_checkpoint(),
        }
    }

    pub fn evaluate(&self, test: &[Sample]) -> Result<MetricReport> {
        match self {
            TaskNet::Keyword(m) => m.evaluate(test),
            TaskNet::Sequence(m) => m.evaluate(test),
        }
    }
}

pub struct ArmOutcome {
    pub model: TaskNet,
    pub records: Vec<EpochRecord>,
    pub report: MetricReport,
}

fn fit<M: TaskModel>(model: M, real: &[Sample], synth: &[Sample], val: &[Sample], cfg: &TrainConfig, test: &[Sample]) -> Result<(M, Vec<EpochRecord>, MetricReport)> {
    let out = train(model, real, synth, val, cfg)?;
    let report = out.model.evaluate(test)?;
    Ok((out.model, out.records, report))
}

/// Trains and evaluates one row of the table for one seed.
pub fn run_arm(r: &Resolved, data: &SeedData, curated: Option<&[Sample]>, arm: &Arm, seed: u64) -> Result<ArmOutcome> {
    let n = r.config.sizes.curated_n;
    let synth: &[Sample] = match arm.spec.synth {
        SynthSource::None => &[],
        SynthSource::Raw => &data.synth_pool[..n.min(data.synth_pool.len())],
        SynthSource::Curated => curated.ok_or_else(|| Error::Contract(format!("{} needs curated data", arm.name)))?,
    };
    let real: &[Sample] = if arm.spec.real { &data.real_train } else { &[] };
    let cfg = arm.spec.train_config(&r.config.trainer, derive(seed, "batching/task"));
    let (model, records, report) = match TaskNet::fresh(r, seed) {
        TaskNet::Keyword(m) => {
            let (m, rec, rep) = fit(m, real, synth, &data.real_val, &cfg, &data.real_test)?;
            (TaskNet::Keyword(m), rec, rep)
        }
        TaskNet::Sequence(m) => {
            let (m, rec, rep) = fit(m, real, synth, &data.real_val, &cfg, &data.real_test)?;
            (TaskNet::Sequence(m), rec, rep)
        }
    };
    Ok(ArmOutcome { model, records, report })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub name: String,
    /// Headline metric; `None` when the arm failed.
    pub metric: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub curation: Option<RunReport>,
    pub arms: Vec<ArmResult>,
}

impl SeedResult {
    pub fn failed(&self) -> bool {
        self.arms.iter().any(|a| a.error.is_some())
    }
}

/// Runs every arm for one seed. Stage failures are recorded per arm rather
/// than aborting the seed. With `dir`, final checkpoints, epoch records and
/// the curation report are written there.
pub fn run_seed(r: &Resolved, arms: &[Arm], seed: u64, dir: Option<&Path>) -> Result<SeedResult> {
    let data = generate_data(r, seed)?;
    let needs_curated = arms.iter().any(|a| a.spec.synth == SynthSource::Curated);
    let curation: Option<std::result::Result<Curation, String>> = needs_curated.then(|| {
        let reference = train_reference(r, &data, seed).map_err(|e| e.to_string())?;
        let disc = train_discriminator(r, reference, &data, seed).map_err(|e| e.to_string())?;
        curate(r, &disc, seed, r.config.sizes.curated_n).map_err(|e| e.to_string())
    });
    let curated: Option<Vec<Sample>> = match &curation {
        Some(Ok(c)) => Some(c.samples.iter().map(|c| c.sample.clone()).collect()),
        _ => None,
    };
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        if let Some(Ok(c)) = &curation {
            super::write_json(&dir.join("curation_report.json"), &c.report)?;
        }
    }

    let mut results = Vec::with_capacity(arms.len());
    for arm in arms {
        if arm.spec.synth == SynthSource::Curated {
            if let Some(Err(e)) = &curation {
                results.push(ArmResult {
                    name: arm.name.clone(),
                    metric: None,
                    error: Some(format!("curation failed: {e}")),
                });
                continue;
            }
        }
        match run_arm(r, &data, curated.as_deref(), arm, seed) {
            Ok(out) => {
                if let Some(dir) = dir {
                    let stem = arm.name.replace('+', "p");
                    out.model
                        .checkpoint()
                        .with_header_field("config_hash", r.hash())
                        .save(&dir.join(format!("{stem}.ckpt.json")))?;
                    super::write_json(&dir.join(format!("{stem}.records.json")), &out.records)?;
                }
                results.push(ArmResult {
                    name: arm.name.clone(),
                    metric: Some(out.report.primary()),
                    error: None,
                });
            }
            Err(e) => results.push(ArmResult {
                name: arm.name.clone(),
                metric: None,
                error: Some(e.to_string()),
            }),
        }
    }
    Ok(SeedResult {
        seed,
        curation: curation.and_then(|c| c.ok()).map(|c| c.report),
        arms: results,
    })
}
