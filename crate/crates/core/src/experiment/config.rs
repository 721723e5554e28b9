use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gapgen::{GapSpec, WorldSpec};
use crate::ratio::{DiscriminatorConfig, SamplerConfig};
use crate::recognizer::{ModelConfig, Task};
use crate::trainer::{Batching, MixPolicy, TrainConfig};

pub const EXPERIMENT_SCHEMA: &str = "experiment/1";

/// A spec given inline or as a path relative to the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Path(PathBuf),
    Inline(Box<T>),
}

impl<T: for<'de> Deserialize<'de> + Clone> Source<T> {
    fn resolve(&self, base_dir: &Path) -> Result<T> {
        match self {
            Source::Inline(v) => Ok((**v).clone()),
            Source::Path(p) => {
                let path = base_dir.join(p);
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sizes {
    pub real_n: usize,
    pub val_n: usize,
    pub test_n: usize,
    pub synth_pool_n: usize,
    /// Synthetic training-set size for every synthetic condition.
    pub curated_n: usize,
    /// Synthetic samples the discriminator sees (real side: the validation split).
    pub disc_synth_n: usize,
}

/// Training-data conditions compared by an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "real")]
    Real,
    #[serde(rename = "synt")]
    Synt,
    #[serde(rename = "synt++")]
    SyntPlus,
    #[serde(rename = "real+synt")]
    RealSynt,
    #[serde(rename = "real+synt++")]
    RealSyntPlus,
}

impl Condition {
    pub const ALL: [Condition; 5] = [
        Condition::Real,
        Condition::Synt,
        Condition::SyntPlus,
        Condition::RealSynt,
        Condition::RealSyntPlus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Real => "real",
            Condition::Synt => "synt",
            Condition::SyntPlus => "synt++",
            Condition::RealSynt => "real+synt",
            Condition::RealSyntPlus => "real+synt++",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Condition::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Which of the two techniques the "++" conditions switch on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Techniques {
    pub rejection: bool,
    pub double_bn: bool,
}

impl Default for Techniques {
    fn default() -> Self {
        Techniques {
            rejection: true,
            double_bn: true,
        }
    }
}

/// The reference recognizer behind the discriminator features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    pub model: ModelConfig,
    pub trainer: TrainConfig,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig {
            model: ModelConfig::default(),
            trainer: TrainConfig {
                epochs: 20,
                mix_policy: MixPolicy::RealOnly,
                ..Default::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub task: Task,
    /// Keyword token for the keyword task.
    #[serde(default)]
    pub keyword: usize,
    /// Defaults to the gap's base world; must match it when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world: Option<Source<WorldSpec>>,
    pub gap: Source<GapSpec>,
    pub sizes: Sizes,
    #[serde(default)]
    pub model: ModelConfig,
    /// Shared by every condition; mix policy, batching and double BN are
    /// set per condition.
    #[serde(default)]
    pub trainer: TrainConfig,
    #[serde(default)]
    pub reference: ReferenceConfig,
    #[serde(default)]
    pub discriminator: DiscriminatorConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    pub conditions: Vec<Condition>,
    /// Adds the four-row {baseline, +rejection, +dbl_bn, +both} grid.
    #[serde(default)]
    pub ablation_grid: bool,
    #[serde(default)]
    pub techniques: Techniques,
    /// Batching of the real+synt baseline.
    #[serde(default = "mixed")]
    pub baseline_batching: Batching,
    pub seeds: Vec<u64>,
}

fn mixed() -> Batching {
    Batching::Mixed
}

/// A config with both specs inlined and checked.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub world: WorldSpec,
    pub gap: GapSpec,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Resolved> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.resolve(path.parent().unwrap_or(Path::new(".")))
    }

    pub fn resolve(&self, base_dir: &Path) -> Result<Resolved> {
        let gap = self.gap.resolve(base_dir)?;
        let world = match &self.world {
            Some(w) => w.resolve(base_dir)?,
            None => gap.base.clone(),
        };
        if world != gap.base {
            return Err(Error::Config("world spec differs from the gap's base world".into()));
        }
        let mut config = self.clone();
        config.world = None;
        config.gap = Source::Inline(Box::new(gap.clone()));
        let r = Resolved { config, world, gap };
        r.validate()?;
        Ok(r)
    }

    pub fn default_keyword() -> Self {
        let world = WorldSpec::default_keyword();
        ExperimentConfig {
            schema: EXPERIMENT_SCHEMA.into(),
            task: Task::Keyword,
            keyword: 0,
            world: None,
            gap: Source::Inline(Box::new(GapSpec::keyword_experiment(world))),
            sizes: Sizes {
                real_n: 80,
                val_n: 200,
                test_n: 2000,
                synth_pool_n: 2000,
                curated_n: 800,
                disc_synth_n: 200,
            },
            model: ModelConfig::default(),
            trainer: TrainConfig {
                epochs: 20,
                ..Default::default()
            },
            reference: ReferenceConfig::default(),
            discriminator: DiscriminatorConfig::default(),
            sampler: SamplerConfig::default(),
            conditions: Condition::ALL.to_vec(),
            ablation_grid: true,
            techniques: Techniques::default(),
            baseline_batching: Batching::Mixed,
            seeds: (0..10).collect(),
        }
    }

    pub fn default_sequence() -> Self {
        let world = WorldSpec::default_sequence();
        ExperimentConfig {
            task: Task::Sequence,
            gap: Source::Inline(Box::new(GapSpec::sequence_experiment(world))),
            sizes: Sizes {
                real_n: 60,
                val_n: 150,
                test_n: 600,
                synth_pool_n: 2000,
                curated_n: 600,
                disc_synth_n: 150,
            },
            // with only a few real batches per epoch the real statistics go
            // stale; a fixed real share keeps them current
            trainer: TrainConfig {
                epochs: 20,
                mix_policy: MixPolicy::Interleaved { real_fraction: Some(0.25) },
                ..Default::default()
            },
            ..ExperimentConfig::default_keyword()
        }
    }

    /// SHA-256 over the canonical JSON of the resolved config, seeds
    /// excluded so every seed of one configuration shares a run directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.seeds.clear();
        let v = serde_json::to_value(&c).expect("config serializes");
        let mut h = Sha256::new();
        h.update(v.to_string().as_bytes());
        hex::encode(h.finalize())
    }
}

impl Resolved {
    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        if c.schema != EXPERIMENT_SCHEMA {
            return Err(Error::Config(format!("schema {:?}, expected {EXPERIMENT_SCHEMA:?}", c.schema)));
        }
        self.gap.validate()?;
        if c.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if c.conditions.is_empty() && !c.ablation_grid {
            return Err(Error::Config("no conditions to run".into()));
        }
        let s = &c.sizes;
        if s.real_n == 0 || s.val_n == 0 || s.test_n == 0 {
            return Err(Error::Config("real_n, val_n and test_n must be positive".into()));
        }
        if s.curated_n > s.synth_pool_n {
            return Err(Error::Config(format!(
                "curated_n {} exceeds synth_pool_n {}",
                s.curated_n, s.synth_pool_n
            )));
        }
        if c.task == Task::Keyword && c.keyword >= self.world.vocab() {
            return Err(Error::Config(format!("keyword {} outside the alphabet", c.keyword)));
        }
        c.trainer.validate()?;
        c.reference.trainer.validate()?;
        let clf = &c.discriminator.classifier;
        if !(0.0..1.0).contains(&clf.holdout) || !(clf.tolerance_se >= 0.0) {
            return Err(Error::Config("discriminator holdout must lie in [0, 1) and tolerance_se be non-negative".into()));
        }
        if !(c.sampler.clamp_eps > 0.0 && c.sampler.clamp_eps < 0.5) {
            return Err(Error::Config("clamp_eps must lie in (0, 0.5)".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        self.config.hash()
    }
}

/// What one row of the results table trains on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthSource {
    None,
    Raw,
    Curated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ArmSpec {
    pub real: bool,
    pub synth: SynthSource,
    pub double_bn: bool,
    pub mixed_batches: bool,
}

impl ArmSpec {
    pub fn train_config(&self, base: &TrainConfig, seed: u64) -> TrainConfig {
        TrainConfig {
            mix_policy: match (self.real, self.synth) {
                (true, SynthSource::None) => MixPolicy::RealOnly,
                (false, _) => MixPolicy::SynthOnly,
                (true, _) => base.mix_policy,
            },
            batching: if self.mixed_batches { Batching::Mixed } else { Batching::Pure },
            double_bn: self.double_bn,
            seed,
            ..base.clone()
        }
    }
}

/// A named row of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub name: String,
    pub spec: ArmSpec,
}

impl ExperimentConfig {
    /// Rows in table order: requested conditions, then the ablation grid.
    pub fn arms(&self) -> Vec<Arm> {
        let t = self.techniques;
        let curated = if t.rejection { SynthSource::Curated } else { SynthSource::Raw };
        let mixed = self.baseline_batching == Batching::Mixed;
        let arm = |name: &str, real, synth, double_bn, mixed_batches| Arm {
            name: name.into(),
            spec: ArmSpec {
                real,
                synth,
                double_bn,
                mixed_batches,
            },
        };
        let mut out: Vec<Arm> = self
            .conditions
            .iter()
            .map(|c| match c {
                Condition::Real => arm("real", true, SynthSource::None, false, false),
                Condition::Synt => arm("synt", false, SynthSource::Raw, false, false),
                // double BN is never used without real data
                Condition::SyntPlus => arm("synt++", false, curated, false, false),
                Condition::RealSynt => arm("real+synt", true, SynthSource::Raw, false, mixed),
                Condition::RealSyntPlus => arm("real+synt++", true, curated, t.double_bn, !t.double_bn && mixed),
            })
            .collect();
        if self.ablation_grid {
            out.push(arm("baseline", true, SynthSource::Raw, false, mixed));
            out.push(arm("+rejection", true, SynthSource::Curated, false, mixed));
            out.push(arm("+dbl_bn", true, SynthSource::Raw, true, false));
            out.push(arm("+both", true, SynthSource::Curated, true, false));
        }
        out
    }
}
