//! End-to-end experiments: data, reference recognizer, discriminator,
//! curation, then one training run per table row and seed.

mod config;
mod pipeline;
mod results;

use std::path::{Path, PathBuf};

use serde::Serialize;

pub use config::{
    Arm, ArmSpec, Condition, ExperimentConfig, ReferenceConfig, Resolved, Sizes, Source, SynthSource, Techniques,
    EXPERIMENT_SCHEMA,
};
pub use pipeline::{
    curate, generate_data, real_world, run_arm, run_seed, synth_stream, synth_world, train_discriminator,
    train_reference, ArmOutcome, ArmResult, Curation, SeedData, SeedResult, TaskNet,
};
pub use results::{Results, Row, RESULTS_CSV, RESULTS_JSON, RESULTS_SCHEMA, SEEDS_CSV};

use crate::error::{Error, Result};

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// `out/<config hash>`.
pub fn run_dir(out: &Path, r: &Resolved) -> PathBuf {
    out.join(&r.hash()[..16])
}

pub fn seed_dir(out: &Path, r: &Resolved, seed: u64) -> PathBuf {
    run_dir(out, r).join(format!("seed-{seed}"))
}

/// Runs every seed (in parallel when enabled) and aggregates. Seeds run
/// independently; the table is assembled after all of them finish.
pub fn run(r: &Resolved, only: Option<&str>, out: Option<&Path>) -> Result<Results> {
    let mut arms = r.config.arms();
    if let Some(name) = only {
        arms.retain(|a| a.name == name);
        if arms.is_empty() {
            return Err(Error::Config(format!("unknown condition {name:?}")));
        }
    }
    let runs: Vec<SeedResult> = crate::par::map(&r.config.seeds, |&seed| {
        let dir = out.map(|o| seed_dir(o, r, seed));
        run_seed(r, &arms, seed, dir.as_deref())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let results = Results::collect(r.hash(), r.config.task, &arms, runs);
    if let Some(o) = out {
        let dir = run_dir(o, r);
        write_json(&dir.join("config.json"), &r.config)?;
        results.write(&dir)?;
    }
    Ok(results)
}
