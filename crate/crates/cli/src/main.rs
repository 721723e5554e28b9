use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use synthgap::experiment::{self, curate, generate_data, run_seed, train_discriminator, train_reference, ExperimentConfig, Resolved, Results};
use synthgap::gapgen::{write_jsonl, Dataset};
use synthgap::nn::Checkpoint;
use synthgap::ratio::Discriminator;
use synthgap::recognizer::{SequenceModel, TaskModel};
use synthgap::{par, selftest, Error};

const REFERENCE_FILE: &str = "reference.ckpt.json";
const DISCRIMINATOR_FILE: &str = "discriminator.json";
const DISCRIMINATOR_META: &str = "discriminator.meta.json";

fn provenance(r: &Resolved, seed: u64) -> serde_json::Value {
    serde_json::json!({ "config_hash": r.hash(), "seed": seed })
}

#[derive(Parser)]
#[command(name = "synthgap", version, about = "Synthetic-data curation experiments on toy worlds")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (JSON). Defaults to the built-in config for --task.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Built-in config used when --config is absent.
    #[arg(long, global = true, value_enum, default_value_t = TaskArg::Keyword)]
    task: TaskArg,

    /// Master seed; replaces the config's seed list.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Restrict to one table row (e.g. real+synt++ or +dbl_bn).
    #[arg(long, global = true)]
    condition: Option<String>,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Keyword,
    Sequence,
}

#[derive(Subcommand)]
enum Command {
    /// Write real train/val/test splits and the raw synthetic pool as JSONL.
    GenData,
    /// Train the reference recognizer, or one table row with --condition.
    TrainRecognizer,
    /// Train the real-vs-synthetic discriminator.
    TrainDiscriminator,
    /// Rejection-sample a curated synthetic set.
    Curate,
    /// Run every condition over every seed and write the results table.
    Run,
    /// Print a results table written by `run` (--out points at the run directory).
    Report,
    /// Run the oracle suites.
    Selftest,
}

/// Failure carrying its exit code: 2 for configuration, 3 for runtime.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let config = error.chain().any(|e| e.downcast_ref::<Error>().is_some_and(Error::is_config));
        Failure { code: if config { 2 } else { 3 }, error }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn config_error(msg: String) -> Failure {
    Failure { code: 2, error: anyhow!(msg) }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    par::set_threads(cli.jobs);
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Selftest => return cmd_selftest(),
        Command::Report => return cmd_report(&cli.out),
        _ => {}
    }
    let r = load_config(cli)?;
    let seed = r.config.seeds[0];
    match cli.command {
        Command::GenData => cmd_gen_data(&r, seed, &cli.out),
        Command::TrainRecognizer => cmd_train_recognizer(&r, seed, &cli.out, cli.condition.as_deref()),
        Command::TrainDiscriminator => cmd_train_discriminator(&r, seed, &cli.out).map(|_| ()),
        Command::Curate => cmd_curate(&r, seed, &cli.out),
        Command::Run => cmd_run(&r, &cli.out, cli.condition.as_deref()),
        Command::Report | Command::Selftest => unreachable!(),
    }
}

fn load_config(cli: &Cli) -> Result<Resolved, Failure> {
    let mut r = match &cli.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| Failure { code: 2, error: e.into() })?,
        None => {
            let cfg = match cli.task {
                TaskArg::Keyword => ExperimentConfig::default_keyword(),
                TaskArg::Sequence => ExperimentConfig::default_sequence(),
            };
            cfg.resolve(Path::new("."))?
        }
    };
    if let Some(seed) = cli.seed {
        r.config.seeds = vec![seed];
    }
    if r.config.seeds.is_empty() {
        return Err(config_error("config has no seeds".into()));
    }
    Ok(r)
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
        .map_err(|error| Failure { code: 3, error })
}

fn write_pretty<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(anyhow::Error::from)?;
    std::fs::write(path, text + "\n")
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(|error| Failure { code: 3, error })
}

fn cmd_selftest() -> Result<(), Failure> {
    let checks = selftest::run();
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        return Err(Failure { code: 3, error: anyhow!("{failed} self-test check(s) failed") });
    }
    Ok(())
}

fn cmd_gen_data(r: &Resolved, seed: u64, out: &Path) -> Result<(), Failure> {
    create_dir(out)?;
    let data = generate_data(r, seed)?;
    let splits = [
        ("real_train", data.real_train),
        ("real_val", data.real_val),
        ("real_test", data.real_test),
        ("synth_pool", data.synth_pool),
    ];
    for (name, samples) in splits {
        let ds = Dataset::new(samples);
        let path = out.join(format!("{name}.jsonl"));
        ds.write_jsonl(&path)?;
        let hist: Vec<String> = ds.style_histogram().iter().map(|(k, v)| format!("{k}:{v}")).collect();
        println!("{:<11} {:>6} samples  styles {{{}}}  -> {}", name, ds.len(), hist.join(", "), path.display());
    }
    Ok(())
}

/// Reuses `out/reference.ckpt.json` when it was written for this config.
fn reference(r: &Resolved, seed: u64, out: &Path, retrain: bool) -> Result<SequenceModel, Failure> {
    let path = out.join(REFERENCE_FILE);
    if !retrain && path.is_file() {
        let ckpt = Checkpoint::load(&path)?;
        let field = |k: &str| ckpt.header.as_ref().and_then(|h| h.get(k)).cloned();
        if field("config_hash") == Some(r.hash().into()) && field("seed") == Some(seed.into()) {
            return Ok(SequenceModel::from_checkpoint(&ckpt)?);
        }
        log::warn!("{} was trained under another config or seed; retraining", path.display());
    }
    let data = generate_data(r, seed)?;
    let model = train_reference(r, &data, seed)?;
    create_dir(out)?;
    model
        .to_checkpoint()
        .with_header_field("config_hash", r.hash())
        .with_header_field("seed", seed)
        .save(&path)?;
    println!("trained reference recognizer -> {}", path.display());
    Ok(model)
}

fn cmd_train_recognizer(r: &Resolved, seed: u64, out: &Path, condition: Option<&str>) -> Result<(), Failure> {
    let Some(name) = condition else {
        let model = reference(r, seed, out, true)?;
        let data = generate_data(r, seed)?;
        let report = model.evaluate(&data.real_test)?;
        println!("reference {} on real test: {:.4}", report.primary_name(), report.primary());
        return Ok(());
    };
    let arms: Vec<_> = r.config.arms().into_iter().filter(|a| a.name == name).collect();
    if arms.is_empty() {
        let known: Vec<String> = r.config.arms().into_iter().map(|a| a.name).collect();
        return Err(config_error(format!("unknown condition {name:?}; expected one of {}", known.join(", "))));
    }
    let result = run_seed(r, &arms, seed, Some(out))?;
    for arm in &result.arms {
        match (&arm.metric, &arm.error) {
            (Some(m), _) => println!("{} seed {}: {:.4}", arm.name, seed, m),
            (None, e) => {
                return Err(Failure {
                    code: 3,
                    error: anyhow!("{} failed: {}", arm.name, e.as_deref().unwrap_or("unknown error")),
                })
            }
        }
    }
    Ok(())
}

fn cmd_train_discriminator(r: &Resolved, seed: u64, out: &Path) -> Result<Discriminator, Failure> {
    let reference = reference(r, seed, out, false)?;
    let data = generate_data(r, seed)?;
    let disc = train_discriminator(r, reference, &data, seed)?;
    let path = out.join(DISCRIMINATOR_FILE);
    disc.save(&path)?;
    write_pretty(&out.join(DISCRIMINATOR_META), &provenance(r, seed))?;
    let losses = &disc.classifier.epoch_losses;
    match (losses.first(), losses.last()) {
        (Some(a), Some(b)) => println!("discriminator loss {a:.4} -> {b:.4} over {} epochs -> {}", losses.len(), path.display()),
        _ => println!("discriminator is constant (degenerate features) -> {}", path.display()),
    }
    Ok(disc)
}

fn cmd_curate(r: &Resolved, seed: u64, out: &Path) -> Result<(), Failure> {
    let path = out.join(DISCRIMINATOR_FILE);
    let meta: Option<serde_json::Value> = std::fs::read_to_string(out.join(DISCRIMINATOR_META))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok());
    let disc = if path.is_file() && meta == Some(provenance(r, seed)) {
        Discriminator::load(&path)?
    } else {
        println!("no discriminator for this config and seed in {}; training one", out.display());
        cmd_train_discriminator(r, seed, out)?
    };
    let n = r.config.sizes.curated_n;
    let c = curate(r, &disc, seed, n)?;
    create_dir(out)?;
    let data_path = out.join("curated.jsonl");
    write_jsonl(&data_path, &c.samples)?;
    write_pretty(&out.join("curation_report.json"), &c.report)?;
    println!(
        "accepted {} of {} candidates (rate {:.4}, M {:.3} -> {:.3}) -> {}",
        c.report.n_accepted,
        c.report.n_seen,
        c.report.acceptance_rate,
        c.report.initial_m,
        c.report.final_m,
        data_path.display()
    );
    Ok(())
}

fn cmd_run(r: &Resolved, out: &Path, condition: Option<&str>) -> Result<(), Failure> {
    let results = experiment::run(r, condition, Some(out))?;
    println!("{}", results.render());
    println!("written to {}", experiment::run_dir(out, r).display());
    let failures: usize = results.rows.iter().map(|row| row.failures).sum();
    if failures > 0 || !results.complete {
        return Err(Failure { code: 3, error: anyhow!("{failures} run(s) failed; partial results were written") });
    }
    Ok(())
}

/// Accepts either a run directory or an output root holding exactly one run.
fn find_run_dir(dir: &Path) -> PathBuf {
    if dir.join(experiment::RESULTS_JSON).is_file() {
        return dir.to_path_buf();
    }
    let runs: Vec<PathBuf> = std::fs::read_dir(dir)
        .into_iter()
        .flatten()
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.join(experiment::RESULTS_JSON).is_file())
        .collect();
    match runs.as_slice() {
        [one] => one.clone(),
        _ => dir.to_path_buf(),
    }
}

fn cmd_report(out: &Path) -> Result<(), Failure> {
    let results = Results::load(&find_run_dir(out))?;
    println!("config {}", results.config_hash);
    println!("{}", results.render());
    Ok(())
}
