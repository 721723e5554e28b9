use std::path::Path;
use std::process::{Command, Output};

use synthgap::experiment::{Condition, ExperimentConfig, Source, RESULTS_CSV};
use synthgap::gapgen::{Dataset, GapSpec};
use tempfile::TempDir;

fn synthgap(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_synthgap"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default_keyword();
    cfg.sizes.real_n = 40;
    cfg.sizes.val_n = 40;
    cfg.sizes.test_n = 100;
    cfg.sizes.synth_pool_n = 120;
    cfg.sizes.curated_n = 40;
    cfg.sizes.disc_synth_n = 40;
    cfg.trainer.epochs = 3;
    cfg.trainer.checkpoint_k = 2;
    cfg.reference.trainer.epochs = 3;
    cfg.reference.trainer.checkpoint_k = 2;
    cfg.discriminator.classifier.epochs = 5;
    cfg.seeds = vec![1];
    cfg
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn gen_data_counts_and_reproducibility() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &small_config());
    for out in ["a", "b"] {
        let o = synthgap(&["gen-data", "--config", &cfg, "--out", out], tmp.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for (name, n) in [("real_train", 40), ("real_val", 40), ("real_test", 100), ("synth_pool", 120)] {
        let a = std::fs::read(tmp.path().join("a").join(format!("{name}.jsonl"))).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(format!("{name}.jsonl"))).unwrap();
        assert_eq!(a.iter().filter(|&&c| c == b'\n').count(), n, "{name}");
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn gen_data_dropped_style_is_absent() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = small_config();
    let base = match &cfg.gap {
        Source::Inline(g) => g.base.clone(),
        Source::Path(_) => unreachable!(),
    };
    cfg.gap = Source::Inline(Box::new(GapSpec::identity(base).with_dropped(vec![1])));
    let path = write_config(tmp.path(), &cfg);
    let o = synthgap(&["gen-data", "--config", &path, "--out", "d"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let pool = Dataset::read_jsonl(&tmp.path().join("d/synth_pool.jsonl")).unwrap();
    let hist = pool.style_histogram();
    assert_eq!(hist.get(&1).copied().unwrap_or(0), 0);
    assert!(hist.values().sum::<usize>() == 120);
}

#[test]
fn curate_zero_is_empty_and_succeeds() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = small_config();
    cfg.sizes.curated_n = 0;
    let path = write_config(tmp.path(), &cfg);
    let o = synthgap(&["curate", "--config", &path, "--out", "c"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(tmp.path().join("c/curated.jsonl")).unwrap(), "");
    assert!(tmp.path().join("c/curation_report.json").is_file());
    assert!(tmp.path().join("c/discriminator.json").is_file());
}

#[test]
fn run_is_deterministic_and_report_reads_it() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = small_config();
    cfg.conditions = vec![Condition::Real, Condition::RealSyntPlus];
    cfg.ablation_grid = false;
    let path = write_config(tmp.path(), &cfg);
    let mut csvs = Vec::new();
    for out in ["r1", "r2"] {
        let o = synthgap(&["run", "--config", &path, "--out", out, "--jobs", "1"], tmp.path());
        assert!(o.status.success(), "{}", stderr(&o));
        let root = tmp.path().join(out);
        let run = std::fs::read_dir(&root).unwrap().next().unwrap().unwrap().path();
        csvs.push(std::fs::read(run.join(RESULTS_CSV)).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    let o = synthgap(&["report", "--out", "r1"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("real+synt++"), "{text}");
}

#[test]
fn train_recognizer_single_condition() {
    let tmp = TempDir::new().unwrap();
    let path = write_config(tmp.path(), &small_config());
    let o = synthgap(&["train-recognizer", "--config", &path, "--out", "t", "--condition", "real"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("t/real.ckpt.json").is_file());
    let o = synthgap(&["train-recognizer", "--config", &path, "--out", "t", "--condition", "nope"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    let o = synthgap(&["report", "--out", "."], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("results.json"), "{}", stderr(&o));

    std::fs::write(tmp.path().join("bad.json"), "{\"schema\": \"experiment/1\", \"bogus\": 1}").unwrap();
    let o = synthgap(&["gen-data", "--config", "bad.json"], tmp.path());
    assert_eq!(o.status.code(), Some(2));

    let o = synthgap(&["gen-data", "--config", "missing.json"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing.json"));

    let o = synthgap(&["no-such-command"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn selftest_passes() {
    let tmp = TempDir::new().unwrap();
    let o = synthgap(&["selftest"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 7);
}
