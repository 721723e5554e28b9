//! The JSON files under `configs/` are the default experiments. Run with
//! `UPDATE_CONFIGS=1` to rewrite them after changing a default.

use std::path::PathBuf;

use synthgap::experiment::ExperimentConfig;

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn check(name: &str, default: ExperimentConfig) {
    let path = config_path(name);
    let text = serde_json::to_string_pretty(&default).unwrap() + "\n";
    if std::env::var_os("UPDATE_CONFIGS").is_some() {
        std::fs::write(&path, &text).unwrap();
    }
    let on_disk = std::fs::read_to_string(&path).unwrap();
    assert_eq!(on_disk, text, "{name} is out of date; rerun with UPDATE_CONFIGS=1");
    let loaded = ExperimentConfig::load(&path).unwrap();
    assert_eq!(loaded.config, default);
}

#[test]
fn keyword_config_matches_default() {
    check("keyword.json", ExperimentConfig::default_keyword());
}

#[test]
fn sequence_config_matches_default() {
    check("sequence.json", ExperimentConfig::default_sequence());
}
