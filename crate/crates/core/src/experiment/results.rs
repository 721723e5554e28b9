use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Arm;
use super::pipeline::SeedResult;
use crate::error::{Error, Result};
use crate::metrics::{mean_std, percent, sig6};
use crate::recognizer::Task;

pub const RESULTS_SCHEMA: &str = "results/1";
pub const RESULTS_JSON: &str = "results.json";
pub const RESULTS_CSV: &str = "results.csv";
pub const SEEDS_CSV: &str = "seeds.csv";

/// Seed-wise aggregate of one table row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub mean: f64,
    /// Sample standard deviation over seeds.
    pub std: f64,
    pub n: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Results {
    pub schema: String,
    pub config_hash: String,
    pub task: Task,
    pub metric: String,
    pub rows: Vec<Row>,
    pub runs: Vec<SeedResult>,
    /// False when any arm failed; the table is then partial.
    pub complete: bool,
}

impl Results {
    pub fn collect(config_hash: String, task: Task, arms: &[Arm], runs: Vec<SeedResult>) -> Self {
        let rows = arms
            .iter()
            .map(|arm| {
                let cells: Vec<_> = runs.iter().filter_map(|r| r.arms.iter().find(|a| a.name == arm.name)).collect();
                let values: Vec<f64> = cells.iter().filter_map(|c| c.metric).collect();
                let ms = mean_std(&values);
                Row {
                    name: arm.name.clone(),
                    mean: ms.mean,
                    std: ms.std,
                    n: ms.n,
                    failures: cells.len() - values.len(),
                }
            })
            .collect();
        let complete = !runs.iter().any(SeedResult::failed);
        Results {
            schema: RESULTS_SCHEMA.into(),
            config_hash,
            task,
            metric: match task {
                Task::Keyword => "avg_far".into(),
                Task::Sequence => "wer".into(),
            },
            rows,
            runs,
            complete,
        }
    }

    pub fn row(&self, name: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Aggregate table; numbers at six significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = format!("# config_hash={}\ncondition,metric,mean,std,n,failures\n", self.config_hash);
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{},{}", r.name, self.metric, sig6(r.mean), sig6(r.std), r.n, r.failures);
        }
        s
    }

    /// One line per (seed, row).
    pub fn seeds_csv(&self) -> String {
        let mut s = format!("# config_hash={}\nseed,condition,metric,value,status\n", self.config_hash);
        for run in &self.runs {
            for a in &run.arms {
                let (value, status) = match a.metric {
                    Some(v) => (sig6(v), "ok"),
                    None => (String::new(), "failed"),
                };
                let _ = writeln!(s, "{},{},{},{},{}", run.seed, a.name, self.metric, value, status);
            }
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        super::write_json(&dir.join(RESULTS_JSON), self)?;
        for (name, text) in [(RESULTS_CSV, self.to_csv()), (SEEDS_CSV, self.seeds_csv())] {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }

    /// Loads a run directory, refusing files whose config hashes disagree.
    pub fn load(dir: &Path) -> Result<Self> {
        let json = dir.join(RESULTS_JSON);
        if !json.is_file() {
            return Err(Error::Config(format!(
                "{} has no {RESULTS_JSON}; expected {RESULTS_JSON}, {RESULTS_CSV} and {SEEDS_CSV} as written by `run`",
                dir.display()
            )));
        }
        let text = std::fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
        let res: Results = serde_json::from_str(&text).map_err(|e| Error::json(&json, e))?;
        for name in [RESULTS_CSV, SEEDS_CSV] {
            let p = dir.join(name);
            if let Ok(csv) = std::fs::read_to_string(&p) {
                let hash = csv.lines().next().and_then(|l| l.strip_prefix("# config_hash="));
                if hash != Some(res.config_hash.as_str()) {
                    return Err(Error::Config(format!(
                        "{} belongs to a different configuration than {}",
                        p.display(),
                        json.display()
                    )));
                }
            }
        }
        Ok(res)
    }

    /// Rows whose technique-enabled variant did worse than its baseline.
    pub fn regressions(&self) -> Vec<(String, String)> {
        const PAIRS: [(&str, &str); 5] = [
            ("synt++", "synt"),
            ("real+synt++", "real+synt"),
            ("+rejection", "baseline"),
            ("+dbl_bn", "baseline"),
            ("+both", "baseline"),
        ];
        PAIRS
            .iter()
            .filter_map(|&(better, base)| {
                let (a, b) = (self.row(better)?, self.row(base)?);
                (a.mean > b.mean).then(|| (better.to_string(), base.to_string()))
            })
            .collect()
    }

    /// Aligned text table, values in percent with one decimal.
    pub fn render(&self) -> String {
        let header = format!("{} (%), mean ± std over seeds", self.metric);
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(9);
        let mut s = String::new();
        let _ = writeln!(s, "config {}", &self.config_hash[..self.config_hash.len().min(12)]);
        let _ = writeln!(s, "{:<width$}  {header}", "condition");
        let regress = self.regressions();
        for r in &self.rows {
            let flag = regress
                .iter()
                .find(|(a, _)| *a == r.name)
                .map(|(_, b)| format!("  <- worse than {b}"))
                .unwrap_or_default();
            let failures = if r.failures > 0 {
                format!("  ({} failed)", r.failures)
            } else {
                String::new()
            };
            let _ = writeln!(
                s,
                "{:<width$}  {:>5} ± {:<5} (n={}){failures}{flag}",
                r.name,
                percent(r.mean),
                percent(r.std),
                r.n
            );
        }
        if !self.complete {
            let _ = writeln!(s, "partial results: some runs failed");
        }
        s
    }
}
