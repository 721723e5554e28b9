use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Real,
    Synthetic,
}

/// One (features, tokens) pair. `features` holds `T = F * |tokens|` frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: u64,
    pub features: Vec<Vec<f64>>,
    pub tokens: Vec<usize>,
    pub origin: Origin,
    pub style_id: u32,
}

impl Sample {
    pub fn num_frames(&self) -> usize {
        self.features.len()
    }

    /// Average frame; the summary used by the keyword model and histograms.
    pub fn mean_frame(&self) -> Vec<f64> {
        let dim = self.features.first().map_or(0, Vec::len);
        let mut acc = vec![0.0; dim];
        for f in &self.features {
            for (a, v) in acc.iter_mut().zip(f) {
                *a += v;
            }
        }
        let n = self.features.len().max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Self {
        Dataset { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sample> {
        self.samples.iter()
    }

    pub fn style_histogram(&self) -> BTreeMap<u32, usize> {
        let mut h = BTreeMap::new();
        for s in &self.samples {
            *h.entry(s.style_id).or_insert(0) += 1;
        }
        h
    }

    pub fn to_jsonl(&self) -> String {
        write_jsonl_string(&self.samples)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        write_jsonl(path, &self.samples)
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        Ok(Dataset::new(read_jsonl(path)?))
    }
}

impl From<Vec<Sample>> for Dataset {
    fn from(samples: Vec<Sample>) -> Self {
        Dataset::new(samples)
    }
}

impl std::ops::Deref for Dataset {
    type Target = [Sample];

    fn deref(&self) -> &[Sample] {
        &self.samples
    }
}

pub fn write_jsonl_string<T: Serialize>(rows: &[T]) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("rows serialise"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in rows {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::json(path, e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::json(path, e))?);
    }
    Ok(out)
}
