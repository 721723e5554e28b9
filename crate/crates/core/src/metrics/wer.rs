use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Edit counts of a minimal alignment of `hyp` against `ref`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WerBreakdown {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub ref_len: usize,
    pub wer: f64,
}

impl WerBreakdown {
    pub fn edits(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// Pools counts; the result's `wer` is the corpus-level rate.
    pub fn merge(&self, other: &WerBreakdown) -> WerBreakdown {
        let mut out = WerBreakdown {
            substitutions: self.substitutions + other.substitutions,
            deletions: self.deletions + other.deletions,
            insertions: self.insertions + other.insertions,
            ref_len: self.ref_len + other.ref_len,
            wer: 0.0,
        };
        if out.ref_len > 0 {
            out.wer = out.edits() as f64 / out.ref_len as f64;
        }
        out
    }
}

/// Token error rate. Among minimal alignments the one with the fewest
/// insertions plus deletions is counted, which fixes all three counts and
/// makes them symmetric under swapping reference and hypothesis.
pub fn wer(reference: &[usize], hyp: &[usize]) -> Result<WerBreakdown> {
    if reference.is_empty() {
        return Err(Error::Contract("WER is undefined for an empty reference".into()));
    }
    let (n, m) = (reference.len(), hyp.len());
    // (edits, insertions + deletions), compared lexicographically
    let mut d = vec![vec![(0usize, 0usize); m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = (i, i);
    }
    for j in 0..=m {
        d[0][j] = (j, j);
    }
    for i in 1..=n {
        for j in 1..=m {
            let (e, k) = d[i - 1][j - 1];
            let sub = (e + usize::from(reference[i - 1] != hyp[j - 1]), k);
            let del = (d[i - 1][j].0 + 1, d[i - 1][j].1 + 1);
            let ins = (d[i][j - 1].0 + 1, d[i][j - 1].1 + 1);
            d[i][j] = sub.min(del).min(ins);
        }
    }
    let (edits, indels) = d[n][m];
    // insertions - deletions = m - n on every alignment
    let insertions = (indels + m - n) / 2;
    Ok(WerBreakdown {
        substitutions: edits - indels,
        deletions: indels - insertions,
        insertions,
        ref_len: n,
        wer: edits as f64 / n as f64,
    })
}

/// Corpus WER: total edits over total reference length.
pub fn corpus_wer<'a>(pairs: impl IntoIterator<Item = (&'a [usize], &'a [usize])>) -> Result<WerBreakdown> {
    let mut total = WerBreakdown::default();
    for (r, h) in pairs {
        total = total.merge(&wer(r, h)?);
    }
    if total.ref_len == 0 {
        return Err(Error::Contract("corpus WER over zero references".into()));
    }
    Ok(total)
}
