use crate::error::{Error, Result};

/// Fixed rectangular binning of the plane; points outside fall into an
/// overflow cell so that histograms still sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid2d {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub bins: usize,
}

impl Grid2d {
    pub fn new(lo: [f64; 2], hi: [f64; 2], bins: usize) -> Self {
        Grid2d { lo, hi, bins }
    }

    pub fn cells(&self) -> usize {
        self.bins * self.bins + 1
    }

    pub fn overflow(&self) -> usize {
        self.bins * self.bins
    }

    pub fn cell_of(&self, p: &[f64]) -> usize {
        let mut idx = [0usize; 2];
        for k in 0..2 {
            let u = (p[k] - self.lo[k]) / (self.hi[k] - self.lo[k]);
            if !(0.0..1.0).contains(&u) {
                return self.overflow();
            }
            idx[k] = ((u * self.bins as f64) as usize).min(self.bins - 1);
        }
        idx[0] * self.bins + idx[1]
    }

    /// Edges of bin `i` along axis `k`.
    pub fn edges(&self, k: usize, i: usize) -> (f64, f64) {
        let w = (self.hi[k] - self.lo[k]) / self.bins as f64;
        (self.lo[k] + w * i as f64, self.lo[k] + w * (i + 1) as f64)
    }

    /// Normalized histogram of 2-D points.
    pub fn histogram<'a>(&self, points: impl IntoIterator<Item = &'a [f64]>) -> Result<Vec<f64>> {
        let mut h = vec![0.0; self.cells()];
        let mut n = 0usize;
        for p in points {
            if p.len() != 2 {
                return Err(Error::Contract(format!("expected 2-D point, got {}", p.len())));
            }
            h[self.cell_of(p)] += 1.0;
            n += 1;
        }
        if n == 0 {
            return Err(Error::Contract("histogram of zero points".into()));
        }
        h.iter_mut().for_each(|v| *v /= n as f64);
        Ok(h)
    }
}

/// Half the L1 distance between two probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
