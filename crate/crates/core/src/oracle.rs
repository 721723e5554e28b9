//! Independent reference computations used by tests and `selftest`.
//!
//! Nothing here shares code with the paths it checks: finite differences
//! instead of backprop, exhaustive path enumeration instead of the CTC
//! recursion, naive recursion instead of the edit-distance table.

use std::collections::HashMap;

use crate::linalg::Matrix;

/// Central-difference gradient of `f` at `x`.
pub fn numeric_gradient<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest `|a - b| / max(|a|, |b|, 1e-5)` over paired entries. The floor
/// keeps gradients that are analytically zero from dividing by round-off.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-5))
        .fold(0.0, f64::max)
}

/// Collapse repeats then drop blanks.
fn collapse(path: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &p in path {
        if Some(p) != prev && p != blank {
            out.push(p);
        }
        prev = Some(p);
    }
    out
}

/// `P(y | posteriors)` by summing the probability of every frame-level path
/// that collapses to `y`. Exponential in `T`; meant for `T <= 8`.
pub fn brute_force_ctc_probability(log_probs: &Matrix, y: &[usize], blank: usize) -> f64 {
    let (t_len, classes) = (log_probs.rows(), log_probs.cols());
    let mut path = vec![0usize; t_len];
    let mut total = 0.0;
    loop {
        if collapse(&path, blank) == y {
            total += path
                .iter()
                .enumerate()
                .map(|(t, &k)| log_probs.get(t, k))
                .sum::<f64>()
                .exp();
        }
        // odometer increment
        let mut i = 0;
        loop {
            if i == t_len {
                return total;
            }
            path[i] += 1;
            if path[i] < classes {
                break;
            }
            path[i] = 0;
            i += 1;
        }
    }
}

/// Unit-cost edit distance by memoised recursion over suffixes.
pub fn naive_edit_distance(a: &[usize], b: &[usize]) -> usize {
    fn go(a: &[usize], b: &[usize], memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if a.is_empty() {
            return b.len();
        }
        if b.is_empty() {
            return a.len();
        }
        if let Some(&v) = memo.get(&(a.len(), b.len())) {
            return v;
        }
        let sub = go(&a[1..], &b[1..], memo) + usize::from(a[0] != b[0]);
        let del = go(&a[1..], b, memo) + 1;
        let ins = go(a, &b[1..], memo) + 1;
        let v = sub.min(del).min(ins);
        memo.insert((a.len(), b.len()), v);
        v
    }
    go(a, b, &mut HashMap::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_gradient_of_quadratic() {
        let g = numeric_gradient(|x| x[0] * x[0] + 3.0 * x[1], &[2.0, -1.0], 1e-5);
        assert!((g[0] - 4.0).abs() < 1e-8 && (g[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn brute_force_sums_to_one_over_all_labels() {
        // uniform posteriors over 2 tokens + blank, T = 3
        let lp = Matrix::filled(3, 3, (1.0f64 / 3.0).ln());
        let mut labels: Vec<Vec<usize>> = vec![vec![]];
        for a in 0..2 {
            labels.push(vec![a]);
            for b in 0..2 {
                labels.push(vec![a, b]);
                for c in 0..2 {
                    labels.push(vec![a, b, c]);
                }
            }
        }
        let total: f64 = labels.iter().map(|y| brute_force_ctc_probability(&lp, y, 2)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn naive_edit_distance_basics() {
        assert_eq!(naive_edit_distance(&[1, 2, 3], &[1, 2, 3]), 0);
        assert_eq!(naive_edit_distance(&[1, 2, 3], &[]), 3);
        assert_eq!(naive_edit_distance(&[1, 2, 3], &[2, 3, 4]), 2);
    }
}
