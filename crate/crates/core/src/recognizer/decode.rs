use super::ctc::FramePosteriors;

/// Best-path decoding: per-frame argmax (lowest index wins ties), collapse
/// adjacent repeats, drop blanks.
pub fn greedy_decode(post: &FramePosteriors) -> Vec<usize> {
    let blank = post.blank();
    let mut out = Vec::new();
    let mut prev: Option<usize> = None;
    for row in post.log_probs().iter_rows() {
        let mut best = 0;
        for (k, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = k;
            }
        }
        if Some(best) != prev && best != blank {
            out.push(best);
        }
        prev = Some(best);
    }
    out
}
