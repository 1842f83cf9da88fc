//! Deterministic ranking: higher score first, ties by ascending index.

use std::cmp::Ordering;

/// Total order used by every recommender: `a` ranks before `b` when its
/// score is larger, or equal with a smaller index.
#[inline]
pub fn rank_order(scores: &[f64], a: usize, b: usize) -> Ordering {
    rank_order_values(scores[a], a, scores[b], b)
}

/// [`rank_order`] on explicit (score, index) pairs.
#[inline]
pub fn rank_order_values(sa: f64, a: usize, sb: f64, b: usize) -> Ordering {
    match sb.partial_cmp(&sa) {
        Some(Ordering::Equal) | None => {
            if sa == sb {
                a.cmp(&b)
            } else {
                sb.total_cmp(&sa).then(a.cmp(&b))
            }
        }
        Some(o) => o,
    }
}

/// Indices of the `k` best scores in rank order.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let k = k.min(scores.len());
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    if k == 0 {
        return Vec::new();
    }
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, |&a, &b| rank_order(scores, a, b));
        idx.truncate(k);
    }
    idx.sort_unstable_by(|&a, &b| rank_order(scores, a, b));
    idx
}
