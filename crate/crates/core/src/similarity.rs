//! Dynamic time warping and its length-normalized form.
//!
//! DTW is not a metric (no triangle inequality); nothing in this crate
//! relies on one.

use crate::model::GeoPoint;

/// Rows up to this length are kept on the stack.
const STACK_ROW: usize = 32;

#[inline]
pub fn euclidean(a: GeoPoint, b: GeoPoint) -> f64 {
    let (dx, dy) = (a.x - b.x, a.y - b.y);
    (dx * dx + dy * dy).sqrt()
}

/// DTW cost with Euclidean point distance.
///
/// Handles sequences of different lengths. Panics if either is empty.
pub fn dtw(t: &[GeoPoint], q: &[GeoPoint]) -> f64 {
    assert!(!t.is_empty() && !q.is_empty(), "dtw of an empty sequence");
    if q.len() <= STACK_ROW {
        let mut prev = [0.0f64; STACK_ROW];
        let mut cur = [0.0f64; STACK_ROW];
        dtw_rows(t, q, &mut prev[..q.len()], &mut cur[..q.len()])
    } else {
        let mut prev = vec![0.0; q.len()];
        let mut cur = vec![0.0; q.len()];
        dtw_rows(t, q, &mut prev, &mut cur)
    }
}

fn dtw_rows<'a>(t: &[GeoPoint], q: &[GeoPoint], mut prev: &'a mut [f64], mut cur: &'a mut [f64]) -> f64 {
    // first row: t[0] aligned with q[0..=j]
    let mut acc = 0.0;
    for (j, &qj) in q.iter().enumerate() {
        acc += euclidean(t[0], qj);
        prev[j] = acc;
    }
    for &ti in &t[1..] {
        cur[0] = prev[0] + euclidean(ti, q[0]);
        for j in 1..q.len() {
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            cur[j] = euclidean(ti, q[j]) + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[q.len() - 1]
}

/// Sum of consecutive segment lengths.
pub fn path_length(t: &[GeoPoint]) -> f64 {
    t.windows(2).map(|w| euclidean(w[0], w[1])).sum()
}

/// `dtw(t, q) / (sqrt(len(t)) * sqrt(len(q)))`.
///
/// Returns `+inf` when either sequence has zero path length.
pub fn ndtw(t: &[GeoPoint], q: &[GeoPoint]) -> f64 {
    ndtw_with_norms(t, path_length(t).sqrt(), q, path_length(q).sqrt())
}

/// [`ndtw`] with precomputed square-rooted path lengths.
#[inline]
pub fn ndtw_with_norms(t: &[GeoPoint], t_norm: f64, q: &[GeoPoint], q_norm: f64) -> f64 {
    if t_norm == 0.0 || q_norm == 0.0 {
        return f64::INFINITY;
    }
    dtw(t, q) / (t_norm * q_norm)
}
