//! Roulette-wheel selection over positive weights.

use rand::Rng;

/// Picks an index with probability `weights[i] / sum(weights)`.
///
/// Returns `None` when the slice is empty or the total weight is not a
/// positive finite number.
pub fn select<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || !(total.is_finite() && total > 0.0) {
        return None;
    }
    let mut r = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if r < w {
            return Some(i);
        }
        r -= w;
    }
    // Rounding can leave a sliver past the last bucket; give it to the last
    // positive weight.
    weights.iter().rposition(|&w| w > 0.0)
}

/// Exact selection probabilities for `weights`.
pub fn probabilities(weights: &[f64]) -> alloc::vec::Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}
