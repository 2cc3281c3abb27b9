//! Dense convolution helpers shared by the resolvent, Riccati and Euler
//! recursions. All of them reduce to dot products of a history slice against
//! a reversed weight vector.

/// `Σ a[i]·b[i]` over the common length, eight lanes wide.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let chunks = n / 8;
    for c in 0..chunks {
        let i = c * 8;
        for l in 0..8 {
            acc[l] += a[i + l] * b[i + l];
        }
    }
    let mut tail = 0.0;
    for i in chunks * 8..n {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Weights stored back to front so that `Σ_{j<i} w[i-j]·x[j]` is a
/// contiguous dot product.
#[derive(Clone, Debug)]
pub struct ReversedWeights {
    rev: Vec<f64>,
}

impl ReversedWeights {
    pub fn new(w: &[f64]) -> Self {
        Self {
            rev: w.iter().rev().copied().collect(),
        }
    }

    /// `Σ_{j=0}^{i-1} w[i-j]·x[j]`; needs `i < w.len()` and `x.len() ≥ i`.
    #[inline]
    pub fn lagged(&self, x: &[f64], i: usize) -> f64 {
        let n = self.rev.len();
        dot(&x[..i], &self.rev[n - 1 - i..n - 1])
    }

    /// `Σ_{j=0}^{i} w[i-j+1]·x[j]`, the sum used by explicit schemes where the
    /// newest history entry already sits at lag one.
    #[inline]
    pub fn lagged_from_one(&self, x: &[f64], i: usize) -> f64 {
        let n = self.rev.len();
        dot(&x[..=i], &self.rev[n - i - 2..n - 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lagged_sums_match_naive_loops() {
        let w: Vec<f64> = (0..23).map(|d| 1.0 / (1.0 + d as f64)).collect();
        let x: Vec<f64> = (0..23).map(|j| (j as f64 * 0.7).sin()).collect();
        let r = ReversedWeights::new(&w);
        for i in 0..22 {
            let naive: f64 = (0..i).map(|j| w[i - j] * x[j]).sum();
            assert!((r.lagged(&x, i) - naive).abs() < 1e-12);
            let naive1: f64 = (0..=i).map(|j| w[i - j + 1] * x[j]).sum();
            assert!((r.lagged_from_one(&x, i) - naive1).abs() < 1e-12);
        }
    }
}
