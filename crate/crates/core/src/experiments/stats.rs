//! Order-stable sample statistics. Sums are pairwise over the input order, so
//! results depend only on the values and their order.

use statrs::distribution::{ContinuousCDF, Normal};

/// Pairwise sum; blocks of eight are summed left to right.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 8 {
        return x.iter().sum();
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

pub fn mean(x: &[f64]) -> f64 {
    pairwise_sum(x) / x.len() as f64
}

/// Sample standard deviation with `n - 1` in the denominator.
pub fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    let sq: Vec<f64> = x.iter().map(|v| (v - m) * (v - m)).collect();
    (pairwise_sum(&sq) / (x.len() - 1) as f64).sqrt()
}

/// Middle order statistic for odd counts, midpoint of the two middle ones
/// for even counts.
pub fn median(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut v = x.to_vec();
    let n = v.len();
    let (_, hi, _) = v.select_nth_unstable_by(n / 2, f64::total_cmp);
    let hi = *hi;
    if n % 2 == 1 {
        hi
    } else {
        let lo = v[..n / 2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// Moment skewness `m3/m2^{3/2}` and excess kurtosis `m4/m2² - 3`.
pub fn skew_kurtosis(x: &[f64]) -> (f64, f64) {
    let m = mean(x);
    let d2: Vec<f64> = x.iter().map(|v| (v - m).powi(2)).collect();
    let d3: Vec<f64> = x.iter().map(|v| (v - m).powi(3)).collect();
    let d4: Vec<f64> = x.iter().map(|v| (v - m).powi(4)).collect();
    let m2 = mean(&d2);
    (mean(&d3) / m2.powf(1.5), mean(&d4) / (m2 * m2) - 3.0)
}

/// One-sample Kolmogorov-Smirnov distance to the standard normal.
pub fn ks_standard_normal(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let phi = Normal::standard();
    v.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let f = phi.cdf(xi);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn median_conventions() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn moments_of_small_sample() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&x), 2.5);
        assert!((std_dev(&x) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let (s, k) = skew_kurtosis(&x);
        assert!(s.abs() < 1e-15);
        // m4/m2² = 2.5625/1.5625
        assert!((k - (2.5625 / 1.5625 - 3.0)).abs() < 1e-12);
    }

    #[test]
    fn ks_on_normal_draws_and_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert!(ks_standard_normal(&x) < 0.02);
        let c = vec![0.0; 100];
        assert!((ks_standard_normal(&c) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pairwise_matches_naive_for_integers() {
        let x: Vec<f64> = (0..1001).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&x), 500_500.0);
    }
}
