//! Means, variances and batch-means standard errors.

use crate::prelude::*;
use serde::{Deserialize, Serialize};

/// Default number of batches for batch-means standard errors.
pub const DEFAULT_BATCHES: usize = 32;

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn new(value: f64, se: f64) -> Self {
        Self { value, se }
    }

    /// Standard error of the difference of two independent estimates.
    pub fn combined_se(&self, other: &Estimate) -> f64 {
        (self.se * self.se + other.se * other.se).sqrt()
    }

    /// `|value - target| <= k * se`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.se
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Mean with the i.i.d. standard error `sd / sqrt(n)`.
pub fn iid_estimate(xs: &[f64]) -> Estimate {
    Estimate::new(mean(xs), (variance(xs) / xs.len() as f64).sqrt())
}

/// Mean of a serially correlated series with a batch-means standard error.
///
/// The series is cut into `batches` contiguous batches of equal length (a
/// remainder at the end is dropped from the SE but kept in the mean). With
/// fewer observations than batches the i.i.d. formula is used.
pub fn batch_means(xs: &[f64], batches: usize) -> Estimate {
    let n = xs.len();
    let batches = batches.max(2);
    if n < 2 * batches {
        return iid_estimate(xs);
    }
    let len = n / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| mean(&xs[b * len..(b + 1) * len]))
        .collect();
    Estimate::new(mean(xs), (variance(&means) / batches as f64).sqrt())
}

/// Batch-means estimate with [`DEFAULT_BATCHES`] batches.
pub fn batch_estimate(xs: &[f64]) -> Estimate {
    batch_means(xs, DEFAULT_BATCHES)
}

/// Index-ordered `log(sum(exp(xs)))`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variance_of_small_sample() {
        assert!((variance(&[1.0, 2.0, 3.0, 4.0]) - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn batch_means_of_iid_noise_matches_iid_se() {
        use rand::Rng;
        let mut rng = crate::rng::stream(1, 0);
        let xs: Vec<f64> = (0..64_000).map(|_| rng.random::<f64>()).collect();
        let iid = iid_estimate(&xs);
        let bm = batch_estimate(&xs);
        assert!((bm.value - iid.value).abs() < 1e-15);
        assert!((bm.se / iid.se - 1.0).abs() < 0.5);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }
}
