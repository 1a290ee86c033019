//! Reproducible summary statistics.

use alloc::vec::Vec;

/// Pairwise summation with a fixed split, so the result depends only on the
/// order of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; zero when `n < 2`.
    pub std_error: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return MeanEstimate {
                mean: f64::NAN,
                std_error: f64::NAN,
                n,
            };
        }
        let mean = pairwise_sum(values) / n as f64;
        if n < 2 {
            return MeanEstimate {
                mean,
                std_error: 0.0,
                n,
            };
        }
        let squares: Vec<f64> = values.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&squares) / (n - 1) as f64;
        MeanEstimate {
            mean,
            std_error: libm::sqrt(var / n as f64),
            n,
        }
    }

    /// `|mean - target| <= k * std_error`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }
}

/// `ln P(N = k)` for `N ~ Poisson(lambda)`.
pub fn ln_poisson_pmf(k: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * libm::log(lambda) - lambda - libm::lgamma(k as f64 + 1.0)
}
