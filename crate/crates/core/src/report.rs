//! Monte Carlo estimator reports and order-deterministic reductions.

use serde::Serialize;

/// Result of one Monte Carlo estimation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MCReport {
    pub estimate: f64,
    /// Sample standard deviation divided by sqrt(n_samples).
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl MCReport {
    /// Computes mean and standard error with pairwise sums, so the result
    /// does not depend on how the samples were produced across workers.
    pub fn from_samples(samples: &[f64], seed: u64) -> Self {
        assert!(!samples.is_empty(), "estimator needs at least one sample");
        let n = samples.len();
        let mean = pairwise_sum(samples) / n as f64;
        let std_error = if n < 2 {
            0.0
        } else {
            let sq: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
            let var = pairwise_sum(&sq) / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        MCReport {
            estimate: mean,
            std_error,
            n_samples: n,
            seed,
        }
    }
}

/// Sum with a fixed pairwise association order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 64 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
