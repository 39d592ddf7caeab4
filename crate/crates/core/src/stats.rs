//! Reproducible summary statistics for Monte Carlo samples.

/// Pairwise (cascade) summation; the result depends only on the order of
/// `xs`, never on how the samples were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if xs.len() <= LEAF {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Sample mean and standard error of a Monte Carlo estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n_paths)`; NaN for a single path.
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl PathEstimate {
    pub fn from_samples(samples: &[f64], seed: u64) -> Self {
        let n = samples.len();
        assert!(n > 0, "at least one sample is required");
        // shift by the first sample so constant samples give an exact mean
        let origin = samples[0];
        let shifted: Vec<f64> = samples.iter().map(|x| x - origin).collect();
        let mean = origin + pairwise_sum(&shifted) / n as f64;
        let std_error = if n < 2 {
            f64::NAN
        } else {
            let dev: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
            (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
        };
        Self { mean, std_error, n_paths: n, seed }
    }

    /// `(value - mean) / std_error`.
    pub fn z_score(&self, value: f64) -> f64 {
        (value - self.mean) / self.std_error
    }

    /// Whether `value` lies within `k` standard errors of the mean. A
    /// zero-variance estimate only brackets values equal to its mean up to
    /// rounding.
    pub fn brackets(&self, value: f64, k: f64) -> bool {
        let gap = (value - self.mean).abs();
        if self.std_error == 0.0 {
            gap <= 1e-12 * value.abs().max(1.0)
        } else {
            gap <= k * self.std_error
        }
    }
}
