//! Small statistical helpers shared by the Monte-Carlo routines.

use serde::{Deserialize, Serialize};

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub value: f64,
    /// Sample standard deviation divided by `sqrt(n_samples)`.
    pub std_error: f64,
    pub n_samples: usize,
}

impl EstimateWithError {
    /// Sample mean of `xs` with its standard error.
    pub fn mean_of(xs: &[f64]) -> Self {
        let m = SampleMoments::from_slice(xs);
        Self {
            value: m.mean,
            std_error: m.std_error_of_mean(),
            n_samples: m.n,
        }
    }

    /// Whether `target` lies within `k` standard errors of the estimate.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }
}

/// Central sample moments up to order four (two-pass).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMoments {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Fourth central moment (biased, 1/n normalisation).
    pub m4: f64,
}

impl SampleMoments {
    pub fn from_slice(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { n, mean: f64::NAN, variance: f64::NAN, m4: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let (mut s2, mut s4) = (0.0, 0.0);
        for &x in xs {
            let d = x - mean;
            let d2 = d * d;
            s2 += d2;
            s4 += d2 * d2;
        }
        let variance = if n > 1 { s2 / (n - 1) as f64 } else { 0.0 };
        Self { n, mean, variance, m4: s4 / n as f64 }
    }

    pub fn std_error_of_mean(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        (self.variance / self.n as f64).sqrt()
    }

    /// Large-sample standard error of the sample variance,
    /// `sqrt((m4 - sigma^4) / n)`.
    pub fn std_error_of_variance(&self) -> f64 {
        let m2 = self.variance * (self.n.saturating_sub(1)) as f64 / self.n as f64;
        ((self.m4 - m2 * m2).max(0.0) / self.n as f64).sqrt()
    }
}

/// Least-squares fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    LinearFit { slope, intercept, r2 }
}
