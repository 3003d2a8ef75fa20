//! Sample means with standard errors.

use serde::{Deserialize, Serialize};

/// A Monte Carlo mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub value: f64,
    pub std_error: f64,
}

impl MonteCarloEstimate {
    /// `|value - expected| / std_error` (infinite when the error is zero and
    /// the values differ).
    pub fn z_score(&self, expected: f64) -> f64 {
        let d = (self.value - expected).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }

    pub fn within(&self, expected: f64, sigmas: f64) -> bool {
        (self.value - expected).abs() <= sigmas * self.std_error
    }
}

/// Mean of `f` over the values, with the sample standard error.
pub fn mean_and_se<F: Fn(f64) -> f64>(values: &[f64], f: F) -> MonteCarloEstimate {
    let n = values.len();
    if n == 0 {
        return MonteCarloEstimate { value: f64::NAN, std_error: f64::NAN };
    }
    // Welford keeps the variance accurate for large n.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in values.iter().enumerate() {
        let y = f(x);
        let delta = y - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (y - mean);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    MonteCarloEstimate { value: mean, std_error: (var / n as f64).sqrt() }
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 {
        return f64::NAN;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for i in 0..n {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    sxy / sxx
}
