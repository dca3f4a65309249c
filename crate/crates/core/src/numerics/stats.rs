//! Compensated summation, Monte Carlo estimates and least-squares lines.

use serde::{Deserialize, Serialize};

/// Kahan–Babuška–Neumaier running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn sum(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().collect::<NeumaierSum>().sum()
}

/// Sample mean of a statistic with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    /// Unbiased sample variance of the statistic.
    pub variance: f64,
    /// `sqrt(variance / n_paths)`.
    pub std_error: f64,
    pub n_paths: usize,
}

impl McEstimate {
    /// Panics on fewer than two samples.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        assert!(n >= 2, "a Monte Carlo estimate needs at least two samples");
        let mean = compensated_sum(xs.iter().copied()) / n as f64;
        let ss = compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean)));
        let variance = ss / (n as f64 - 1.0);
        Self {
            mean,
            variance,
            std_error: (variance / n as f64).sqrt(),
            n_paths: n,
        }
    }

    /// `(mean - target) / std_error`; zero when both the error and the
    /// discrepancy vanish.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = self.mean - target;
        if self.std_error == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY * diff.signum()
            }
        } else {
            diff / self.std_error
        }
    }
}

/// Standardized third and fourth central moments `(skewness, excess kurtosis)`.
pub fn skewness_kurtosis(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = compensated_sum(xs.iter().copied()) / n;
    let m2 = compensated_sum(xs.iter().map(|x| (x - mean).powi(2))) / n;
    let m3 = compensated_sum(xs.iter().map(|x| (x - mean).powi(3))) / n;
    let m4 = compensated_sum(xs.iter().map(|x| (x - mean).powi(4))) / n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// Ordinary least squares line `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
    pub r_squared: f64,
}

/// Returns `None` for fewer than two points or constant `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let slope_std_error = if n > 2 {
        (sse / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Some(LinearFit {
        slope,
        intercept,
        slope_std_error,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let s = compensated_sum([1.0, 1e100, 1.0, -1e100]);
        assert_eq!(s, 2.0);
    }

    #[test]
    fn estimate_of_constant_has_zero_error() {
        let e = McEstimate::from_samples(&[3.0; 10]);
        assert_eq!(e.mean, 3.0);
        assert_eq!(e.std_error, 0.0);
        assert_eq!(e.z_score(3.0), 0.0);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14);
        assert!((f.intercept - 2.0).abs() < 1e-14);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_none());
        assert!(linear_fit(&[1.0], &[0.0]).is_none());
    }
}
