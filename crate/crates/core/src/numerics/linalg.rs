//! Dense symmetric factorizations.

use crate::error::{Error, Result};

/// Lower Cholesky factor of a dense symmetric matrix, row-major.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
    /// Diagonal jitter that was added before the factorization succeeded.
    pub jitter: f64,
}

impl Cholesky {
    /// Factorizes `a` (row-major, `n × n`); on failure retries with diagonal
    /// jitter growing by decades from `1e-16·max_diag` up to
    /// `max_rel_jitter·max_diag`.
    pub fn factor_with_jitter(a: &[f64], n: usize, max_rel_jitter: f64) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let max_diag = (0..n).map(|i| a[i * n + i]).fold(0.0_f64, f64::max);
        let limit = max_rel_jitter * max_diag;
        let mut jitter = 0.0;
        loop {
            if let Some(lower) = try_factor(a, n, jitter) {
                return Ok(Self { n, lower, jitter });
            }
            jitter = if jitter == 0.0 { 1e-16 * max_diag } else { jitter * 10.0 };
            if jitter > limit || max_diag <= 0.0 {
                return Err(Error::NotPositiveDefinite { jitter, limit });
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.n + j]
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// `out = L z`.
    pub fn mul_lower(&self, z: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i + 1];
            out[i] = row.iter().zip(&z[..=i]).map(|(l, x)| l * x).sum();
        }
    }
}

fn try_factor(a: &[f64], n: usize, jitter: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j] + jitter;
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Some(l)
}
