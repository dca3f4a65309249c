//! Liouville fractional Brownian motion: covariance, exact and
//! moving-average samplers, and the classical fBm covariance used for
//! norm comparisons.
//!
//! `W^β(t) = Γ(β+½)^{-1} ∫_0^t (t-u)^{β-½} dB(u)`, so
//!
//! ```text
//! E W^β(s) W^β(t) = Γ(β+½)^{-2} ∫_0^{s∧t} (s-u)^{β-½} (t-u)^{β-½} du.
//! ```
//!
//! Ensembles are sampled on a [`TimeGrid`]; the process starts at the grid's
//! `t_start`, i.e. node `t_i` carries `W^β(t_i - t_start)`.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::numerics::linalg::Cholesky;
use crate::numerics::quadrature::{tanh_sinh, GaussLegendre};
use crate::numerics::stats::{compensated_sum, skewness_kurtosis};
use crate::numerics::gamma;
use crate::seed::{self, StreamRng};

/// Order `β ∈ (0, 1)` of a Liouville fBm (the Hurst parameter).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstOrder(f64);

impl HurstOrder {
    pub fn new(beta: f64) -> Result<Self> {
        if beta > 0.0 && beta < 1.0 {
            Ok(Self(beta))
        } else {
            Err(Error::param("beta", beta, "Hurst order must lie in (0, 1)"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_brownian(self) -> bool {
        self.0 == 0.5
    }

    /// Kernel exponent `β - ½`.
    pub fn kernel_exponent(self) -> f64 {
        self.0 - 0.5
    }

    /// `Γ(β + ½)`.
    pub fn kernel_gamma(self) -> f64 {
        gamma(self.0 + 0.5)
    }
}

impl TryFrom<f64> for HurstOrder {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<HurstOrder> for f64 {
    fn from(h: HurstOrder) -> f64 {
        h.0
    }
}

fn check_time(name: &'static str, t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, t, "time must be finite and >= 0"))
    }
}

/// `∫_0^1 y^γ (1+y)^γ dy`, cached per exponent bit pattern.
fn unit_overlap(gamma_exp: f64) -> f64 {
    static CACHE: OnceLock<std::sync::Mutex<Vec<(u64, f64)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| std::sync::Mutex::new(Vec::new()));
    let key = gamma_exp.to_bits();
    if let Some(&(_, v)) = cache.lock().unwrap().iter().find(|(k, _)| *k == key) {
        return v;
    }
    let v = tanh_sinh(0.0, 1.0, 1e-16, 1e-15, |_, u, _| {
        u.powf(gamma_exp) * (1.0 + u).powf(gamma_exp)
    })
    .value;
    let mut guard = cache.lock().unwrap();
    if guard.len() > 256 {
        guard.clear();
    }
    guard.push((key, v));
    v
}

fn gl20() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(20))
}

/// `∫_0^a v^γ (δ + v)^γ dv` for `a > 0`, `δ ≥ 0`, `γ > -½`.
///
/// Substituting `v = a x` leaves `a^{2γ+1} ∫_0^1 x^γ (r + x)^γ dx` with
/// `r = δ/a`. For `r < 1` the piece `(0, r)` is `r^{2γ+1}` times a constant
/// and `(r, 1)` is split geometrically so that the nearby singularity at
/// `x = -r` never sits closer than the piece length.
pub(crate) fn overlap_integral(a: f64, delta: f64, gamma_exp: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let r = delta / a;
    let p = 2.0 * gamma_exp + 1.0;
    let j = if r == 0.0 {
        1.0 / p
    } else if r >= 1.0 {
        tanh_sinh(0.0, 1.0, 1e-16, 1e-14, |_, u, _| {
            u.powf(gamma_exp) * (r + u).powf(gamma_exp)
        })
        .value
    } else {
        let mut total = r.powf(p) * unit_overlap(gamma_exp);
        let rule = gl20();
        let mut lo = r;
        while lo < 1.0 {
            let hi = (2.0 * lo).min(1.0);
            total += rule.integrate(lo, hi, |x| x.powf(gamma_exp) * (r + x).powf(gamma_exp));
            lo = hi;
        }
        total
    };
    a.powf(p) * j
}

/// Liouville fBm covariance `Γ^β_{s,t}` (origin at 0).
pub fn cov_liouville(s: f64, t: f64, beta: HurstOrder) -> Result<f64> {
    check_time("s", s)?;
    check_time("t", t)?;
    Ok(cov_liouville_unchecked(s, t, beta))
}

pub(crate) fn cov_liouville_unchecked(s: f64, t: f64, beta: HurstOrder) -> f64 {
    let lo = s.min(t);
    if lo <= 0.0 {
        return 0.0;
    }
    if beta.is_brownian() {
        return lo;
    }
    let g = beta.kernel_gamma();
    overlap_integral(lo, (t - s).abs(), beta.kernel_exponent()) / (g * g)
}

/// `Var W^β(t) = t^{2β} / (2β Γ(β+½)²)`.
pub fn variance_liouville(t: f64, beta: HurstOrder) -> f64 {
    let b = beta.value();
    let g = beta.kernel_gamma();
    t.powf(2.0 * b) / (2.0 * b * g * g)
}

/// Normalization of the classical fBm covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `s^{2β} + t^{2β} - |t-s|^{2β}`, so `Var W̃(1) = 2`.
    Unhalved,
    /// Half of [`Normalization::Unhalved`], so `Var W̃(1) = 1`.
    Conventional,
}

/// Classical (stationary-increment) fBm covariance.
pub fn cov_classical(s: f64, t: f64, beta: HurstOrder, normalization: Normalization) -> Result<f64> {
    check_time("s", s)?;
    check_time("t", t)?;
    Ok(cov_classical_unchecked(s, t, beta, normalization))
}

pub(crate) fn cov_classical_unchecked(s: f64, t: f64, beta: HurstOrder, normalization: Normalization) -> f64 {
    let h2 = 2.0 * beta.value();
    let v = s.powf(h2) + t.powf(h2) - (t - s).abs().powf(h2);
    match normalization {
        Normalization::Unhalved => v,
        Normalization::Conventional => 0.5 * v,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovKind {
    Liouville,
    Classical(Normalization),
}

/// Covariance of `(X(t_1), …, X(t_n))` over the grid's non-initial nodes.
#[derive(Debug, Clone, Serialize)]
pub struct CovMatrix {
    pub grid: TimeGrid,
    pub beta: HurstOrder,
    pub kind: CovKind,
    n: usize,
    entries: Vec<f64>,
}

impl CovMatrix {
    pub fn new(grid: TimeGrid, beta: HurstOrder, kind: CovKind) -> Self {
        let n = grid.n_cells();
        let t0 = grid.t_start();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let ti = grid.node(i + 1) - t0;
                (0..=i)
                    .map(|j| {
                        let tj = grid.node(j + 1) - t0;
                        match kind {
                            CovKind::Liouville => cov_liouville_unchecked(ti, tj, beta),
                            CovKind::Classical(norm) => cov_classical_unchecked(ti, tj, beta, norm),
                        }
                    })
                    .collect()
            })
            .collect();
        let mut entries = vec![0.0; n * n];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self {
            grid,
            beta,
            kind,
            n,
            entries,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Covariance between nodes `t_{i+1}` and `t_{j+1}`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn max_diagonal(&self) -> f64 {
        (0..self.n).map(|i| self.entry(i, i)).fold(0.0, f64::max)
    }

    /// Cholesky factor with jitter at most `1e-12·max_diag`.
    pub fn cholesky(&self) -> Result<Cholesky> {
        Cholesky::factor_with_jitter(&self.entries, self.n, 1e-12)
    }

    /// Node covariance with `t_0` included (row/column of zeros).
    pub fn node_entry(&self, i: usize, j: usize) -> f64 {
        if i == 0 || j == 0 {
            0.0
        } else {
            self.entry(i - 1, j - 1)
        }
    }

    /// Covariance matrix of the cell increments `X(t_{j+1}) - X(t_j)`.
    pub fn increment_covariance(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.node_entry(i + 1, j + 1) - self.node_entry(i, j + 1)
                    - self.node_entry(i + 1, j)
                    + self.node_entry(i, j);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Cholesky,
    MovingAverage,
}

/// `n_paths` sampled paths on all grid nodes, row-major
/// (`values[r·n_nodes + i]` is path `r` at `t_i`; column 0 is identically 0).
#[derive(Debug, Clone, Serialize)]
pub struct PathEnsemble {
    pub grid: TimeGrid,
    pub beta: HurstOrder,
    pub kind: CovKind,
    pub scheme: Scheme,
    pub master_seed: u64,
    pub n_paths: usize,
    values: Vec<f64>,
}

impl PathEnsemble {
    pub fn n_nodes(&self) -> usize {
        self.grid.n_nodes()
    }

    pub fn path(&self, r: usize) -> &[f64] {
        let m = self.n_nodes();
        &self.values[r * m..(r + 1) * m]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_nodes())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sample covariance (about zero mean) between nodes `i` and `j`.
    pub fn sample_second_moment(&self, i: usize, j: usize) -> f64 {
        compensated_sum(self.paths().map(|p| p[i] * p[j])) / self.n_paths as f64
    }

    /// Per-node statistics for reports.
    pub fn summary(&self) -> EnsembleSummary {
        let m = self.n_nodes();
        let mut mean = Vec::with_capacity(m);
        let mut variance = Vec::with_capacity(m);
        let mut skewness = Vec::with_capacity(m);
        let mut excess_kurtosis = Vec::with_capacity(m);
        let mut column = vec![0.0; self.n_paths];
        for i in 0..m {
            for (c, p) in column.iter_mut().zip(self.paths()) {
                *c = p[i];
            }
            let mu = compensated_sum(column.iter().copied()) / self.n_paths as f64;
            let var = compensated_sum(column.iter().map(|x| (x - mu) * (x - mu)))
                / (self.n_paths as f64 - 1.0).max(1.0);
            mean.push(mu);
            variance.push(var);
            if var > 0.0 {
                let (s, k) = skewness_kurtosis(&column);
                skewness.push(s);
                excess_kurtosis.push(k);
            } else {
                skewness.push(0.0);
                excess_kurtosis.push(0.0);
            }
        }
        EnsembleSummary {
            master_seed: self.master_seed,
            scheme: self.scheme,
            kind: self.kind,
            beta: self.beta.value(),
            grid: self.grid,
            n_paths: self.n_paths,
            times: self.grid.nodes(),
            mean,
            variance,
            skewness,
            excess_kurtosis,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleSummary {
    pub master_seed: u64,
    pub scheme: Scheme,
    pub kind: CovKind,
    pub beta: f64,
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub skewness: Vec<f64>,
    pub excess_kurtosis: Vec<f64>,
}

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths == 0 {
        Err(Error::param("n_paths", 0.0, "must be positive"))
    } else {
        Ok(())
    }
}

/// Per-replicate generator for scalar ensembles.
pub fn scalar_stream(master_seed: u64, replicate: usize) -> StreamRng {
    seed::stream_rng(seed::domain::SCALAR_PATH, master_seed, &[replicate as u64])
}

/// Exact Gaussian sampling from the node covariance.
pub fn sample_cholesky(
    grid: TimeGrid,
    beta: HurstOrder,
    kind: CovKind,
    n_paths: usize,
    master_seed: u64,
) -> Result<PathEnsemble> {
    sample_cholesky_with(grid, beta, kind, n_paths, master_seed, &|r| {
        scalar_stream(master_seed, r)
    })
}

pub(crate) fn sample_cholesky_with(
    grid: TimeGrid,
    beta: HurstOrder,
    kind: CovKind,
    n_paths: usize,
    master_seed: u64,
    stream: &(dyn Fn(usize) -> StreamRng + Sync),
) -> Result<PathEnsemble> {
    check_paths(n_paths)?;
    let chol = CovMatrix::new(grid, beta, kind).cholesky()?;
    let n = grid.n_cells();
    let m = n + 1;
    let mut values = vec![0.0; n_paths * m];
    values.par_chunks_mut(m).enumerate().for_each(|(r, row)| {
        let mut rng = stream(r);
        let mut z = vec![0.0; n];
        seed::fill_standard_normal(&mut rng, &mut z);
        chol.mul_lower(&z, &mut row[1..]);
    });
    Ok(PathEnsemble {
        grid,
        beta,
        kind,
        scheme: Scheme::Cholesky,
        master_seed,
        n_paths,
        values,
    })
}

/// Moving-average coefficients `b_m`, `m = 0..n`: `W(t_i) = Σ_{j<i} b_{i-1-j} ξ_j`
/// with `b_m² = ∫_{cell at lag m} (t_i - u)^{2β-1} du / Γ(β+½)²`.
pub fn moving_average_coefficients(grid: &TimeGrid, beta: HurstOrder) -> Vec<f64> {
    let b = beta.value();
    let g = beta.kernel_gamma();
    let scale = grid.spacing().powf(b) / g / (2.0 * b).sqrt();
    (0..grid.n_cells())
        .map(|m| {
            let m = m as f64;
            scale * ((m + 1.0).powf(2.0 * b) - m.powf(2.0 * b)).sqrt()
        })
        .collect()
}

/// `W^β(t_i) = Σ_{j≤i} a_{ij} ξ_j` with one standard normal per cell; the
/// marginal variances are exact, cross-covariances converge under refinement.
pub fn sample_moving_average(
    grid: TimeGrid,
    beta: HurstOrder,
    n_paths: usize,
    master_seed: u64,
) -> Result<PathEnsemble> {
    sample_moving_average_with(grid, beta, n_paths, master_seed, &|r| {
        scalar_stream(master_seed, r)
    })
}

pub(crate) fn sample_moving_average_with(
    grid: TimeGrid,
    beta: HurstOrder,
    n_paths: usize,
    master_seed: u64,
    stream: &(dyn Fn(usize) -> StreamRng + Sync),
) -> Result<PathEnsemble> {
    check_paths(n_paths)?;
    let coeffs = moving_average_coefficients(&grid, beta);
    let n = grid.n_cells();
    let m = n + 1;
    let mut values = vec![0.0; n_paths * m];
    values.par_chunks_mut(m).enumerate().for_each(|(r, row)| {
        let mut rng = stream(r);
        let mut z = vec![0.0; n];
        seed::fill_standard_normal(&mut rng, &mut z);
        for i in 1..=n {
            row[i] = (0..i).map(|j| coeffs[i - 1 - j] * z[j]).sum();
        }
    });
    Ok(PathEnsemble {
        grid,
        beta,
        kind: CovKind::Liouville,
        scheme: Scheme::MovingAverage,
        master_seed,
        n_paths,
        values,
    })
}

/// Dispatches on the scheme (moving average is Liouville-only).
pub fn sample(
    grid: TimeGrid,
    beta: HurstOrder,
    kind: CovKind,
    scheme: Scheme,
    n_paths: usize,
    master_seed: u64,
) -> Result<PathEnsemble> {
    match (scheme, kind) {
        (Scheme::Cholesky, _) => sample_cholesky(grid, beta, kind, n_paths, master_seed),
        (Scheme::MovingAverage, CovKind::Liouville) => {
            sample_moving_average(grid, beta, n_paths, master_seed)
        }
        (Scheme::MovingAverage, _) => Err(Error::Config(
            "the moving-average scheme only samples Liouville fBm".into(),
        )),
    }
}

/// `E|W(t_j) - W(t_i)|²` from a covariance matrix (node indices, `t_0` allowed).
pub fn increment_variance(cov: &CovMatrix, i: usize, j: usize) -> f64 {
    cov.node_entry(j, j) - 2.0 * cov.node_entry(i, j) + cov.node_entry(i, i)
}
