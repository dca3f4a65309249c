//! Spectral-Galerkin mild solutions of `dU = ΔU dt + B dW^β` on `(0,1)^d`
//! with Dirichlet boundary conditions and noise white in space.
//!
//! Each Dirichlet mode `k` carries the scalar stochastic convolution
//! `X_k(t) = b_k ∫_0^t e^{-λ_k (t-s)} dW^β_k(s)`. Writing its integrand
//! transform in the variable `y = λ(t-u)` gives
//!
//! ```text
//! g(u) = λ^{½-β} G(λ(t-u)) / Γ(β+½),
//! G(y) = y^{β-½} e^{-y} - y^{β-½} ∫_0^y e^{-w} ((1 - w/y)^{β-½} - 1) dw,
//! ```
//!
//! so `Var X_k(t) = b_k² λ^{-2β} Γ(β+½)^{-2} ∫_0^{λt} G(y)² dy`. The same
//! profile yields exact per-lag coefficients for path simulation.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::HurstOrder;
use crate::grid::{StepFunction, TimeGrid};
use crate::numerics::quadrature::{tanh_sinh, GaussLegendre, TanhSinhRule};
use crate::numerics::stats::{compensated_sum, linear_fit, LinearFit, McEstimate};
use crate::seed::{self, StreamRng};
use crate::stoch_integral::IntegrandTransform;

/// Dirichlet eigenmode with multi-index `index` (unused trailing entries 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub index: [usize; 2],
    pub lambda: f64,
}

impl Mode {
    /// Euclidean length of the multi-index.
    pub fn wavenumber(&self) -> f64 {
        ((self.index[0] * self.index[0] + self.index[1] * self.index[1]) as f64).sqrt()
    }
}

/// Truncated Galerkin system: `d ∈ {1, 2}`, indices `1..=cutoff` per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GalerkinModel {
    pub dim: usize,
    pub cutoff: usize,
    pub theta: f64,
    modes: Vec<Mode>,
    noise: Vec<f64>,
}

impl GalerkinModel {
    /// Identity noise (`b_k = 1`).
    pub fn new(dim: usize, cutoff: usize, theta: f64) -> Result<Self> {
        let n = dirichlet_modes(dim, cutoff)?.len();
        Self::with_noise(dim, cutoff, theta, vec![1.0; n])
    }

    pub fn with_noise(dim: usize, cutoff: usize, theta: f64, noise: Vec<f64>) -> Result<Self> {
        let modes = dirichlet_modes(dim, cutoff)?;
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(Error::param("theta", theta, "must be finite and >= 0"));
        }
        if noise.len() != modes.len() {
            return Err(Error::DimensionMismatch {
                expected: modes.len(),
                actual: noise.len(),
            });
        }
        Ok(Self {
            dim,
            cutoff,
            theta,
            modes,
            noise,
        })
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn noise(&self) -> &[f64] {
        &self.noise
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// `λ_k^{2θ}`, the spectral weight of the `E_θ` norm.
    pub fn weights(&self, theta: f64) -> Vec<f64> {
        self.modes.iter().map(|m| m.lambda.powf(2.0 * theta)).collect()
    }

    /// Exact `E‖U(t)‖²_{E_θ}` of the truncated system.
    pub fn expected_norm_sq(&self, t: f64, beta: HurstOrder, theta: f64) -> Result<f64> {
        let vars = self
            .modes
            .par_iter()
            .zip(&self.noise)
            .map(|(m, b)| Ok(m.lambda.powf(2.0 * theta) * b * b * mode_variance(m.lambda, t, beta)?))
            .collect::<Result<Vec<f64>>>()?;
        Ok(compensated_sum(vars))
    }
}

/// Modes of `-Δ` on `(0,1)^d`, ordered by multi-index (lexicographic).
pub fn dirichlet_modes(dim: usize, cutoff: usize) -> Result<Vec<Mode>> {
    if cutoff == 0 {
        return Err(Error::param("K", 0.0, "mode cutoff must be >= 1"));
    }
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    match dim {
        1 => Ok((1..=cutoff)
            .map(|k| Mode {
                index: [k, 0],
                lambda: pi2 * (k * k) as f64,
            })
            .collect()),
        2 => Ok((1..=cutoff)
            .flat_map(|k1| {
                (1..=cutoff).map(move |k2| Mode {
                    index: [k1, k2],
                    lambda: pi2 * (k1 * k1 + k2 * k2) as f64,
                })
            })
            .collect()),
        _ => Err(Error::param("d", dim as f64, "dimension must be 1 or 2")),
    }
}

/// Beyond this point `G` is evaluated and integrated through its
/// asymptotic expansion.
const ASYMPTOTIC_FROM: f64 = 48.0;

/// Coefficients `c_n` of `G(y) ~ Σ_{n≥1} c_n y^{γ-n}`, with
/// `c_n = (-1)^{n+1} γ(γ-1)…(γ-n+1)`, truncated once
/// `|c_n| / ASYMPTOTIC_FROM^{n-1}` drops below `1e-18 |c_1|`.
fn asymptotic_coefficients(gamma_exp: f64) -> Vec<f64> {
    let mut c = Vec::new();
    let mut falling = 1.0;
    for n in 1..=80 {
        falling *= gamma_exp - (n - 1) as f64;
        let cn = if n % 2 == 1 { falling } else { -falling };
        c.push(cn);
        if cn.abs() / ASYMPTOTIC_FROM.powi(n - 1) < 1e-18 * gamma_exp.abs() {
            break;
        }
    }
    c
}

/// `b^p - a^p` without cancellation when `b` is close to `a`.
fn power_difference(a: f64, b: f64, p: f64) -> f64 {
    a.powf(p) * (p * ((b - a) / a).ln_1p()).exp_m1()
}

fn asymptotic_profile(y: f64, c: &[f64], gamma_exp: f64) -> f64 {
    let mut sum = 0.0;
    let mut pow = y.powf(gamma_exp - 1.0);
    for cn in c {
        sum += cn * pow;
        pow /= y;
    }
    sum
}

/// Closed-form `(∫_a^b G, ∫_a^b G²)` from the expansion, `a ≥ ASYMPTOTIC_FROM`.
fn asymptotic_moments(a: f64, b: f64, c: &[f64], gamma_exp: f64) -> (f64, f64) {
    let mut m1 = 0.0;
    for (i, cn) in c.iter().enumerate() {
        let p = gamma_exp - i as f64;
        m1 += cn * power_difference(a, b, p) / p;
    }
    let mut m2 = 0.0;
    for s in 0..2 * c.len() - 1 {
        let lo = s.saturating_sub(c.len() - 1);
        let hi = s.min(c.len() - 1);
        let cs: f64 = (lo..=hi).map(|i| c[i] * c[s - i]).sum();
        let p = 2.0 * gamma_exp - 1.0 - s as f64;
        m2 += cs * power_difference(a, b, p) / p;
    }
    (m1, m2)
}

fn cached_coefficients(gamma_exp: f64) -> std::sync::Arc<Vec<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, std::sync::Arc<Vec<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    cache
        .lock()
        .unwrap()
        .entry(gamma_exp.to_bits())
        .or_insert_with(|| std::sync::Arc::new(asymptotic_coefficients(gamma_exp)))
        .clone()
}

/// `G(y)` for `y > 0`; `G = e^{-y}` when `γ = 0`.
pub fn convolution_profile(y: f64, gamma_exp: f64) -> f64 {
    if gamma_exp == 0.0 {
        return (-y).exp();
    }
    if y <= 0.0 {
        return 0.0;
    }
    if y >= ASYMPTOTIC_FROM {
        return asymptotic_profile(y, &cached_coefficients(gamma_exp), gamma_exp);
    }
    quadrature_profile(y, gamma_exp)
}

/// `G(y)` by direct quadrature of the inner integral.
fn quadrature_profile(y: f64, gamma_exp: f64) -> f64 {
    // e^{-w} below e^{-60} is negligible against |G(y)| ≳ |γ| y^{γ-1}.
    let upper = y.min(60.0);
    let abs_tol = 1e-17 * gamma_exp.abs() / (1.0 + y);
    let inner = tanh_sinh(0.0, upper, abs_tol, 1e-13, |w, _, to_upper| {
        let log_ratio = if upper < y || w < 0.5 * y {
            (-w / y).ln_1p()
        } else {
            // y - w equals the distance to the upper end here
            (to_upper / y).ln()
        };
        (-w).exp() * (gamma_exp * log_ratio).exp_m1()
    })
    .value;
    y.powf(gamma_exp) * ((-y).exp() - inner)
}

fn gl20() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(20))
}

fn near_origin_rule(gamma_exp: f64) -> TanhSinhRule {
    static CACHE: OnceLock<Mutex<HashMap<u64, TanhSinhRule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = gamma_exp.to_bits();
    if let Some(r) = cache.lock().unwrap().get(&key) {
        return r.clone();
    }
    let rule = TanhSinhRule::for_singularity((2.0 * gamma_exp).min(0.0), 1.0 / 16.0);
    cache.lock().unwrap().insert(key, rule.clone());
    rule
}

/// Moments by quadrature alone.
///
/// `(0, min(b, 1))` uses a tanh-sinh rule that absorbs the `y^{2γ}`
/// singularity; beyond that the range is cut into pieces no longer than
/// their distance to the origin and each piece gets 20-point Gauss–Legendre.
fn numerical_moments(a: f64, b: f64, gamma_exp: f64) -> (f64, f64) {
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    let mut lo = a;
    if lo == 0.0 {
        let hi = b.min(1.0);
        let rule = near_origin_rule(gamma_exp);
        for q in 0..rule.len() {
            let y = hi * rule.x[q];
            let g = convolution_profile(y, gamma_exp);
            m1 += rule.w[q] * g;
            m2 += rule.w[q] * g * g;
        }
        m1 *= hi;
        m2 *= hi;
        lo = hi;
    }
    let gl = gl20();
    while lo < b {
        let hi = (2.0 * lo).min(b);
        for (y, w) in gl.nodes_on(lo, hi) {
            let g = quadrature_profile(y, gamma_exp);
            m1 += w * g;
            m2 += w * g * g;
        }
        lo = hi;
    }
    (m1, m2)
}

/// `numerical_moments(0, ASYMPTOTIC_FROM)`, cached per exponent.
fn head_moments(gamma_exp: f64) -> (f64, f64) {
    static CACHE: OnceLock<Mutex<HashMap<u64, (f64, f64)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(m) = cache.lock().unwrap().get(&gamma_exp.to_bits()) {
        return *m;
    }
    let m = numerical_moments(0.0, ASYMPTOTIC_FROM, gamma_exp);
    cache.lock().unwrap().insert(gamma_exp.to_bits(), m);
    m
}

/// `(∫_a^b G, ∫_a^b G²)` for `0 ≤ a < b`; quadrature below
/// `ASYMPTOTIC_FROM` and the integrated expansion above it.
pub fn profile_moments(a: f64, b: f64, gamma_exp: f64) -> (f64, f64) {
    if gamma_exp == 0.0 {
        return (
            (-a).exp() * -(a - b).exp_m1(),
            0.5 * (-2.0 * a).exp() * -(2.0 * (a - b)).exp_m1(),
        );
    }
    let split = b.min(ASYMPTOTIC_FROM);
    let (mut m1, mut m2) = if a >= split {
        (0.0, 0.0)
    } else if a == 0.0 && split == ASYMPTOTIC_FROM {
        head_moments(gamma_exp)
    } else {
        numerical_moments(a, split, gamma_exp)
    };
    if b > ASYMPTOTIC_FROM {
        let (t1, t2) = asymptotic_moments(a.max(ASYMPTOTIC_FROM), b, &cached_coefficients(gamma_exp), gamma_exp);
        m1 += t1;
        m2 += t2;
    }
    (m1, m2)
}

fn variance_scale(lambda: f64, beta: HurstOrder) -> f64 {
    let g = beta.kernel_gamma();
    lambda.powf(-2.0 * beta.value()) / (g * g)
}

fn check_mode_args(lambda: f64, t: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", lambda, "eigenvalue must be positive"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::param("t", t, "time must be finite and >= 0"));
    }
    Ok(())
}

/// `Var ∫_0^t e^{-λ(t-s)} dW^β(s)`.
pub fn mode_variance(lambda: f64, t: f64, beta: HurstOrder) -> Result<f64> {
    check_mode_args(lambda, t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    if beta.is_brownian() {
        return Ok(-(-2.0 * lambda * t).exp_m1() / (2.0 * lambda));
    }
    let (_, m2) = profile_moments(0.0, lambda * t, beta.kernel_exponent());
    Ok(variance_scale(lambda, beta) * m2)
}

#[derive(Debug, Clone, Serialize)]
pub struct GridVariance {
    pub n_cells: Vec<usize>,
    pub levels: Vec<f64>,
    pub measured_order: Option<f64>,
    pub value: f64,
}

/// The same variance through the isometry norm of the cell-averaged
/// integrand on `n`, `2n` and `4n` cells with Richardson extrapolation
/// at the measured order. Grids with `λΔ > 10` are refined first.
pub fn mode_variance_grid(lambda: f64, t: f64, beta: HurstOrder, n: usize) -> Result<GridVariance> {
    check_mode_args(lambda, t)?;
    if t == 0.0 {
        return Err(Error::param("t", t, "needs t > 0"));
    }
    let mut n = n.max(1);
    if lambda * t / n as f64 > 10.0 {
        let needed = (lambda * t / 10.0).ceil() as usize;
        warn!("lambda*dt = {} under-resolves the boundary layer; refining {n} -> {needed} cells", lambda * t / n as f64);
        n = needed;
    }
    let mut n_cells = Vec::new();
    let mut levels = Vec::new();
    for level in 0..3 {
        let cells = n << level;
        let grid = TimeGrid::unit_start(t, cells)?;
        let f = StepFunction::from_cell_integrals(grid, |a, b| {
            ((-lambda * (t - b)).exp() - (-lambda * (t - a)).exp()) / lambda
        });
        let v = IntegrandTransform::new(grid, beta).norm_sq(&f)?;
        n_cells.push(cells);
        levels.push(v);
    }
    let (d1, d2) = (levels[1] - levels[0], levels[2] - levels[1]);
    let measured_order = (d1 * d2 > 0.0 && d2.abs() < d1.abs()).then(|| (d1 / d2).log2());
    let value = match measured_order {
        Some(p) => levels[2] + d2 / (2f64.powf(p) - 1.0),
        None => levels[2],
    };
    Ok(GridVariance {
        n_cells,
        levels,
        measured_order,
        value,
    })
}

/// Moving-average coefficients of one mode: `X(t_i) = Σ_{j<i} a_{i-1-j} ξ_j`
/// with `a_m² = b² Γ^{-2} λ^{-2β} ∫_{λmΔ}^{λ(m+1)Δ} G²` and the sign of `∫G`
/// on the same lag cell.
pub fn mode_coefficients(lambda: f64, noise: f64, grid: &TimeGrid, beta: HurstOrder) -> Result<Vec<f64>> {
    check_mode_args(lambda, grid.length())?;
    let n = grid.n_cells();
    let dt = grid.spacing();
    if beta.is_brownian() {
        // exact OU weights
        let c = noise * (-(-2.0 * lambda * dt).exp_m1() / (2.0 * lambda)).sqrt();
        return Ok((0..n).map(|m| c * (-lambda * dt * m as f64).exp()).collect());
    }
    let scale = variance_scale(lambda, beta);
    let gamma_exp = beta.kernel_exponent();
    Ok((0..n)
        .map(|m| {
            let (m1, m2) = profile_moments(lambda * dt * m as f64, lambda * dt * (m + 1) as f64, gamma_exp);
            noise * m1.signum() * (scale * m2).sqrt()
        })
        .collect())
}

/// Modal paths of one replicate on all grid nodes (`modes[k][i]` is
/// `X_k(t_i)`; `X_k(t_0) = 0`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MildSolutionPath {
    pub grid: TimeGrid,
    pub modes: Vec<Vec<f64>>,
}

impl MildSolutionPath {
    /// `Σ_k w_k X_k(t_i)²` with `w_k = λ_k^{2θ}`.
    pub fn norm_sq(&self, i: usize, weights: &[f64]) -> f64 {
        self.modes.iter().zip(weights).map(|(x, w)| w * x[i] * x[i]).sum()
    }

    /// `Σ_k w_k (X_k(t_{i+lag}) - X_k(t_i))²` averaged over admissible `i`.
    pub fn mean_increment_sq(&self, lag: usize, weights: &[f64]) -> f64 {
        let n = self.grid.n_nodes();
        let count = n - lag;
        let total: f64 = self
            .modes
            .iter()
            .zip(weights)
            .map(|(x, w)| w * (0..count).map(|i| (x[i + lag] - x[i]).powi(2)).sum::<f64>())
            .sum();
        total / count as f64
    }
}

/// Upper bound on stored reals for a full simulation.
pub const MEMORY_LIMIT: usize = 1 << 26;

/// Per-mode coefficient tables for a model on a grid; paths are generated
/// on demand from `(master_seed, mode, replicate)`.
#[derive(Debug, Clone)]
pub struct MildSimulator {
    pub model: GalerkinModel,
    pub grid: TimeGrid,
    pub beta: HurstOrder,
    pub master_seed: u64,
    /// Coefficients per mode, stored in reverse lag order.
    reversed: Vec<Vec<f64>>,
}

pub fn mode_stream(master_seed: u64, mode: usize, replicate: usize) -> StreamRng {
    seed::stream_rng(
        seed::domain::GALERKIN_MODE,
        master_seed,
        &[mode as u64, replicate as u64],
    )
}

impl MildSimulator {
    pub fn new(model: GalerkinModel, grid: TimeGrid, beta: HurstOrder, master_seed: u64) -> Result<Self> {
        let n_nodes = grid.n_nodes();
        let requested = model.n_modes().saturating_mul(n_nodes).saturating_mul(n_nodes);
        if requested > MEMORY_LIMIT {
            return Err(Error::MemoryGuard {
                requested,
                limit: MEMORY_LIMIT,
            });
        }
        let reversed = model
            .modes
            .par_iter()
            .zip(&model.noise)
            .map(|(m, &b)| {
                let mut c = mode_coefficients(m.lambda, b, &grid, beta)?;
                c.reverse();
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model,
            grid,
            beta,
            master_seed,
            reversed,
        })
    }

    /// Coefficient of `ξ_{k, i-1-m}` in `X_k(t_i)`.
    pub fn coefficient(&self, k: usize, m: usize) -> f64 {
        let c = &self.reversed[k];
        c[c.len() - 1 - m]
    }

    /// Variance of `X_k(t_i)` implied by the coefficients.
    pub fn discrete_variance(&self, k: usize, i: usize) -> f64 {
        (0..i).map(|m| self.coefficient(k, m).powi(2)).sum()
    }

    pub fn mode_path(&self, k: usize, replicate: usize) -> Vec<f64> {
        let n = self.grid.n_cells();
        let mut xi = vec![0.0; n];
        let mut rng = mode_stream(self.master_seed, k, replicate);
        seed::fill_standard_normal(&mut rng, &mut xi);
        let rev = &self.reversed[k];
        let mut x = vec![0.0; n + 1];
        for i in 1..=n {
            x[i] = dot(&rev[n - i..], &xi[..i]);
        }
        x
    }

    pub fn path(&self, replicate: usize) -> MildSolutionPath {
        MildSolutionPath {
            grid: self.grid,
            modes: (0..self.model.n_modes()).map(|k| self.mode_path(k, replicate)).collect(),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Simulates and stores `n_paths` replicates.
pub fn simulate_mild(
    model: &GalerkinModel,
    grid: TimeGrid,
    beta: HurstOrder,
    n_paths: usize,
    master_seed: u64,
) -> Result<Vec<MildSolutionPath>> {
    let stored = n_paths
        .saturating_mul(model.n_modes())
        .saturating_mul(grid.n_nodes());
    if stored > MEMORY_LIMIT {
        return Err(Error::MemoryGuard {
            requested: stored,
            limit: MEMORY_LIMIT,
        });
    }
    let sim = MildSimulator::new(model.clone(), grid, beta, master_seed)?;
    Ok((0..n_paths).into_par_iter().map(|r| sim.path(r)).collect())
}

/// Lags `m` (in cells) with `2^{-9} T ≤ mΔ ≤ 2^{-4} T`, `m` a power of two.
pub fn default_lags(grid: &TimeGrid) -> Vec<usize> {
    let n = grid.n_cells();
    let mut lags = Vec::new();
    let mut m = 1;
    while 16 * m <= n {
        if 512 * m >= n {
            lags.push(m);
        }
        m *= 2;
    }
    lags
}

/// Monte Carlo structure function `h ↦ E‖U(t+h) - U(t)‖²_{E_θ}`, averaged
/// over the admissible `t` of the grid.
#[derive(Debug, Clone, Serialize)]
pub struct StructureFunction {
    pub theta: f64,
    pub lag_cells: Vec<usize>,
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_paths: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub theta: f64,
    pub lags: Vec<f64>,
    pub structure: Vec<f64>,
    pub fit: LinearFit,
    /// Half the log-log slope.
    pub holder_estimate: f64,
}

impl StructureFunction {
    pub fn from_paths(paths: &[MildSolutionPath], model: &GalerkinModel, theta: f64, lag_cells: &[usize]) -> Result<Self> {
        let first = paths
            .first()
            .ok_or_else(|| Error::param("n_paths", 0.0, "need at least two paths"))?;
        let weights = model.weights(theta);
        let per_path: Vec<Vec<f64>> = paths
            .iter()
            .map(|p| lag_cells.iter().map(|&m| p.mean_increment_sq(m, &weights)).collect())
            .collect();
        Self::from_samples(theta, first.grid, lag_cells, &per_path)
    }

    fn from_samples(theta: f64, grid: TimeGrid, lag_cells: &[usize], per_path: &[Vec<f64>]) -> Result<Self> {
        if per_path.len() < 2 {
            return Err(Error::param("n_paths", per_path.len() as f64, "need at least two paths"));
        }
        let mut values = Vec::with_capacity(lag_cells.len());
        let mut std_errors = Vec::with_capacity(lag_cells.len());
        for l in 0..lag_cells.len() {
            let xs: Vec<f64> = per_path.iter().map(|v| v[l]).collect();
            let e = McEstimate::from_samples(&xs);
            values.push(e.mean);
            std_errors.push(e.std_error);
        }
        Ok(Self {
            theta,
            lag_cells: lag_cells.to_vec(),
            lags: lag_cells.iter().map(|&m| m as f64 * grid.spacing()).collect(),
            values,
            std_errors,
            n_paths: per_path.len(),
        })
    }

    /// Regresses `log S(h)` on `log h`; the Hölder estimate is half the slope.
    pub fn regularity(&self) -> Result<RegularityReport> {
        let mut distinct = self.lags.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < 2 {
            return Err(Error::param(
                "lags",
                distinct.len() as f64,
                "a Hölder estimate needs at least two distinct lags",
            ));
        }
        if self.values.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::param("structure", 0.0, "structure function must be positive"));
        }
        let x: Vec<f64> = self.lags.iter().map(|h| h.ln()).collect();
        let y: Vec<f64> = self.values.iter().map(|v| v.ln()).collect();
        let fit = linear_fit(&x, &y).ok_or_else(|| Error::param("lags", 0.0, "degenerate regression"))?;
        Ok(RegularityReport {
            theta: self.theta,
            lags: self.lags.clone(),
            structure: self.values.clone(),
            fit,
            holder_estimate: fit.slope / 2.0,
        })
    }
}

/// Streaming statistics over replicates generated by a [`MildSimulator`].
#[derive(Debug, Clone, Serialize)]
pub struct MildStatistics {
    pub n_paths: usize,
    pub times: Vec<f64>,
    pub thetas: Vec<f64>,
    /// `E‖U(t_i)‖²_{E_θ}` per θ and node.
    pub norm_sq: Vec<Vec<McEstimate>>,
    pub structure: Vec<StructureFunction>,
}

impl MildSimulator {
    /// Runs `n_paths` replicates without storing them. Per-replicate results
    /// are collected in replicate order, so the statistics do not depend on
    /// scheduling.
    pub fn statistics(&self, n_paths: usize, thetas: &[f64], lag_cells: &[usize]) -> Result<MildStatistics> {
        if n_paths < 2 {
            return Err(Error::param("n_paths", n_paths as f64, "need at least two paths"));
        }
        if let Some(&m) = lag_cells.iter().find(|&&m| m == 0 || m >= self.grid.n_nodes()) {
            return Err(Error::param("lag", m as f64, "lag must lie in 1..n_cells"));
        }
        let weights: Vec<Vec<f64>> = thetas.iter().map(|&th| self.model.weights(th)).collect();
        let n_nodes = self.grid.n_nodes();
        // per path: norms[theta][node] and structure[theta][lag]
        type PathStats = (Vec<Vec<f64>>, Vec<Vec<f64>>);
        let per_path: Vec<PathStats> = (0..n_paths)
            .into_par_iter()
            .map(|r| {
                let p = self.path(r);
                let norms = weights
                    .iter()
                    .map(|w| (0..n_nodes).map(|i| p.norm_sq(i, w)).collect())
                    .collect();
                let sf = weights
                    .iter()
                    .map(|w| lag_cells.iter().map(|&m| p.mean_increment_sq(m, w)).collect())
                    .collect();
                (norms, sf)
            })
            .collect();
        let mut norm_sq = Vec::with_capacity(thetas.len());
        let mut structure = Vec::with_capacity(thetas.len());
        for (ti, &theta) in thetas.iter().enumerate() {
            let per_node = (0..n_nodes)
                .map(|i| {
                    let xs: Vec<f64> = per_path.iter().map(|(n, _)| n[ti][i]).collect();
                    McEstimate::from_samples(&xs)
                })
                .collect();
            norm_sq.push(per_node);
            let samples: Vec<Vec<f64>> = per_path.iter().map(|(_, s)| s[ti].clone()).collect();
            structure.push(StructureFunction::from_samples(theta, self.grid, lag_cells, &samples)?);
        }
        Ok(MildStatistics {
            n_paths,
            times: self.grid.nodes(),
            thetas: thetas.to_vec(),
            norm_sq,
            structure,
        })
    }

    /// Structure function implied by the coefficients (no sampling).
    pub fn exact_structure(&self, theta: f64, lag_cells: &[usize]) -> Vec<f64> {
        let weights = self.model.weights(theta);
        let n = self.grid.n_cells();
        lag_cells
            .iter()
            .map(|&lag| {
                let count = n + 1 - lag;
                let total: f64 = (0..self.model.n_modes())
                    .map(|k| {
                        let c = |m: usize| self.coefficient(k, m);
                        let mut s = 0.0;
                        for i in 0..count {
                            // X(t_{i+lag}) - X(t_i) = Σ_j (a_{i+lag-1-j} - a_{i-1-j}) ξ_j
                            let mut v = 0.0;
                            for j in 0..i + lag {
                                let hi = c(i + lag - 1 - j);
                                let lo = if j < i { c(i - 1 - j) } else { 0.0 };
                                v += (hi - lo) * (hi - lo);
                            }
                            s += v;
                        }
                        weights[k] * s
                    })
                    .sum();
                total / count as f64
            })
            .collect()
    }
}

/// Hölder estimate from stored paths.
pub fn regularity_estimate(paths: &[MildSolutionPath], model: &GalerkinModel, beta: HurstOrder, theta: f64) -> Result<RegularityReport> {
    let first = paths
        .first()
        .ok_or_else(|| Error::param("n_paths", 0.0, "need at least two paths"))?;
    let tail = series_tail(model, beta, theta, first.grid.t_end())?;
    if !tail.convergent {
        return Err(Error::Divergent(format!(
            "the E_theta series diverges for d = {}, beta = {}, theta = {theta} \
             (mode-count tail exponent {:.3})",
            model.dim,
            beta.value(),
            tail.mode_count_exponent
        )));
    }
    StructureFunction::from_paths(paths, model, theta, &default_lags(&first.grid))?.regularity()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesClass {
    Convergent,
    Divergent,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesTail {
    /// Slope of `log(λ^{2θ} Var X_k)` against `log |k|` on the tail modes.
    pub wavenumber_exponent: f64,
    /// The same decay per mode count, `wavenumber_exponent / d`.
    pub mode_count_exponent: f64,
    pub convergent: bool,
}

/// Variance of every mode at `t`, computed once per distinct eigenvalue.
fn modal_terms(model: &GalerkinModel, beta: HurstOrder, theta: f64, t: f64) -> Result<Vec<f64>> {
    let mut distinct: Vec<f64> = model.modes.iter().map(|m| m.lambda).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let vars = distinct
        .par_iter()
        .map(|&l| mode_variance(l, t, beta))
        .collect::<Result<Vec<_>>>()?;
    let lookup: HashMap<u64, f64> = distinct.iter().map(|l| l.to_bits()).zip(vars).collect();
    Ok(model
        .modes
        .iter()
        .zip(&model.noise)
        .map(|(m, b)| m.lambda.powf(2.0 * theta) * b * b * lookup[&m.lambda.to_bits()])
        .collect())
}

/// Tail fit over modes whose wavenumber lies in `(K/2, K]`.
fn fit_tail(model: &GalerkinModel, terms: &[f64]) -> Result<SeriesTail> {
    let k = model.cutoff as f64;
    let (x, y): (Vec<f64>, Vec<f64>) = model
        .modes
        .iter()
        .zip(terms)
        .filter(|(m, _)| m.wavenumber() > 0.5 * k && m.wavenumber() <= k)
        .map(|(m, t)| (m.wavenumber().ln(), t.ln()))
        .unzip();
    let fit = linear_fit(&x, &y).ok_or_else(|| Error::param("K", k, "too few tail modes to fit an exponent"))?;
    let per_count = fit.slope / model.dim as f64;
    Ok(SeriesTail {
        wavenumber_exponent: fit.slope,
        mode_count_exponent: per_count,
        convergent: per_count < -1.0,
    })
}

pub fn series_tail(model: &GalerkinModel, beta: HurstOrder, theta: f64, t: f64) -> Result<SeriesTail> {
    let terms = modal_terms(model, beta, theta, t)?;
    fit_tail(model, &terms)
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdRow {
    pub beta: f64,
    pub cutoffs: Vec<usize>,
    /// `Σ_{modes with indices ≤ K} λ^{2θ} Var X_k(T)` for each cutoff.
    pub partial_sums: Vec<f64>,
    pub wavenumber_exponent: f64,
    pub mode_count_exponent: f64,
    pub classification: SeriesClass,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdReport {
    pub dim: usize,
    pub theta: f64,
    pub t_end: f64,
    pub rows: Vec<ThresholdRow>,
    /// Midpoint of the first adjacent pair of swept orders whose
    /// classifications differ.
    pub boundary_estimate: Option<f64>,
}

/// Partial sums of the `E_θ` variance series at time `t_end` and their
/// tail classification for each `β`.
pub fn existence_threshold_scan(
    dim: usize,
    betas: &[f64],
    theta: f64,
    cutoffs: &[usize],
    t_end: f64,
) -> Result<ThresholdReport> {
    let k_max = *cutoffs
        .iter()
        .max()
        .ok_or_else(|| Error::param("K", 0.0, "need at least one cutoff"))?;
    let model = GalerkinModel::new(dim, k_max, theta)?;
    let mut rows = Vec::with_capacity(betas.len());
    for &b in betas {
        let beta = HurstOrder::new(b)?;
        let terms = modal_terms(&model, beta, theta, t_end)?;
        let partial_sums = cutoffs
            .iter()
            .map(|&k| {
                compensated_sum(
                    model
                        .modes
                        .iter()
                        .zip(&terms)
                        .filter(|(m, _)| m.index[0] <= k && m.index[1] <= k)
                        .map(|(_, t)| *t),
                )
            })
            .collect();
        let tail = fit_tail(&model, &terms)?;
        rows.push(ThresholdRow {
            beta: b,
            cutoffs: cutoffs.to_vec(),
            partial_sums,
            wavenumber_exponent: tail.wavenumber_exponent,
            mode_count_exponent: tail.mode_count_exponent,
            classification: if tail.convergent {
                SeriesClass::Convergent
            } else {
                SeriesClass::Divergent
            },
        });
    }
    let mut sorted: Vec<&ThresholdRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.beta.total_cmp(&b.beta));
    let boundary_estimate = sorted
        .windows(2)
        .find(|w| w[0].classification != w[1].classification)
        .map(|w| 0.5 * (w[0].beta + w[1].beta));
    Ok(ThresholdReport {
        dim,
        theta,
        t_end,
        rows,
        boundary_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gamma;
    use crate::numerics::quadrature::gauss_kronrod;

    fn beta(b: f64) -> HurstOrder {
        HurstOrder::new(b).unwrap()
    }

    /// Direct quadrature of `g(u)² ` with `g` from the continuous
    /// summation-by-parts form `Γ^{-1}[(t-u)^γ - λ∫_u^t e^{-λ(t-r)}(r-u)^γ dr]`,
    /// using `u = t - v`, `v = w^{1/(2γ+1)}` against the singularity.
    fn variance_oracle(lambda: f64, t: f64, b: f64) -> f64 {
        let g = b - 0.5;
        let e = 1.0 / (2.0 * g + 1.0);
        let kernel = |v: f64| {
            // λ∫_0^v e^{-λ s}(v - s)^γ ds with s = v - x^{1/(γ+1)}
            let e2 = 1.0 / (g + 1.0);
            let inner = gauss_kronrod(0.0, v.powf(g + 1.0), 1e-16, 1e-12, 2000, |x| {
                let s = v - x.powf(e2);
                lambda * (-lambda * s).exp() * e2
            })
            .value;
            v.powf(g) - inner
        };
        let q = gauss_kronrod(0.0, t.powf(1.0 / e), 1e-16, 1e-11, 4000, |w| {
            let v = w.powf(e);
            let k = kernel(v);
            k * k * e * w.powf(e - 1.0)
        });
        q.value / gamma(b + 0.5).powi(2)
    }

    #[test]
    fn modes_are_dirichlet_eigenvalues() {
        let m = dirichlet_modes(1, 4).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        assert_eq!(m[2].lambda, 9.0 * pi2);
        assert!(m.windows(2).all(|w| w[1].lambda > w[0].lambda));
        let m2 = dirichlet_modes(2, 3).unwrap();
        assert_eq!(m2.len(), 9);
        assert_eq!(m2[4].index, [2, 2]);
        assert_eq!(m2[4].lambda, 8.0 * pi2);
        assert!(dirichlet_modes(3, 2).is_err());
        assert!(dirichlet_modes(1, 0).is_err());
    }

    #[test]
    fn brownian_variance_is_ou() {
        for (l, t) in [(1.0, 0.5), (98.7, 1.0), (5e4, 0.3)] {
            let v = mode_variance(l, t, beta(0.5)).unwrap();
            let ou = (1.0 - (-2.0 * l * t).exp()) / (2.0 * l);
            assert!((v - ou).abs() <= 1e-15 * ou);
        }
        assert_eq!(mode_variance(10.0, 0.0, beta(0.3)).unwrap(), 0.0);
        assert!(mode_variance(-1.0, 1.0, beta(0.3)).is_err());
    }

    #[test]
    fn profile_at_half_is_exponential() {
        for y in [0.1, 1.0, 30.0] {
            assert_eq!(convolution_profile(y, 0.0), (-y).exp());
        }
        // numerically computed profile close to γ = 0 approaches e^{-y}
        assert!((convolution_profile(2.0, 1e-9) - (-2.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn expansion_matches_quadrature_in_the_tail() {
        for g in [-0.4, -0.1, 0.05, 0.3, 0.45] {
            let c = asymptotic_coefficients(g);
            for y in [ASYMPTOTIC_FROM, 60.0, 150.0, 2000.0] {
                let q = quadrature_profile(y, g);
                let a = asymptotic_profile(y, &c, g);
                assert!((a / q - 1.0).abs() < 1e-11, "g={g} y={y}: {a} vs {q}");
            }
            // moments straddling the switch against pure quadrature
            let (m1, m2) = profile_moments(30.0, 90.0, g);
            let (n1, n2) = numerical_moments(30.0, 90.0, g);
            assert!((m1 / n1 - 1.0).abs() < 1e-11 && (m2 / n2 - 1.0).abs() < 1e-11, "g={g}");
            let (m1, m2) = profile_moments(100.0, 100.5, g);
            let (n1, n2) = numerical_moments(100.0, 100.5, g);
            assert!((m1 / n1 - 1.0).abs() < 1e-11 && (m2 / n2 - 1.0).abs() < 1e-11, "g={g}");
        }
    }

    #[test]
    fn variance_matches_direct_quadrature() {
        for b in [0.2, 0.35, 0.65, 0.8] {
            for (l, t) in [(std::f64::consts::PI.powi(2), 1.0), (3.0, 0.25), (400.0, 1.0)] {
                let v = mode_variance(l, t, beta(b)).unwrap();
                let o = variance_oracle(l, t, b);
                assert!((v / o - 1.0).abs() < 1e-8, "b={b} l={l} t={t}: {v} vs {o}");
            }
        }
    }

    #[test]
    fn grid_route_agrees() {
        for b in [0.3, 0.7] {
            let l = std::f64::consts::PI.powi(2);
            let v = mode_variance(l, 1.0, beta(b)).unwrap();
            let g = mode_variance_grid(l, 1.0, beta(b), 128).unwrap();
            assert!((g.value / v - 1.0).abs() < 1e-3, "b={b}: {} vs {v}", g.value);
        }
    }

    #[test]
    fn small_time_variance_vanishes() {
        let l = 50.0;
        let v1 = mode_variance(l, 1e-4, beta(0.3)).unwrap();
        let v2 = mode_variance(l, 1e-6, beta(0.3)).unwrap();
        assert!(v2 < v1 && v2 < 1e-3);
    }

    #[test]
    fn coefficients_reproduce_marginal_variance() {
        let grid = TimeGrid::unit_start(1.0, 64).unwrap();
        for b in [0.3, 0.5, 0.75] {
            let l = 40.0;
            let c = mode_coefficients(l, 1.0, &grid, beta(b)).unwrap();
            for i in [1, 17, 64] {
                let v: f64 = c[..i].iter().map(|a| a * a).sum();
                let exact = mode_variance(l, grid.node(i), beta(b)).unwrap();
                assert!((v / exact - 1.0).abs() < 1e-10, "b={b} i={i}");
            }
        }
    }

    #[test]
    fn simulator_is_deterministic_and_starts_at_zero() {
        let model = GalerkinModel::new(1, 3, 0.0).unwrap();
        let grid = TimeGrid::unit_start(1.0, 16).unwrap();
        let a = simulate_mild(&model, grid, beta(0.4), 3, 7).unwrap();
        let b = simulate_mild(&model, grid, beta(0.4), 3, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|p| p.modes.iter().all(|x| x[0] == 0.0)));
        assert_ne!(a[0].modes[0], a[0].modes[1]);
    }

    #[test]
    fn memory_guard_trips() {
        let model = GalerkinModel::new(1, 64, 0.0).unwrap();
        let grid = TimeGrid::unit_start(1.0, 1 << 12).unwrap();
        assert!(matches!(
            MildSimulator::new(model, grid, beta(0.4), 0),
            Err(Error::MemoryGuard { .. })
        ));
    }

    #[test]
    fn default_lags_span_dyadic_range() {
        assert_eq!(default_lags(&TimeGrid::unit_start(1.0, 256).unwrap()), vec![1, 2, 4, 8, 16]);
        assert_eq!(default_lags(&TimeGrid::unit_start(1.0, 512).unwrap()), vec![1, 2, 4, 8, 16, 32]);
        assert_eq!(
            default_lags(&TimeGrid::unit_start(1.0, 2048).unwrap()),
            vec![4, 8, 16, 32, 64, 128]
        );
    }

    #[test]
    fn single_lag_is_rejected() {
        let sf = StructureFunction {
            theta: 0.0,
            lag_cells: vec![2],
            lags: vec![0.1],
            values: vec![1.0],
            std_errors: vec![0.0],
            n_paths: 10,
        };
        assert!(sf.regularity().is_err());
    }

    #[test]
    fn structure_function_matches_coefficients() {
        let model = GalerkinModel::new(1, 4, 0.0).unwrap();
        let grid = TimeGrid::unit_start(1.0, 32).unwrap();
        let sim = MildSimulator::new(model, grid, beta(0.6), 3).unwrap();
        let lags = [1, 2, 4];
        let stats = sim.statistics(4000, &[0.0], &lags).unwrap();
        let exact = sim.exact_structure(0.0, &lags);
        for l in 0..3 {
            let sf = &stats.structure[0];
            let z = (sf.values[l] - exact[l]) / sf.std_errors[l];
            assert!(z.abs() < 4.0, "lag {}: z = {z}", lags[l]);
        }
    }

    #[test]
    fn threshold_scan_classifies_simple_cases() {
        let r = existence_threshold_scan(1, &[0.2, 0.3], 0.0, &[16, 32, 64], 1.0).unwrap();
        assert_eq!(r.rows[0].classification, SeriesClass::Divergent);
        assert_eq!(r.rows[1].classification, SeriesClass::Convergent);
        assert!((r.rows[1].wavenumber_exponent + 1.2).abs() < 0.1);
        assert!(r.rows[0].partial_sums.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(r.boundary_estimate, Some(0.25));
    }
}
