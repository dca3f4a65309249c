//! Cylindrical Liouville fBm on `H = R^m` and integrals of operator-valued
//! step functions `Φ: (0, T) → L(R^m, R^e)`.
//!
//! The state space is Euclidean, so the γ-radonifying norm of the
//! representation operator is a Hilbert–Schmidt norm and splits over matrix
//! entries: `‖R_Φ‖² = Σ_{a,k} ‖g[Φ_{ak}]‖²_{L²}` with `g` the scalar
//! integrand transform of each entry path.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::{self, CovKind, HurstOrder, PathEnsemble, Scheme};
use crate::grid::{StepFunction, TimeGrid};
use crate::numerics::gamma;
use crate::numerics::quadrature::{tanh_sinh, TanhSinhRule};
use crate::numerics::stats::{compensated_sum, McEstimate};
use crate::seed::{self, StreamRng};
use crate::stoch_integral::IntegrandTransform;

/// Linear map `R^m → R^e` stored row-major as an `e × m` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteRankMap {
    dim_noise: usize,
    dim_state: usize,
    entries: Vec<f64>,
}

impl FiniteRankMap {
    pub fn new(dim_noise: usize, dim_state: usize, entries: Vec<f64>) -> Result<Self> {
        if dim_noise == 0 || dim_state == 0 {
            return Err(Error::param("m", dim_noise.min(dim_state) as f64, "dimensions must be positive"));
        }
        if entries.len() != dim_noise * dim_state {
            return Err(Error::DimensionMismatch {
                expected: dim_noise * dim_state,
                actual: entries.len(),
            });
        }
        Ok(Self {
            dim_noise,
            dim_state,
            entries,
        })
    }

    pub fn zeros(dim_noise: usize, dim_state: usize) -> Self {
        Self {
            dim_noise,
            dim_state,
            entries: vec![0.0; dim_noise * dim_state],
        }
    }

    /// `Σ_n h_n ⊗ x_n`, i.e. `h ↦ Σ_n ⟨h, h_n⟩ x_n`.
    pub fn from_tensors(pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        let (h0, x0) = pairs
            .first()
            .ok_or_else(|| Error::param("pairs", 0.0, "need at least one tensor"))?;
        let (m, e) = (h0.len(), x0.len());
        let mut out = Self::zeros(m, e);
        for (h, x) in pairs {
            if h.len() != m || x.len() != e {
                return Err(Error::DimensionMismatch {
                    expected: m * e,
                    actual: h.len() * x.len(),
                });
            }
            for (row, xa) in out.entries.chunks_mut(m).zip(x) {
                for (o, hk) in row.iter_mut().zip(h) {
                    *o += xa * hk;
                }
            }
        }
        Ok(out)
    }

    /// Entries drawn i.i.d. standard normal.
    pub fn random(dim_noise: usize, dim_state: usize, rng: &mut StreamRng) -> Self {
        let mut entries = vec![0.0; dim_noise * dim_state];
        seed::fill_standard_normal(rng, &mut entries);
        Self {
            dim_noise,
            dim_state,
            entries,
        }
    }

    pub fn dim_noise(&self) -> usize {
        self.dim_noise
    }

    pub fn dim_state(&self) -> usize {
        self.dim_state
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Entry mapping noise coordinate `k` to state coordinate `a`.
    pub fn entry(&self, a: usize, k: usize) -> f64 {
        self.entries[a * self.dim_noise + k]
    }

    pub fn hs_norm_sq(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum()
    }

    /// Hilbert–Schmidt norm, which is the γ-norm for Euclidean targets.
    pub fn hs_norm(&self) -> f64 {
        self.hs_norm_sq().sqrt()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim_state, self.dim_noise, &self.entries)
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        let entries = (0..rows).flat_map(|i| (0..cols).map(move |j| m[(i, j)])).collect();
        Self {
            dim_noise: cols,
            dim_state: rows,
            entries,
        }
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.to_matrix()
            .singular_values()
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &FiniteRankMap) -> Result<Self> {
        if other.dim_state != self.dim_noise {
            return Err(Error::DimensionMismatch {
                expected: self.dim_noise,
                actual: other.dim_state,
            });
        }
        Ok(Self::from_matrix(&(self.to_matrix() * other.to_matrix())))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            dim_noise: self.dim_noise,
            dim_state: self.dim_state,
            entries: self.entries.iter().map(|v| c * v).collect(),
        }
    }

    pub fn sub(&self, other: &FiniteRankMap) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            dim_noise: self.dim_noise,
            dim_state: self.dim_state,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect(),
        })
    }

    fn check_same_shape(&self, other: &FiniteRankMap) -> Result<()> {
        if self.dim_noise != other.dim_noise || self.dim_state != other.dim_state {
            return Err(Error::DimensionMismatch {
                expected: self.dim_noise * self.dim_state,
                actual: other.dim_noise * other.dim_state,
            });
        }
        Ok(())
    }
}

/// Piecewise-constant `Φ`: one map per grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorPathFile", into = "OperatorPathFile")]
pub struct OperatorPath {
    grid: TimeGrid,
    dim_noise: usize,
    dim_state: usize,
    maps: Vec<FiniteRankMap>,
}

/// On-disk form `{m, e, grid, cells}` with each cell an `e × m` row-major array.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorPathFile {
    pub m: usize,
    pub e: usize,
    pub grid: TimeGrid,
    pub cells: Vec<Vec<f64>>,
}

impl TryFrom<OperatorPathFile> for OperatorPath {
    type Error = Error;
    fn try_from(f: OperatorPathFile) -> Result<Self> {
        let maps = f
            .cells
            .into_iter()
            .map(|c| FiniteRankMap::new(f.m, f.e, c))
            .collect::<Result<_>>()?;
        OperatorPath::new(f.grid, maps)
    }
}

impl From<OperatorPath> for OperatorPathFile {
    fn from(p: OperatorPath) -> Self {
        OperatorPathFile {
            m: p.dim_noise,
            e: p.dim_state,
            grid: p.grid,
            cells: p.maps.into_iter().map(|m| m.entries).collect(),
        }
    }
}

impl OperatorPath {
    pub fn new(grid: TimeGrid, maps: Vec<FiniteRankMap>) -> Result<Self> {
        if maps.len() != grid.n_cells() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_cells(),
                actual: maps.len(),
            });
        }
        let (m, e) = (maps[0].dim_noise, maps[0].dim_state);
        for map in &maps {
            if map.dim_noise != m || map.dim_state != e {
                return Err(Error::DimensionMismatch {
                    expected: m * e,
                    actual: map.dim_noise * map.dim_state,
                });
            }
        }
        Ok(Self {
            grid,
            dim_noise: m,
            dim_state: e,
            maps,
        })
    }

    pub fn zeros(grid: TimeGrid, dim_noise: usize, dim_state: usize) -> Self {
        Self {
            grid,
            dim_noise,
            dim_state,
            maps: vec![FiniteRankMap::zeros(dim_noise, dim_state); grid.n_cells()],
        }
    }

    /// `t ↦ f(t) S`.
    pub fn rank_one(f: &StepFunction, map: &FiniteRankMap) -> Self {
        Self {
            grid: *f.grid(),
            dim_noise: map.dim_noise,
            dim_state: map.dim_state,
            maps: f.values().iter().map(|&v| map.scale(v)).collect(),
        }
    }

    /// Right-endpoint samples `Φ(t_{j+1})` on cell `j`.
    pub fn sample_right(grid: TimeGrid, phi: &SmoothOperator) -> Self {
        let maps = (0..grid.n_cells()).map(|j| (phi.value)(grid.node(j + 1))).collect();
        Self {
            grid,
            dim_noise: phi.dim_noise,
            dim_state: phi.dim_state,
            maps,
        }
    }

    /// Exact cell averages of `w(t)Φ(t)`, with `w(t) = t^{weight}` (origin
    /// at the grid start); integrable end-point singularities are allowed.
    pub fn cell_averages(grid: TimeGrid, phi: &SmoothOperator, weight: f64) -> Self {
        let rule = TanhSinhRule::for_singularity(-0.9, 1.0 / 16.0);
        let t0 = grid.t_start();
        let (m, e) = (phi.dim_noise, phi.dim_state);
        let maps = (0..grid.n_cells())
            .into_par_iter()
            .map(|j| {
                let (a, b) = grid.cell(j);
                let len = b - a;
                let mut acc = vec![0.0; m * e];
                for q in 0..rule.len() {
                    let da = len * rule.x[q];
                    let db = len * rule.xc[q];
                    let x = if da < db { a + da } else { b - db };
                    let local = if a == t0 { da } else { x - t0 };
                    let w = rule.w[q] * if weight == 0.0 { 1.0 } else { local.powf(weight) };
                    let v = (phi.value)(x);
                    for (s, y) in acc.iter_mut().zip(&v.entries) {
                        *s += w * y;
                    }
                }
                FiniteRankMap {
                    dim_noise: m,
                    dim_state: e,
                    entries: acc,
                }
            })
            .collect();
        Self {
            grid,
            dim_noise: m,
            dim_state: e,
            maps,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim_noise(&self) -> usize {
        self.dim_noise
    }

    pub fn dim_state(&self) -> usize {
        self.dim_state
    }

    pub fn maps(&self) -> &[FiniteRankMap] {
        &self.maps
    }

    /// Scalar step function of entry `(a, k)`.
    pub fn entry_path(&self, a: usize, k: usize) -> StepFunction {
        let values = self.maps.iter().map(|m| m.entry(a, k)).collect();
        StepFunction::new(self.grid, values).expect("one value per cell")
    }
}

type MapFn = Box<dyn Fn(f64) -> FiniteRankMap + Send + Sync>;

/// `Φ` given by value and derivative evaluators.
pub struct SmoothOperator {
    pub dim_noise: usize,
    pub dim_state: usize,
    pub value: MapFn,
    pub derivative: MapFn,
}

impl std::fmt::Debug for SmoothOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothOperator")
            .field("dim_noise", &self.dim_noise)
            .field("dim_state", &self.dim_state)
            .finish_non_exhaustive()
    }
}

impl SmoothOperator {
    pub fn new(
        dim_noise: usize,
        dim_state: usize,
        value: impl Fn(f64) -> FiniteRankMap + Send + Sync + 'static,
        derivative: impl Fn(f64) -> FiniteRankMap + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim_noise,
            dim_state,
            value: Box::new(value),
            derivative: Box::new(derivative),
        }
    }

    /// `t ↦ S`.
    pub fn constant(map: FiniteRankMap) -> Self {
        let (m, e) = (map.dim_noise, map.dim_state);
        let zero = FiniteRankMap::zeros(m, e);
        Self::new(m, e, move |_| map.clone(), move |_| zero.clone())
    }

    /// `t ↦ S_0 + Σ_p S_p sin(ω_p t + φ_p)`.
    pub fn trigonometric(base: FiniteRankMap, terms: Vec<(FiniteRankMap, f64, f64)>) -> Self {
        let (m, e) = (base.dim_noise, base.dim_state);
        let terms_d = terms.clone();
        Self::new(
            m,
            e,
            move |t| {
                let mut out = base.entries.clone();
                for (s, w, p) in &terms {
                    let c = (w * t + p).sin();
                    for (o, v) in out.iter_mut().zip(&s.entries) {
                        *o += c * v;
                    }
                }
                FiniteRankMap {
                    dim_noise: m,
                    dim_state: e,
                    entries: out,
                }
            },
            move |t| {
                let mut out = vec![0.0; m * e];
                for (s, w, p) in &terms_d {
                    let c = w * (w * t + p).cos();
                    for (o, v) in out.iter_mut().zip(&s.entries) {
                        *o += c * v;
                    }
                }
                FiniteRankMap {
                    dim_noise: m,
                    dim_state: e,
                    entries: out,
                }
            },
        )
    }

    /// Compares the derivative evaluator against central differences at
    /// interior points of `(t_start, t_end)`; fails above relative error `tol`.
    pub fn check_derivative(&self, t_start: f64, t_end: f64, tol: f64) -> Result<()> {
        const PROBES: usize = 9;
        let len = t_end - t_start;
        for i in 1..=PROBES {
            let t = t_start + len * i as f64 / (PROBES + 1) as f64;
            let h = 1e-5 * len;
            let fd = (self.value)(t + h).sub(&(self.value)(t - h))?.scale(0.5 / h);
            let d = (self.derivative)(t);
            let err = fd.sub(&d)?.hs_norm();
            let scale = d.hs_norm().max((self.value)(t).hs_norm() / len).max(1.0);
            if err > tol * scale {
                return Err(Error::param(
                    "derivative",
                    t,
                    format!("derivative evaluator disagrees with finite differences: error {err:e}"),
                ));
            }
        }
        Ok(())
    }
}

/// `‖R_Φ‖_{γ}`: square root of the sum of scalar isometry norms² over entries.
pub fn representation_norm(phi: &OperatorPath, beta: HurstOrder) -> Result<f64> {
    Ok(representation_norm_sq(phi, beta)?.sqrt())
}

pub fn representation_norm_sq(phi: &OperatorPath, beta: HurstOrder) -> Result<f64> {
    let transform = IntegrandTransform::new(phi.grid, beta);
    let mut terms = Vec::with_capacity(phi.dim_noise * phi.dim_state);
    for a in 0..phi.dim_state {
        for k in 0..phi.dim_noise {
            let f = phi.entry_path(a, k);
            terms.push(if f.is_zero() { 0.0 } else { transform.norm_sq(&f)? });
        }
    }
    Ok(compensated_sum(terms))
}

/// `m` independent scalar Liouville fBms on a common grid.
#[derive(Debug, Clone)]
pub struct CylindricalEnsemble {
    pub coordinates: Vec<PathEnsemble>,
}

/// Stream for noise coordinate `coordinate`, replicate `replicate`.
pub fn cylindrical_stream(master_seed: u64, coordinate: usize, replicate: usize) -> StreamRng {
    seed::stream_rng(
        seed::domain::CYLINDRICAL,
        master_seed,
        &[coordinate as u64, replicate as u64],
    )
}

impl CylindricalEnsemble {
    pub fn sample(
        grid: TimeGrid,
        beta: HurstOrder,
        dim_noise: usize,
        scheme: Scheme,
        n_paths: usize,
        master_seed: u64,
    ) -> Result<Self> {
        if dim_noise == 0 {
            return Err(Error::param("m", 0.0, "noise dimension must be positive"));
        }
        let coordinates = (0..dim_noise)
            .map(|k| {
                let stream = move |r: usize| cylindrical_stream(master_seed, k, r);
                match scheme {
                    Scheme::Cholesky => fbm::sample_cholesky_with(
                        grid,
                        beta,
                        CovKind::Liouville,
                        n_paths,
                        master_seed,
                        &stream,
                    ),
                    Scheme::MovingAverage => {
                        fbm::sample_moving_average_with(grid, beta, n_paths, master_seed, &stream)
                    }
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { coordinates })
    }

    pub fn dim_noise(&self) -> usize {
        self.coordinates.len()
    }

    pub fn n_paths(&self) -> usize {
        self.coordinates[0].n_paths
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.coordinates[0].grid
    }

    pub fn beta(&self) -> HurstOrder {
        self.coordinates[0].beta
    }

    /// Largest absolute sample correlation between the terminal values of
    /// distinct coordinates.
    pub fn max_cross_correlation(&self) -> f64 {
        let last = self.grid().n_cells();
        let cols: Vec<Vec<f64>> = self
            .coordinates
            .iter()
            .map(|c| c.paths().map(|p| p[last]).collect())
            .collect();
        let mut worst: f64 = 0.0;
        for i in 0..cols.len() {
            for j in i + 1..cols.len() {
                worst = worst.max(correlation(&cols[i], &cols[j]).abs());
            }
        }
        worst
    }
}

fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = compensated_sum(x.iter().copied()) / n;
    let my = compensated_sum(y.iter().copied()) / n;
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let syy = compensated_sum(y.iter().map(|b| (b - my) * (b - my)));
    sxy / (sxx * syy).sqrt()
}

/// Per-path `E`-valued outcomes of `∫Φ dW_H`, row-major `n_paths × e`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIntegrals {
    pub dim_state: usize,
    pub outcomes: Vec<f64>,
}

impl VectorIntegrals {
    pub fn n_paths(&self) -> usize {
        self.outcomes.len() / self.dim_state
    }

    pub fn outcome(&self, r: usize) -> &[f64] {
        &self.outcomes[r * self.dim_state..(r + 1) * self.dim_state]
    }

    /// Estimate of `E‖∫Φ dW_H‖²`.
    pub fn norm_sq_estimate(&self) -> McEstimate {
        let sq: Vec<f64> = self
            .outcomes
            .chunks_exact(self.dim_state)
            .map(|x| x.iter().map(|v| v * v).sum())
            .collect();
        McEstimate::from_samples(&sq)
    }

    /// Estimate of the mean and variance of coordinate `a`.
    pub fn coordinate_estimate(&self, a: usize) -> McEstimate {
        let xs: Vec<f64> = self.outcomes.chunks_exact(self.dim_state).map(|x| x[a]).collect();
        McEstimate::from_samples(&xs)
    }
}

/// `Σ_{j,k} Φ_j e_k · (W_k(t_{j+1}) - W_k(t_j))` per path.
pub fn integrate_vector_paths(phi: &OperatorPath, ens: &CylindricalEnsemble) -> Result<VectorIntegrals> {
    if phi.dim_noise != ens.dim_noise() {
        return Err(Error::DimensionMismatch {
            expected: ens.dim_noise(),
            actual: phi.dim_noise,
        });
    }
    phi.grid.ensure_same(ens.grid())?;
    let (m, e) = (phi.dim_noise, phi.dim_state);
    let n_paths = ens.n_paths();
    let mut outcomes = vec![0.0; n_paths * e];
    outcomes.par_chunks_mut(e).enumerate().for_each(|(r, out)| {
        for k in 0..m {
            let p = ens.coordinates[k].path(r);
            for (j, map) in phi.maps.iter().enumerate() {
                let dw = p[j + 1] - p[j];
                for (a, o) in out.iter_mut().enumerate() {
                    *o += map.entries[a * m + k] * dw;
                }
            }
        }
    });
    Ok(VectorIntegrals { dim_state: e, outcomes })
}

pub fn integrate_vector_mc(phi: &OperatorPath, ens: &CylindricalEnsemble) -> Result<(VectorIntegrals, McEstimate)> {
    let v = integrate_vector_paths(phi, ens)?;
    let est = v.norm_sq_estimate();
    Ok((v, est))
}

/// `1/(√(2β) Γ(½+β))`, the norm of `1_{(0,1)}`.
pub fn indicator_constant(beta: HurstOrder) -> f64 {
    let b = beta.value();
    1.0 / ((2.0 * b).sqrt() * gamma(0.5 + b))
}

#[derive(Debug, Clone, Serialize)]
pub struct SuffConditionBound {
    pub beta: f64,
    pub constant: f64,
    /// `C_β T^β ‖Φ(T)‖`.
    pub terminal_term: f64,
    /// `C_β ∫ t^β ‖Φ'(t)‖ dt`.
    pub derivative_term: f64,
    pub bound: f64,
    /// Representation norm of the right-endpoint discretization of `Φ`.
    pub actual: f64,
}

impl SuffConditionBound {
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.actual <= self.bound * (1.0 + rel_tol)
    }
}

/// Bound on the representation norm of a differentiable `Φ` on `(0, T)`,
/// `β < ½`, together with the norm of its discretization on `grid`.
pub fn suff_condition_bound(phi: &SmoothOperator, beta: HurstOrder, grid: TimeGrid) -> Result<SuffConditionBound> {
    let b = beta.value();
    if b >= 0.5 {
        return Err(Error::param("beta", b, "the derivative bound requires beta < 1/2"));
    }
    if grid.t_start() != 0.0 {
        return Err(Error::param("t_start", grid.t_start(), "grid must start at 0"));
    }
    let t_end = grid.t_end();
    phi.check_derivative(0.0, t_end, 1e-6)?;
    let c = indicator_constant(beta);
    let terminal_term = c * t_end.powf(b) * (phi.value)(t_end).hs_norm();
    let q = tanh_sinh(0.0, t_end, 1e-14, 1e-12, |_, t, _| t.powf(b) * (phi.derivative)(t).hs_norm());
    let derivative_term = c * q.value;
    let actual = representation_norm(&OperatorPath::sample_right(grid, phi), beta)?;
    Ok(SuffConditionBound {
        beta: b,
        constant: c,
        terminal_term,
        derivative_term,
        bound: terminal_term + derivative_term,
        actual,
    })
}

/// Norms of the cell-averaged `Φ` on doubling grids.
#[derive(Debug, Clone, Serialize)]
pub struct RefinedNorm {
    pub n_cells: Vec<usize>,
    pub values: Vec<f64>,
    /// All values finite and the last increment smaller than the one before.
    pub converged: bool,
}

impl RefinedNorm {
    pub fn last(&self) -> f64 {
        *self.values.last().expect("at least one level")
    }
}

fn refined(values: Vec<f64>, n_cells: Vec<usize>) -> RefinedNorm {
    let finite = values.iter().all(|v| v.is_finite());
    let k = values.len();
    let converged = finite && {
        let d1 = (values[k - 2] - values[k - 3]).abs();
        let d2 = (values[k - 1] - values[k - 2]).abs();
        d2 <= 1e-12 * values[k - 1].abs() || d2 < d1
    };
    RefinedNorm {
        n_cells,
        values,
        converged,
    }
}

/// Refinement levels used by [`domination_check`].
pub const DOMINATION_LEVELS: [usize; 5] = [64, 128, 256, 512, 1024];

#[derive(Debug, Clone, Serialize)]
pub struct DominationReport {
    pub beta: f64,
    pub liouville: RefinedNorm,
    pub brownian: RefinedNorm,
    /// Liouville norm of `t^α Φ(t)` when a weight exponent was given.
    pub weighted: Option<(f64, RefinedNorm)>,
    /// The implied finiteness ordering holds on this instance.
    pub ordering_holds: bool,
}

/// Liouville and Brownian norms of `Φ` on `(0, t_end)` under refinement.
///
/// For `β < ½` a finite Liouville norm implies a finite Brownian one and
/// for `β > ½` the reverse; with `weight = Some(α)`, `β > ½` and
/// `0 ≤ α < β - ½`, a finite Brownian norm of `Φ` implies a finite
/// Liouville norm of `t^α Φ(t)`.
pub fn domination_check(
    phi: &SmoothOperator,
    beta: HurstOrder,
    t_end: f64,
    weight: Option<f64>,
) -> Result<DominationReport> {
    let b = beta.value();
    if let Some(alpha) = weight {
        if b <= 0.5 {
            return Err(Error::param("beta", b, "the weighted check requires beta > 1/2"));
        }
        if !(alpha >= 0.0 && alpha < b - 0.5) {
            return Err(Error::param("alpha", alpha, "need 0 <= alpha < beta - 1/2"));
        }
    }
    let brownian_order = HurstOrder::new(0.5)?;
    let mut lv = Vec::new();
    let mut bv = Vec::new();
    let mut wv = Vec::new();
    for &n in &DOMINATION_LEVELS {
        let grid = TimeGrid::unit_start(t_end, n)?;
        let path = OperatorPath::cell_averages(grid, phi, 0.0);
        lv.push(representation_norm(&path, beta)?);
        bv.push(representation_norm(&path, brownian_order)?);
        if let Some(alpha) = weight {
            let weighted = OperatorPath::cell_averages(grid, phi, alpha);
            wv.push(representation_norm(&weighted, beta)?);
        }
    }
    let levels = DOMINATION_LEVELS.to_vec();
    let liouville = refined(lv, levels.clone());
    let brownian = refined(bv, levels.clone());
    let weighted = weight.map(|a| (a, refined(wv, levels)));
    let mut ordering_holds = if b < 0.5 {
        !liouville.converged || brownian.converged
    } else {
        !brownian.converged || liouville.converged
    };
    if let Some((_, w)) = &weighted {
        ordering_holds &= !brownian.converged || w.converged;
    }
    Ok(DominationReport {
        beta: b,
        liouville,
        brownian,
        weighted,
        ordering_holds,
    })
}

/// A random map with i.i.d. normal entries from the cylindrical stream
/// family, keyed by `index`.
pub fn random_map(dim_noise: usize, dim_state: usize, seed: u64, index: u64) -> FiniteRankMap {
    let mut rng = seed::stream_rng(seed::domain::INTEGRANDS, seed, &[u64::MAX, index]);
    FiniteRankMap::random(dim_noise, dim_state, &mut rng)
}

/// Random trigonometric `Φ` with up to three modes and frequencies in `(0, 2π/T)`.
pub fn random_smooth_operator(dim_noise: usize, dim_state: usize, t_end: f64, seed: u64, index: u64) -> SmoothOperator {
    let mut rng = seed::stream_rng(seed::domain::INTEGRANDS, seed, &[u64::MAX - 1, index]);
    let base = FiniteRankMap::random(dim_noise, dim_state, &mut rng);
    let n_terms = rng.random_range(1..=3);
    let terms = (0..n_terms)
        .map(|_| {
            let s = FiniteRankMap::random(dim_noise, dim_state, &mut rng);
            let w = rng.random_range(0.1..2.0 * std::f64::consts::PI / t_end);
            let p = rng.random_range(0.0..2.0 * std::f64::consts::PI);
            (s, w, p)
        })
        .collect();
    SmoothOperator::trigonometric(base, terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stoch_integral::{isometry_norm, random_step_function};

    fn beta(b: f64) -> HurstOrder {
        HurstOrder::new(b).unwrap()
    }

    #[test]
    fn hs_norm_and_shape_checks() {
        let s = FiniteRankMap::new(2, 3, vec![1.0, 2.0, 0.0, -1.0, 3.0, 1.0]).unwrap();
        assert_eq!(s.hs_norm_sq(), 16.0);
        assert_eq!(s.entry(1, 1), -1.0);
        assert!(FiniteRankMap::new(2, 3, vec![0.0; 5]).is_err());
        let t = FiniteRankMap::zeros(3, 3);
        assert!(s.compose(&t).is_err());
        assert_eq!(FiniteRankMap::from_matrix(&s.to_matrix()), s);
    }

    #[test]
    fn single_entry_reduces_to_scalar_case() {
        let g = TimeGrid::unit_start(1.0, 16).unwrap();
        let mut maps = vec![FiniteRankMap::zeros(2, 3); 16];
        maps[5].entries[4] = 1.0;
        let phi = OperatorPath::new(g, maps).unwrap();
        let f = StepFunction::indicator(g, 5, 6).unwrap();
        for b in [0.3, 0.5, 0.7] {
            let v = representation_norm(&phi, beta(b)).unwrap();
            assert!((v - isometry_norm(&f, beta(b)).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn rank_one_norm_factorizes() {
        let g = TimeGrid::unit_start(1.0, 32).unwrap();
        let f = random_step_function(g, 1, 3);
        let s = random_map(3, 2, 1, 0);
        let phi = OperatorPath::rank_one(&f, &s);
        let v = representation_norm(&phi, beta(0.3)).unwrap();
        let expected = isometry_norm(&f, beta(0.3)).unwrap() * s.hs_norm();
        assert!((v - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn operator_path_json_round_trip() {
        let g = TimeGrid::unit_start(1.0, 3).unwrap();
        let maps = (0..3).map(|i| random_map(2, 2, 0, i)).collect();
        let p = OperatorPath::new(g, maps).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"cells\""));
        let back: OperatorPath = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
        let bad = r#"{"m":2,"e":2,"grid":{"t_start":0.0,"t_end":1.0,"n_cells":2},"cells":[[1,2,3,4]]}"#;
        assert!(serde_json::from_str::<OperatorPath>(bad).is_err());
    }

    #[test]
    fn zero_integrand_has_zero_outcomes() {
        let g = TimeGrid::unit_start(1.0, 8).unwrap();
        let ens = CylindricalEnsemble::sample(g, beta(0.3), 2, Scheme::Cholesky, 10, 1).unwrap();
        let v = integrate_vector_paths(&OperatorPath::zeros(g, 2, 3), &ens).unwrap();
        assert!(v.outcomes.iter().all(|&x| x == 0.0));
        assert!(integrate_vector_paths(&OperatorPath::zeros(g, 3, 3), &ens).is_err());
    }

    #[test]
    fn coordinates_use_distinct_streams() {
        let g = TimeGrid::unit_start(1.0, 8).unwrap();
        let ens = CylindricalEnsemble::sample(g, beta(0.7), 3, Scheme::MovingAverage, 4, 9).unwrap();
        assert_ne!(ens.coordinates[0].values(), ens.coordinates[1].values());
        let again = CylindricalEnsemble::sample(g, beta(0.7), 3, Scheme::MovingAverage, 4, 9).unwrap();
        assert_eq!(ens.coordinates[2].values(), again.coordinates[2].values());
    }

    #[test]
    fn constant_operator_attains_bound() {
        let g = TimeGrid::unit_start(2.0, 64).unwrap();
        let s = random_map(2, 2, 5, 0);
        for b in [0.2, 0.35] {
            let r = suff_condition_bound(&SmoothOperator::constant(s.clone()), beta(b), g).unwrap();
            let exact = indicator_constant(beta(b)) * 2f64.powf(b) * s.hs_norm();
            assert!((r.bound - exact).abs() < 1e-12 * exact);
            assert_eq!(r.derivative_term, 0.0);
            assert!((r.actual - exact).abs() < 1e-12 * exact);
        }
        assert!(suff_condition_bound(&SmoothOperator::constant(s), beta(0.6), g).is_err());
    }

    #[test]
    fn linear_operator_bound_integrates_exactly() {
        let g = TimeGrid::unit_start(1.0, 128).unwrap();
        let s = random_map(2, 3, 7, 1);
        let s2 = s.clone();
        let phi = SmoothOperator::new(2, 3, move |t| s.scale(t), move |_| s2.clone());
        let b = 0.35;
        let r = suff_condition_bound(&phi, beta(b), g).unwrap();
        let c = indicator_constant(beta(b));
        let norm = random_map(2, 3, 7, 1).hs_norm();
        assert!((r.derivative_term - c * norm / (b + 1.0)).abs() < 1e-12);
        assert!((r.terminal_term - c * norm).abs() < 1e-12);
        assert!(r.holds(0.0));
    }

    #[test]
    fn wrong_derivative_is_rejected() {
        let s = random_map(1, 1, 0, 0);
        let s2 = s.clone();
        let phi = SmoothOperator::new(1, 1, move |t| s.scale(t * t), move |t| s2.scale(t));
        assert!(phi.check_derivative(0.0, 1.0, 1e-6).is_err());
        let ok = random_smooth_operator(2, 2, 1.0, 3, 0);
        ok.check_derivative(0.0, 1.0, 1e-6).unwrap();
    }

    #[test]
    fn constant_operator_dominations_are_finite() {
        let phi = SmoothOperator::constant(random_map(2, 2, 2, 0));
        for b in [0.3, 0.7] {
            let r = domination_check(&phi, beta(b), 1.0, None).unwrap();
            assert!(r.liouville.converged && r.brownian.converged && r.ordering_holds);
        }
        assert!(domination_check(&phi, beta(0.3), 1.0, Some(0.1)).is_err());
        assert!(domination_check(&phi, beta(0.7), 1.0, Some(0.25)).is_err());
    }
}
