//! Wiener-type integrals of deterministic integrands against Liouville fBm.
//!
//! For a step function `f = Σ_j v_j 1_{cell j}`, the pathwise integral is
//! `Σ_j v_j (W(t_{j+1}) - W(t_j))` and its variance is `‖g‖²_{L²}` with
//!
//! ```text
//! g(s) = Γ(β+½)^{-1} Σ_i d_i (t_i - s)_+^{β-½},   d_i = v_{i-1} - v_i,
//! ```
//!
//! which is `D^{½-β}_{T-} f` for `β < ½`, `I^{β-½}_{T-} f` for `β > ½`
//! and `f` itself at `β = ½`. [`IntegrandTransform`] integrates `g²`
//! cell by cell with a tanh-sinh rule that resolves the `(t_i - s)^{2β-1}`
//! end-point singularity, so the norm is exact up to quadrature round-off
//! on every grid.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::{CovKind, CovMatrix, HurstOrder, Normalization, PathEnsemble};
use crate::frac_calc::h_norm;
use crate::grid::{Side, StepFunction, TimeGrid};
use crate::numerics::quadrature::TanhSinhRule;
use crate::numerics::stats::compensated_sum;
use crate::seed;

pub use crate::numerics::stats::McEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    BelowHalf,
    Brownian,
    AboveHalf,
}

impl Regime {
    pub fn of(beta: HurstOrder) -> Self {
        let b = beta.value();
        if b < 0.5 {
            Regime::BelowHalf
        } else if b > 0.5 {
            Regime::AboveHalf
        } else {
            Regime::Brownian
        }
    }
}

/// `(m + u_q)^{β-½}` for `m < n` on a fixed rule in `u`.
struct PowerTable {
    rule: TanhSinhRule,
    powers: Vec<f64>,
}

const RULE_STEP: f64 = 0.125;

type TableCache = Mutex<HashMap<(u64, usize), Arc<PowerTable>>>;

fn power_table(beta: HurstOrder, n: usize) -> Arc<PowerTable> {
    static CACHE: OnceLock<TableCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (beta.value().to_bits(), n);
    if let Some(t) = cache.lock().unwrap().get(&key) {
        return Arc::clone(t);
    }
    let gamma_exp = beta.kernel_exponent();
    let rule = TanhSinhRule::for_singularity((2.0 * gamma_exp).min(0.0), RULE_STEP);
    let q = rule.len();
    let mut powers = vec![0.0; n * q];
    for m in 0..n {
        for (k, &u) in rule.x.iter().enumerate() {
            powers[m * q + k] = if m == 0 {
                u.powf(gamma_exp)
            } else {
                (m as f64 + u).powf(gamma_exp)
            };
        }
    }
    let table = Arc::new(PowerTable { rule, powers });
    let mut guard = cache.lock().unwrap();
    if guard.len() >= 64 {
        guard.clear();
    }
    guard.insert(key, Arc::clone(&table));
    table
}

/// Regime-dependent map `f ↦ g` with `E|∫f dW^β|² = ‖g‖²_{L²}`.
#[derive(Clone)]
pub struct IntegrandTransform {
    pub beta: HurstOrder,
    pub grid: TimeGrid,
    pub regime: Regime,
    table: Option<Arc<PowerTable>>,
}

impl std::fmt::Debug for IntegrandTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IntegrandTransform")
            .field("beta", &self.beta)
            .field("grid", &self.grid)
            .field("regime", &self.regime)
            .finish()
    }
}

impl IntegrandTransform {
    pub fn new(grid: TimeGrid, beta: HurstOrder) -> Self {
        let regime = Regime::of(beta);
        let table = match regime {
            Regime::Brownian => None,
            _ => Some(power_table(beta, grid.n_cells())),
        };
        Self {
            beta,
            grid,
            regime,
            table,
        }
    }

    /// `‖g‖²_{L²}`.
    pub fn norm_sq(&self, f: &StepFunction) -> Result<f64> {
        self.grid.ensure_same(f.grid())?;
        let table = match &self.table {
            None => return Ok(f.l2_norm_sq()),
            Some(t) => t,
        };
        let d = f.left_indicator_coefficients();
        let n = d.len();
        let q = table.rule.len();
        let w = &table.rule.w;
        let per_cell: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|k| {
                let mut h = vec![0.0; q];
                for (m, &dm) in d[k..].iter().enumerate() {
                    if dm == 0.0 {
                        continue;
                    }
                    let row = &table.powers[m * q..(m + 1) * q];
                    for (hq, &p) in h.iter_mut().zip(row) {
                        *hq += dm * p;
                    }
                }
                compensated_sum(h.iter().zip(w).map(|(hq, wq)| wq * hq * hq))
            })
            .collect();
        let g = self.beta.kernel_gamma();
        let scale = self.grid.spacing().powf(2.0 * self.beta.value()) / (g * g);
        Ok(scale * compensated_sum(per_cell))
    }

    pub fn norm(&self, f: &StepFunction) -> Result<f64> {
        Ok(self.norm_sq(f)?.sqrt())
    }

    /// `g(s)` evaluated directly from its kernel sum.
    pub fn evaluate(&self, f: &StepFunction, s: f64) -> Result<f64> {
        self.grid.ensure_same(f.grid())?;
        if self.regime == Regime::Brownian {
            let j = (((s - self.grid.t_start()) / self.grid.spacing()).ceil() as usize)
                .saturating_sub(1)
                .min(self.grid.n_cells() - 1);
            return Ok(f.values()[j]);
        }
        let gamma_exp = self.beta.kernel_exponent();
        let d = f.left_indicator_coefficients();
        let sum: f64 = d
            .iter()
            .enumerate()
            .filter_map(|(j, &dj)| {
                let ti = self.grid.node(j + 1);
                (ti > s).then(|| dj * (ti - s).powf(gamma_exp))
            })
            .sum();
        Ok(sum / self.beta.kernel_gamma())
    }

    /// The same norm through the discrete right-sided fractional operators
    /// (triangular solve below ½, kernel apply above). Converges to
    /// [`Self::norm`] under refinement only.
    pub fn discrete_norm(&self, f: &StepFunction) -> Result<f64> {
        self.grid.ensure_same(f.grid())?;
        match self.regime {
            Regime::Brownian => Ok(f.l2_norm()),
            Regime::BelowHalf => h_norm(f, 0.5 - self.beta.value(), Side::Right),
            Regime::AboveHalf => h_norm(f, 0.5 - self.beta.value(), Side::Right),
        }
    }
}

/// `(E|∫f dW^β|²)^{1/2}`.
pub fn isometry_norm(f: &StepFunction, beta: HurstOrder) -> Result<f64> {
    IntegrandTransform::new(*f.grid(), beta).norm(f)
}

/// Pathwise integrals `X_r = Σ_j v_j ΔW_{r,j}`, one per replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathIntegrals {
    pub values: Vec<f64>,
}

impl PathIntegrals {
    /// Mean and variance of `X`.
    pub fn estimate(&self) -> McEstimate {
        McEstimate::from_samples(&self.values)
    }

    /// Estimate of `E X²` with its standard error, the statistic compared
    /// against the isometry.
    pub fn second_moment(&self) -> McEstimate {
        let sq: Vec<f64> = self.values.iter().map(|x| x * x).collect();
        McEstimate::from_samples(&sq)
    }
}

pub fn integrate_paths(f: &StepFunction, beta: HurstOrder, ensemble: &PathEnsemble) -> Result<PathIntegrals> {
    ensemble.grid.ensure_same(f.grid())?;
    if ensemble.beta != beta {
        return Err(Error::param(
            "beta",
            beta.value(),
            format!("ensemble was sampled with beta = {}", ensemble.beta.value()),
        ));
    }
    if ensemble.kind != CovKind::Liouville {
        return Err(Error::Config("integrals require a Liouville ensemble".into()));
    }
    let v = f.values();
    let values = ensemble
        .paths()
        .map(|p| {
            v.iter()
                .enumerate()
                .map(|(j, &c)| c * (p[j + 1] - p[j]))
                .sum()
        })
        .collect();
    Ok(PathIntegrals { values })
}

/// Monte Carlo estimate of `∫f dW^β` (mean and variance over paths).
pub fn integrate_mc(f: &StepFunction, beta: HurstOrder, ensemble: &PathEnsemble) -> Result<McEstimate> {
    Ok(integrate_paths(f, beta, ensemble)?.estimate())
}

/// One row of an isometry check.
#[derive(Debug, Clone, Serialize)]
pub struct IsometryCheck {
    pub beta: f64,
    pub alpha: Option<f64>,
    pub n_paths: usize,
    pub mc_variance: f64,
    pub oracle_variance: f64,
    pub std_error: f64,
    pub z_score: f64,
}

impl IsometryCheck {
    pub fn new(f: &StepFunction, beta: HurstOrder, ensemble: &PathEnsemble) -> Result<Self> {
        let oracle = isometry_norm(f, beta)?.powi(2);
        let m2 = integrate_paths(f, beta, ensemble)?.second_moment();
        Ok(Self {
            beta: beta.value(),
            alpha: None,
            n_paths: m2.n_paths,
            mc_variance: m2.mean,
            oracle_variance: oracle,
            std_error: m2.std_error,
            z_score: m2.z_score(oracle),
        })
    }

    pub fn passes(&self, z_max: f64) -> bool {
        self.z_score.abs() <= z_max
    }
}

/// Random step function number `index` of the family drawn from `seed`:
/// between 1 and 16 constant pieces at random cell boundaries, with
/// standard normal values.
pub fn random_step_function(grid: TimeGrid, seed: u64, index: u64) -> StepFunction {
    let mut rng = seed::stream_rng(seed::domain::INTEGRANDS, seed, &[index]);
    let n = grid.n_cells();
    let pieces = rng.random_range(1..=16usize.min(n));
    let mut cuts: Vec<usize> = (0..pieces - 1).map(|_| rng.random_range(1..n)).collect();
    cuts.sort_unstable();
    cuts.dedup();
    let mut levels = vec![0.0; cuts.len() + 1];
    seed::fill_standard_normal(&mut rng, &mut levels);
    let mut values = Vec::with_capacity(n);
    let mut piece = 0;
    for j in 0..n {
        while piece < cuts.len() && j >= cuts[piece] {
            piece += 1;
        }
        values.push(levels[piece]);
    }
    StepFunction::new(grid, values).expect("length matches grid")
}

/// Refinement levels used by [`kernel_variance`].
pub const KERNEL_LEVELS: [usize; 3] = [256, 512, 1024];

#[derive(Debug, Clone, Serialize)]
pub struct KernelVarianceReport {
    pub alpha: f64,
    pub beta: f64,
    pub length: f64,
    /// Norms² on the refinement levels.
    pub levels: Vec<f64>,
    /// Order assumed for the extrapolation.
    pub order: f64,
    /// Order implied by the three levels.
    pub measured_order: Option<f64>,
    /// Extrapolated standard deviation.
    pub value: f64,
}

/// `(E|∫_s^t (t-r)^{-α} dW^β(r)|²)^{1/2}` where the noise is started at `s`.
pub fn kernel_variance(s: f64, t: f64, alpha: f64, beta: HurstOrder) -> Result<f64> {
    Ok(kernel_variance_report(s, t, alpha, beta)?.value)
}

/// Cell averages of `(t-r)^{-α}` on `(s, t)` for `n` cells, then the
/// isometry norm on three levels and Richardson extrapolation with order
/// `2(β - α)`.
pub fn kernel_variance_report(s: f64, t: f64, alpha: f64, beta: HurstOrder) -> Result<KernelVarianceReport> {
    let b = beta.value();
    if !(alpha >= 0.0 && alpha < (b + 0.5).min(1.0)) {
        return Err(Error::param("alpha", alpha, "must satisfy 0 <= alpha < min(beta + 1/2, 1)"));
    }
    if !(s >= 0.0 && t > s && t.is_finite()) {
        return Err(Error::param("t", t, "need 0 <= s < t"));
    }
    if alpha >= b {
        return Err(Error::Divergent(format!(
            "(t-r)^(-{alpha}) has infinite isometry norm for beta = {b}: \
             its transform behaves like (t-r)^({b}-{alpha}-1/2), which is not square integrable"
        )));
    }
    let length = t - s;
    let mut levels = Vec::with_capacity(KERNEL_LEVELS.len());
    for &n in &KERNEL_LEVELS {
        let grid = TimeGrid::unit_start(length, n)?;
        let f = StepFunction::from_cell_integrals(grid, |a, c| {
            if alpha == 0.0 {
                c - a
            } else {
                ((length - a).powf(1.0 - alpha) - (length - c).powf(1.0 - alpha)) / (1.0 - alpha)
            }
        });
        levels.push(isometry_norm(&f, beta)?.powi(2));
    }
    let order = 2.0 * (b - alpha);
    let [n1, n2, n3] = [levels[0], levels[1], levels[2]];
    let (d1, d2) = (n2 - n1, n3 - n2);
    let tiny = 1e-14 * n3.abs();
    let measured_order = (d1.abs() > tiny && d2.abs() > tiny && d1 * d2 > 0.0).then(|| (d1 / d2).log2());
    if d1.abs() > tiny && d2.abs() > tiny {
        // A growing sequence of increments means the levels are not converging.
        if d1 * d2 < 0.0 || d2.abs() > d1.abs() {
            return Err(Error::Divergent(format!(
                "kernel norms do not converge under refinement: {levels:?}"
            )));
        }
    }
    let extrapolated = if d2.abs() <= tiny {
        n3
    } else {
        n3 + d2 / (2f64.powf(order) - 1.0)
    };
    Ok(KernelVarianceReport {
        alpha,
        beta: b,
        length,
        levels,
        order,
        measured_order,
        value: extrapolated.sqrt(),
    })
}

/// Quadratic form of the classical fBm increments,
/// `Σ_{ij} v_i v_j Cov(ΔW̃_i, ΔW̃_j)`.
pub fn increment_quadratic_form(f: &StepFunction, cov: &CovMatrix) -> Result<f64> {
    cov.grid.ensure_same(f.grid())?;
    let inc = cov.increment_covariance();
    let v = f.values();
    let n = v.len();
    Ok(compensated_sum((0..n).flat_map(|i| {
        let inc = &inc;
        (0..n).map(move |j| v[i] * v[j] * inc[i * n + j])
    })))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioBracket {
    pub beta: f64,
    pub n_samples: usize,
    pub min: f64,
    pub max: f64,
}

impl RatioBracket {
    /// `max / min`.
    pub fn spread(&self) -> f64 {
        self.max / self.min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEquivalenceReport {
    pub grid: TimeGrid,
    pub seed: u64,
    pub normalization: Normalization,
    pub brackets: Vec<RatioBracket>,
}

/// For each `β < ½`, the range of
/// `increment_quadratic_form(f) / isometry_norm(f)²` over `f_samples` random step
/// functions. The sample for a larger `f_samples` contains the smaller one.
pub fn norm_equivalence_report(
    betas: &[f64],
    f_samples: usize,
    seed: u64,
    grid: TimeGrid,
) -> Result<NormEquivalenceReport> {
    if f_samples == 0 {
        return Err(Error::param("f_samples", 0.0, "must be positive"));
    }
    let mut brackets = Vec::with_capacity(betas.len());
    for &b in betas {
        let beta = HurstOrder::new(b)?;
        if b >= 0.5 {
            return Err(Error::param(
                "beta",
                b,
                "norm equivalence with classical fBm only holds for beta < 1/2",
            ));
        }
        let cov = CovMatrix::new(grid, beta, CovKind::Classical(Normalization::Unhalved));
        let transform = IntegrandTransform::new(grid, beta);
        let ratios: Vec<f64> = (0..f_samples as u64)
            .map(|i| {
                let f = random_step_function(grid, seed, i);
                Ok(increment_quadratic_form(&f, &cov)? / transform.norm_sq(&f)?)
            })
            .collect::<Result<_>>()?;
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        brackets.push(RatioBracket {
            beta: b,
            n_samples: f_samples,
            min,
            max,
        });
    }
    Ok(NormEquivalenceReport {
        grid,
        seed,
        normalization: Normalization::Unhalved,
        brackets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{cov_liouville, sample_cholesky, variance_liouville};
    use crate::numerics::gamma;
    use crate::numerics::quadrature::gauss_kronrod;

    fn beta(b: f64) -> HurstOrder {
        HurstOrder::new(b).unwrap()
    }

    /// `‖g‖²` for `g = Γ^{-1}((b-s)^γ 1_{s<b} - (a-s)^γ 1_{s<a})`, by
    /// adaptive Gauss–Kronrod after removing the end-point singularities
    /// with `s = end - w^{1/(2γ+1)}`.
    fn indicator_oracle(a: f64, b: f64, beta: f64) -> f64 {
        let g = beta - 0.5;
        let e = 1.0 / (2.0 * g + 1.0);
        let gam = gamma(beta + 0.5);
        // (a, b): |g| = (b-s)^γ/Γ, singular at b
        let upper = gauss_kronrod(0.0, (b - a).powf(1.0 / e), 1e-15, 1e-13, 10_000, |w| {
            let d = w.powf(e);
            let v = d.powf(g) / gam;
            v * v * e * w.powf(e - 1.0)
        })
        .value;
        // (0, a): g = ((b-s)^γ - (a-s)^γ)/Γ, singular at a
        let lower = gauss_kronrod(0.0, a.powf(1.0 / e), 1e-15, 1e-13, 10_000, |w| {
            let d = w.powf(e);
            let v = ((b - a + d).powf(g) - d.powf(g)) / gam;
            v * v * e * w.powf(e - 1.0)
        })
        .value;
        upper + lower
    }

    #[test]
    fn brownian_norm_is_l2() {
        let g = TimeGrid::unit_start(1.0, 64).unwrap();
        let f = random_step_function(g, 1, 0);
        assert_eq!(isometry_norm(&f, beta(0.5)).unwrap(), f.l2_norm());
    }

    #[test]
    fn full_indicator_matches_variance() {
        for b in [0.1, 0.3, 0.7, 0.9] {
            let g = TimeGrid::unit_start(2.0, 128).unwrap();
            let f = StepFunction::constant(g, 1.0);
            let v = isometry_norm(&f, beta(b)).unwrap().powi(2);
            let exact = variance_liouville(2.0, beta(b));
            assert!((v - exact).abs() < 1e-12 * exact, "b={b}: {v} vs {exact}");
        }
    }

    #[test]
    fn interior_indicator_matches_printed_kernel() {
        let g = TimeGrid::unit_start(1.0, 64).unwrap();
        for b in [0.1, 0.25, 0.4, 0.6, 0.85] {
            let f = StepFunction::indicator(g, 16, 40).unwrap();
            let v = isometry_norm(&f, beta(b)).unwrap().powi(2);
            let o = indicator_oracle(0.25, 0.625, b);
            assert!((v - o).abs() < 1e-10 * o.max(1.0), "b={b}: {v} vs {o}");
        }
    }

    #[test]
    fn norm_matches_covariance_quadratic_form() {
        let g = TimeGrid::unit_start(1.0, 48).unwrap();
        for b in [0.15, 0.35, 0.65, 0.9] {
            let cov = CovMatrix::new(g, beta(b), CovKind::Liouville);
            for i in 0..5 {
                let f = random_step_function(g, 3, i);
                let q = increment_quadratic_form(&f, &cov).unwrap();
                let n = isometry_norm(&f, beta(b)).unwrap().powi(2);
                assert!((q - n).abs() < 1e-10 * n.max(1e-3), "b={b}: {q} vs {n}");
            }
        }
    }

    #[test]
    fn rule_step_is_converged() {
        let g = TimeGrid::unit_start(1.0, 32).unwrap();
        let f = random_step_function(g, 9, 2);
        for b in [0.05, 0.3, 0.8] {
            let coarse = isometry_norm(&f, beta(b)).unwrap();
            let gamma_exp = b - 0.5;
            let fine_rule = TanhSinhRule::for_singularity((2.0 * gamma_exp).min(0.0), RULE_STEP / 2.0);
            let d = f.left_indicator_coefficients();
            let mut total = 0.0;
            for k in 0..d.len() {
                total += fine_rule.integrate(0.0, 1.0, |_, u, _| {
                    let h: f64 = d[k..]
                        .iter()
                        .enumerate()
                        .map(|(m, dm)| dm * if m == 0 { u.powf(gamma_exp) } else { (m as f64 + u).powf(gamma_exp) })
                        .sum();
                    h * h
                });
            }
            let fine = (total * g.spacing().powf(2.0 * b)).sqrt() / gamma(b + 0.5);
            assert!((coarse - fine).abs() < 1e-13 * fine, "b={b}");
        }
    }

    #[test]
    fn evaluate_matches_printed_kernel() {
        let g = TimeGrid::unit_start(1.0, 8).unwrap();
        let f = StepFunction::indicator(g, 2, 5).unwrap();
        let t = IntegrandTransform::new(g, beta(0.3));
        let s = 0.1;
        let expected = ((0.625f64 - s).powf(-0.2) - (0.25f64 - s).powf(-0.2)) / gamma(0.8);
        assert!((t.evaluate(&f, s).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn discrete_route_converges_towards_exact() {
        for b in [0.3, 0.7] {
            let mut errs = Vec::new();
            for n in [64, 256, 1024] {
                let g = TimeGrid::unit_start(1.0, n).unwrap();
                let f = StepFunction::indicator(g, n / 4, n / 2).unwrap();
                let t = IntegrandTransform::new(g, beta(b));
                errs.push((t.discrete_norm(&f).unwrap() - t.norm(&f).unwrap()).abs());
            }
            assert!(errs[1] < errs[0] && errs[2] < errs[1], "b={b}: {errs:?}");
        }
    }

    #[test]
    fn boundary_continuity_for_smooth_integrand() {
        let g = TimeGrid::unit_start(1.0, 256).unwrap();
        let f = StepFunction::from_cell_integrals(g, |a, b| (a.cos() - b.cos()) + (b - a));
        let l2 = f.l2_norm();
        for b in [0.48, 0.52] {
            let n = isometry_norm(&f, beta(b)).unwrap();
            assert!((n / l2 - 1.0).abs() < 0.02, "b={b}: {n} vs {l2}");
        }
    }

    #[test]
    fn zero_integrand_integrates_to_zero() {
        let g = TimeGrid::unit_start(1.0, 16).unwrap();
        let ens = sample_cholesky(g, beta(0.3), CovKind::Liouville, 10, 0).unwrap();
        let e = integrate_mc(&StepFunction::zeros(g), beta(0.3), &ens).unwrap();
        assert_eq!(e.mean, 0.0);
        assert_eq!(e.variance, 0.0);
    }

    #[test]
    fn integral_is_linear_pathwise() {
        let g = TimeGrid::unit_start(1.0, 32).unwrap();
        let ens = sample_cholesky(g, beta(0.7), CovKind::Liouville, 20, 5).unwrap();
        let f = random_step_function(g, 2, 0);
        let h = random_step_function(g, 2, 1);
        let a = integrate_paths(&f, beta(0.7), &ens).unwrap();
        let b = integrate_paths(&h, beta(0.7), &ens).unwrap();
        let c = integrate_paths(&f.add(&h).unwrap(), beta(0.7), &ens).unwrap();
        for r in 0..20 {
            assert!((a.values[r] + b.values[r] - c.values[r]).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let g = TimeGrid::unit_start(1.0, 16).unwrap();
        let ens = sample_cholesky(g, beta(0.3), CovKind::Liouville, 4, 0).unwrap();
        let f = StepFunction::constant(g, 1.0);
        assert!(integrate_mc(&f, beta(0.4), &ens).is_err());
        let other = StepFunction::constant(TimeGrid::unit_start(1.0, 8).unwrap(), 1.0);
        assert!(integrate_mc(&other, beta(0.3), &ens).is_err());
    }

    #[test]
    fn kernel_variance_brownian_and_zero_order() {
        let v = kernel_variance(0.2, 0.7, 0.0, beta(0.5)).unwrap();
        assert!((v - 0.5f64.sqrt()).abs() < 1e-14);
        for b in [0.25, 0.75] {
            let v = kernel_variance(0.1, 0.6, 0.0, beta(b)).unwrap();
            let c0 = (1.0 / (2.0 * b)).sqrt() / gamma(b + 0.5);
            assert!((v - c0 * 0.5f64.powf(b)).abs() < 1e-12);
            assert!((v.powi(2) - cov_liouville(0.5, 0.5, beta(b)).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn kernel_variance_matches_closed_form() {
        // Transforming (t-r)^{-α} gives Γ(1-α)/Γ(β+½-α)·(t-u)^{β-α-½}.
        let closed = |a: f64, b: f64| gamma(1.0 - a) / gamma(b + 0.5 - a) / (2.0 * (b - a)).sqrt();
        for (a, b) in [(0.1, 0.25), (0.1, 0.5), (0.3, 0.5), (0.1, 0.75), (0.3, 0.75), (0.6, 0.9)] {
            let v = kernel_variance(0.0, 1.0, a, beta(b)).unwrap();
            let c = closed(a, b);
            assert!((v / c - 1.0).abs() < 1e-5, "a={a} b={b}: {v} vs {c}");
        }
    }

    #[test]
    fn kernel_variance_range_errors() {
        assert!(matches!(kernel_variance(0.0, 1.0, 0.3, beta(0.25)), Err(Error::Divergent(_))));
        assert!(matches!(
            kernel_variance(0.0, 1.0, 0.8, beta(0.25)),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(kernel_variance(0.5, 0.5, 0.1, beta(0.5)).is_err());
    }

    #[test]
    fn random_family_is_deterministic_and_nested() {
        let g = TimeGrid::unit_start(1.0, 64).unwrap();
        assert_eq!(random_step_function(g, 4, 17), random_step_function(g, 4, 17));
        assert_ne!(random_step_function(g, 4, 17), random_step_function(g, 4, 18));
        let small = norm_equivalence_report(&[0.3], 10, 1, g).unwrap();
        let large = norm_equivalence_report(&[0.3], 20, 1, g).unwrap();
        assert!(large.brackets[0].min <= small.brackets[0].min);
        assert!(large.brackets[0].max >= small.brackets[0].max);
        assert!(norm_equivalence_report(&[0.6], 10, 1, g).is_err());
    }

    #[test]
    fn single_indicator_ratio_is_positive() {
        let g = TimeGrid::unit_start(1.0, 64).unwrap();
        let f = StepFunction::indicator(g, 10, 30).unwrap();
        for b in [0.2, 0.4] {
            let cov = CovMatrix::new(g, beta(b), CovKind::Classical(Normalization::Unhalved));
            let r = increment_quadratic_form(&f, &cov).unwrap() / isometry_norm(&f, beta(b)).unwrap().powi(2);
            assert!(r.is_finite() && r > 0.0);
        }
    }
}
