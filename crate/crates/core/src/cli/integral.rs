//! `isometry`, `kernel-variance`, `norm-compare` and `cylindrical`.

use serde::Serialize;

use super::config::{params, List};
use super::report::{Check, RunReport};
use crate::cylindrical::{
    integrate_vector_mc, random_map, random_smooth_operator, representation_norm, representation_norm_sq,
    suff_condition_bound, CylindricalEnsemble, OperatorPath, SuffConditionBound,
};
use crate::error::{Error, Result};
use crate::fbm::{self, cov_liouville, CovKind, CovMatrix, HurstOrder, Scheme};
use crate::grid::{StepFunction, TimeGrid};
use crate::io;
use crate::stoch_integral::{
    increment_quadratic_form, isometry_norm, kernel_variance_report, norm_equivalence_report, random_step_function,
    IsometryCheck, KernelVarianceReport, NormEquivalenceReport,
};

params!(IsometryArgs => Isometry {
    betas: List<f64> = List::of([0.1, 0.3, 0.7, 0.9]), "Hurst orders";
    n_functions: usize = 100, "random step functions per order";
    n_paths: usize = 20000, "replicates per order";
    t_end: f64 = 1.0, "horizon T";
    n_cells: usize = 64, "grid cells";
    seed: u64 = 0, "master seed";
    scheme: Scheme = Scheme::Cholesky, "cholesky or moving_average";
    z_max: f64 = 4.0, "z-score threshold";
    tolerance: f64 = 1e-10, "relative tolerance of the deterministic rows";
});

#[derive(Serialize)]
struct IsometryResults {
    rows: Vec<IsometryCheck>,
}

pub fn isometry(args: &IsometryArgs) -> Result<bool> {
    let (p, echo) = args.resolve()?;
    let grid = TimeGrid::unit_start(p.t_end, p.n_cells)?;
    let n = p.n_cells;
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    let half = HurstOrder::new(0.5)?;
    let f0 = random_step_function(grid, p.seed, 0);
    checks.push(Check::relative("beta=0.5: L2 norm", f0.l2_norm(), isometry_norm(&f0, half)?, p.tolerance));
    for &b in &p.betas.0 {
        let beta = HurstOrder::new(b)?;
        let one = StepFunction::constant(grid, 1.0);
        checks.push(Check::relative(
            format!("beta={b}: full indicator"),
            cov_liouville(p.t_end, p.t_end, beta)?.sqrt(),
            isometry_norm(&one, beta)?,
            p.tolerance,
        ));
        let inner = StepFunction::indicator(grid, n / 4, (3 * n / 4).max(n / 4 + 1))?;
        let cov = CovMatrix::new(grid, beta, CovKind::Liouville);
        checks.push(Check::relative(
            format!("beta={b}: interior indicator"),
            increment_quadratic_form(&inner, &cov)?.sqrt(),
            isometry_norm(&inner, beta)?,
            p.tolerance,
        ));
        let ens = fbm::sample(grid, beta, CovKind::Liouville, p.scheme, p.n_paths, p.seed)?;
        for i in 0..p.n_functions {
            let f = random_step_function(grid, p.seed, i as u64);
            let row = IsometryCheck::new(&f, beta, &ens)?;
            checks.push(Check::z(
                format!("beta={b}: f#{i}"),
                row.oracle_variance,
                row.mc_variance,
                row.std_error,
                row.z_score,
                p.z_max,
            ));
            rows.push(row);
        }
    }
    super::finish(
        RunReport::new("isometry", Some(p.seed), echo, checks, IsometryResults { rows }),
        &p.out_dir.join("isometry_report.json"),
    )
}

params!(KernelVarianceArgs => KernelVariance {
    alphas: List<f64> = List::of([0.0, 0.1, 0.3]), "kernel exponents";
    betas: List<f64> = List::of([0.25, 0.5, 0.75]), "Hurst orders";
    min_log2: i32 = -8, "smallest length 2^min_log2";
    max_log2: i32 = -2, "largest length 2^max_log2";
    s: f64 = 0.0, "left end point";
    slope_tol: f64 = 0.02, "tolerance of the fitted slope";
    scale_tol: f64 = 0.01, "relative spread allowed in the extracted constant";
});

#[derive(Serialize)]
struct KernelRow {
    alpha: f64,
    beta: f64,
    lengths: Vec<f64>,
    reports: Vec<KernelVarianceReport>,
    slope: Option<f64>,
    constants: Vec<f64>,
    error: Option<String>,
}

pub fn kernel_variance(args: &KernelVarianceArgs) -> Result<bool> {
    let (p, echo) = args.resolve()?;
    if p.min_log2 >= p.max_log2 {
        return Err(Error::Config("min_log2 must be below max_log2".into()));
    }
    let lengths: Vec<f64> = (p.min_log2..=p.max_log2).map(|k| 2f64.powi(k)).collect();
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for &b in &p.betas.0 {
        let beta = HurstOrder::new(b)?;
        for &a in &p.alphas.0 {
            if !(a >= 0.0 && a < (b + 0.5).min(1.0)) {
                continue;
            }
            let reports: Result<Vec<_>> = lengths.iter().map(|&l| kernel_variance_report(p.s, p.s + l, a, beta)).collect();
            let name = format!("alpha={a}, beta={b}");
            match reports {
                Ok(reports) => {
                    let x: Vec<f64> = lengths.iter().map(|l| l.ln()).collect();
                    let y: Vec<f64> = reports.iter().map(|r| r.value.ln()).collect();
                    let slope = crate::numerics::stats::linear_fit(&x, &y).map(|f| f.slope).unwrap_or(f64::NAN);
                    let constants: Vec<f64> = reports.iter().zip(&lengths).map(|(r, l)| r.value / l.powf(b - a)).collect();
                    let lo = constants.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = constants.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    checks.push(Check::deterministic(format!("{name}: slope"), b - a, slope, (slope - (b - a)).abs(), p.slope_tol));
                    checks.push(Check::deterministic(format!("{name}: constant spread"), lo, hi, hi / lo - 1.0, p.scale_tol));
                    rows.push(KernelRow {
                        alpha: a,
                        beta: b,
                        lengths: lengths.clone(),
                        reports,
                        slope: Some(slope),
                        constants,
                        error: None,
                    });
                }
                Err(e @ Error::Divergent(_)) => {
                    checks.push(
                        Check::deterministic(format!("{name}: slope"), b - a, f64::INFINITY, f64::INFINITY, p.slope_tol)
                            .with_note(e.to_string()),
                    );
                    rows.push(KernelRow {
                        alpha: a,
                        beta: b,
                        lengths: lengths.clone(),
                        reports: Vec::new(),
                        slope: None,
                        constants: Vec::new(),
                        error: Some(e.to_string()),
                    });
                }
                Err(e) => return Err(e),
            }
        }
    }
    super::finish(
        RunReport::new("kernel-variance", None, echo, checks, rows),
        &p.out_dir.join("kernel_variance.json"),
    )
}

params!(NormCompareArgs => NormCompare {
    betas: List<f64> = List::of([0.2, 0.3, 0.4]), "Hurst orders below 1/2";
    f_samples: usize = 200, "random step functions (the half sample is reported too)";
    t_end: f64 = 1.0, "horizon T";
    n_cells: usize = 256, "grid cells";
    seed: u64 = 0, "master seed";
    golden: String = String::new(), "JSON bracket report to compare against";
    widening_tol: f64 = 0.10, "allowed relative widening when the sample doubles";
});

#[derive(Serialize)]
struct NormCompareResults {
    half: NormEquivalenceReport,
    full: NormEquivalenceReport,
}

pub fn norm_compare(args: &NormCompareArgs) -> Result<bool> {
    let (p, echo) = args.resolve()?;
    if p.f_samples < 2 {
        return Err(Error::param("f_samples", p.f_samples as f64, "need at least two samples"));
    }
    let grid = TimeGrid::unit_start(p.t_end, p.n_cells)?;
    let half = norm_equivalence_report(&p.betas.0, p.f_samples / 2, p.seed, grid)?;
    let full = norm_equivalence_report(&p.betas.0, p.f_samples, p.seed, grid)?;
    let golden: Option<NormEquivalenceReport> = if p.golden.is_empty() {
        None
    } else {
        Some(serde_json::from_str(&io::read_file(p.golden.as_ref())?)?)
    };
    let mut checks = Vec::new();
    for (h, f) in half.brackets.iter().zip(&full.brackets) {
        let widening = f.spread() / h.spread() - 1.0;
        checks.push(Check::deterministic(
            format!("beta={}: widening", f.beta),
            h.spread(),
            f.spread(),
            widening,
            p.widening_tol,
        ));
        if let Some(g) = &golden {
            let g = g
                .brackets
                .iter()
                .find(|g| g.beta == f.beta && g.n_samples == f.n_samples)
                .ok_or_else(|| Error::Config(format!("golden file has no bracket for beta = {}", f.beta)))?;
            let excess = (f.spread() / g.spread() - 1.0).max(0.0);
            checks.push(Check::deterministic(format!("beta={}: golden", f.beta), g.spread(), f.spread(), excess, 1e-9));
        }
    }
    super::finish(
        RunReport::new("norm-compare", Some(p.seed), echo, checks, NormCompareResults { half, full }),
        &p.out_dir.join("norm_compare.json"),
    )
}

params!(CylindricalArgs => Cylindrical {
    betas: List<f64> = List::of([0.3, 0.5, 0.7]), "Hurst orders";
    noise_dims: List<usize> = List::of([1, 2, 4]), "noise dimensions m";
    state_dims: List<usize> = List::of([1, 2, 4]), "state dimensions e";
    n_paths: usize = 20000, "replicates";
    t_end: f64 = 1.0, "horizon T";
    n_cells: usize = 32, "grid cells";
    seed: u64 = 0, "master seed";
    scheme: Scheme = Scheme::Cholesky, "cholesky or moving_average";
    phi: String = String::new(), "operator path JSON {m, e, grid, cells}; random smooth paths when empty";
    z_max: f64 = 4.0, "z-score threshold";
    tolerance: f64 = 1e-12, "relative tolerance of the rank-one identity";
    bound_tol: f64 = 0.005, "relative slack of the derivative bound";
});

#[derive(Serialize)]
struct CylindricalRow {
    beta: f64,
    m: usize,
    e: usize,
    oracle: f64,
    estimate: f64,
    std_error: f64,
    max_cross_correlation: f64,
}

#[derive(Serialize)]
struct CylindricalResults {
    rows: Vec<CylindricalRow>,
    bounds: Vec<SuffConditionBound>,
}

pub fn cylindrical(args: &CylindricalArgs) -> Result<bool> {
    let (p, echo) = args.resolve()?;
    let given: Option<OperatorPath> = if p.phi.is_empty() {
        None
    } else {
        Some(serde_json::from_str(&io::read_file(p.phi.as_ref())?)?)
    };
    let grid = match &given {
        Some(phi) => *phi.grid(),
        None => TimeGrid::unit_start(p.t_end, p.n_cells)?,
    };
    let shapes: Vec<(usize, usize)> = match &given {
        Some(phi) => vec![(phi.dim_noise(), phi.dim_state())],
        None => p
            .noise_dims
            .0
            .iter()
            .flat_map(|&m| p.state_dims.0.iter().map(move |&e| (m, e)))
            .collect(),
    };
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    let mut bounds = Vec::new();
    for &b in &p.betas.0 {
        let beta = HurstOrder::new(b)?;
        let f = random_step_function(grid, p.seed, 0);
        let s = random_map(2, 3, p.seed, 0);
        let rank_one = OperatorPath::rank_one(&f, &s);
        checks.push(Check::relative(
            format!("beta={b}: rank-one identity"),
            isometry_norm(&f, beta)? * s.hs_norm(),
            representation_norm(&rank_one, beta)?,
            p.tolerance,
        ));
        let mut ensembles: Vec<(usize, CylindricalEnsemble)> = Vec::new();
        for (idx, &(m, e)) in shapes.iter().enumerate() {
            if !ensembles.iter().any(|(k, _)| *k == m) {
                ensembles.push((m, CylindricalEnsemble::sample(grid, beta, m, p.scheme, p.n_paths, p.seed)?));
            }
            let ens = &ensembles.iter().find(|(k, _)| *k == m).expect("sampled above").1;
            let smooth = random_smooth_operator(m, e, grid.t_end(), p.seed, idx as u64);
            let phi = match &given {
                Some(phi) => phi.clone(),
                None => OperatorPath::sample_right(grid, &smooth),
            };
            let oracle = representation_norm_sq(&phi, beta)?;
            let (_, est) = integrate_vector_mc(&phi, ens)?;
            checks.push(Check::statistical(format!("beta={b}, m={m}, e={e}: E|X|^2"), oracle, &est, p.z_max));
            rows.push(CylindricalRow {
                beta: b,
                m,
                e,
                oracle,
                estimate: est.mean,
                std_error: est.std_error,
                max_cross_correlation: ens.max_cross_correlation(),
            });
            if b < 0.5 && given.is_none() && grid.t_start() == 0.0 {
                let bound = suff_condition_bound(&smooth, beta, grid)?;
                let excess = (bound.actual / bound.bound - 1.0).max(0.0);
                checks.push(Check::deterministic(
                    format!("beta={b}, m={m}, e={e}: derivative bound"),
                    bound.bound,
                    bound.actual,
                    excess,
                    p.bound_tol,
                ));
                bounds.push(bound);
            }
        }
    }
    super::finish(
        RunReport::new("cylindrical", Some(p.seed), echo, checks, CylindricalResults { rows, bounds }),
        &p.out_dir.join("cylindrical.json"),
    )
}
