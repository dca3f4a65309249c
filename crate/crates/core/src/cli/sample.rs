//! `fbm-sample` and `frac-apply`.

use serde::Serialize;

use super::config::params;
use super::report::{csv_preamble, write_csv, Check, RunReport};
use crate::error::{Error, Result};
use crate::fbm::{self, CovKind, CovMatrix, EnsembleSummary, HurstOrder, Normalization, PathEnsemble, Scheme};
use crate::frac_calc::FracKernelMatrix;
use crate::grid::{NodeValues, Side, StepFunction, TimeGrid};
use crate::io;
use crate::numerics::stats::McEstimate;

params!(FbmSampleArgs => FbmSample {
    beta: f64 = 0.5, "Hurst order in (0, 1)";
    kind: String = "liouville".into(), "liouville or classical";
    normalization: Normalization = Normalization::Unhalved, "classical covariance form: unhalved or conventional";
    scheme: Scheme = Scheme::Cholesky, "cholesky or moving_average";
    t_end: f64 = 1.0, "horizon T";
    n_cells: usize = 64, "grid cells";
    n_paths: usize = 2000, "replicates";
    seed: u64 = 0, "master seed";
    compare_schemes: bool = false, "also sample with the other scheme and compare marginal variances";
    write_paths: bool = true, "write the ensemble CSV";
    z_max: f64 = 4.0, "z-score threshold for statistical checks";
});

fn cov_kind(kind: &str, normalization: Normalization) -> Result<CovKind> {
    match kind {
        "liouville" => Ok(CovKind::Liouville),
        "classical" => Ok(CovKind::Classical(normalization)),
        other => Err(Error::Config(format!("unknown kind `{other}` (expected liouville or classical)"))),
    }
}

/// Nodes at the quarter points of the grid, deduplicated.
fn probe_nodes(n_cells: usize) -> Vec<usize> {
    let mut v: Vec<usize> = [n_cells / 4, n_cells / 2, 3 * n_cells / 4, n_cells]
        .into_iter()
        .filter(|&i| i > 0)
        .collect();
    v.dedup();
    v
}

fn products(ens: &PathEnsemble, i: usize, j: usize) -> McEstimate {
    let xs: Vec<f64> = ens.paths().map(|p| p[i] * p[j]).collect();
    McEstimate::from_samples(&xs)
}

#[derive(Serialize)]
struct FbmSampleResults {
    summary: EnsembleSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<EnsembleSummary>,
}

pub fn fbm_sample(args: &FbmSampleArgs) -> Result<bool> {
    let (p, echo) = args.resolve()?;
    let beta = HurstOrder::new(p.beta)?;
    let kind = cov_kind(&p.kind, p.normalization)?;
    let grid = TimeGrid::unit_start(p.t_end, p.n_cells)?;
    if p.n_paths < 2 {
        return Err(Error::param("n_paths", p.n_paths as f64, "need at least two paths"));
    }
    let ens = fbm::sample(grid, beta, kind, p.scheme, p.n_paths, p.seed)?;
    let cov = CovMatrix::new(grid, beta, kind);
    let nodes = probe_nodes(p.n_cells);
    let mut checks = Vec::new();
    for (a, &i) in nodes.iter().enumerate() {
        for &j in &nodes[a..] {
            let name = format!("cov(t_{i}, t_{j})");
            checks.push(Check::statistical(name, cov.node_entry(i, j), &products(&ens, i, j), p.z_max));
        }
    }
    let mut comparison = None;
    if p.compare_schemes {
        if kind != CovKind::Liouville {
            return Err(Error::Config("compare_schemes needs kind = liouville".into()));
        }
        let other = match p.scheme {
            Scheme::Cholesky => Scheme::MovingAverage,
            Scheme::MovingAverage => Scheme::Cholesky,
        };
        let alt = fbm::sample(grid, beta, kind, other, p.n_paths, p.seed)?;
        for &i in &nodes {
            let (m1, m2) = (products(&ens, i, i), products(&alt, i, i));
            let se = m1.std_error.hypot(m2.std_error);
            let z = if se > 0.0 { (m1.mean - m2.mean) / se } else { 0.0 };
            checks.push(
                Check::z(format!("var(t_{i}) {} vs {other}", p.scheme), m2.mean, m1.mean, se, z, p.z_max)
                    .with_note("both schemes share the master seed; the independent-sample SE is conservative"),
            );
            checks.push(Check::statistical(format!("var(t_{i}) {other}"), cov.node_entry(i, i), &m2, p.z_max));
        }
        comparison = Some(alt.summary());
    }
    let preamble = csv_preamble("fbm-sample", Some(p.seed), &echo);
    if p.write_paths {
        write_csv(&p.out_dir.join("fbm_paths.csv"), &preamble, &io::ensemble_csv(&ens))?;
    }
    super::finish(
        RunReport::new(
            "fbm-sample",
            Some(p.seed),
            echo,
            checks,
            FbmSampleResults {
                summary: ens.summary(),
                comparison,
            },
        ),
        &p.out_dir.join("fbm_report.json"),
    )
}

params!(FracApplyArgs => FracApply {
    alpha: f64 = 0.3, "fractional order";
    side: Side = Side::Left, "left (from 0) or right (from T)";
    op: String = "integral".into(), "integral or derivative";
    t_end: f64 = 1.0, "horizon T";
    n_cells: usize = 64, "grid cells";
    function: String = "indicator".into(), "indicator, power, sine or file";
    a: f64 = 0.25, "indicator start";
    b: f64 = 0.75, "indicator end";
    p: f64 = 0.5, "power exponent";
    input: String = String::new(), "t,value CSV for function = file";
    tolerance: f64 = 1e-10, "round-trip tolerance (relative to max |input|)";
});

#[derive(Serialize)]
struct FracApplyResults {
    grid: TimeGrid,
    input_l2: f64,
    output_l2: f64,
    round_trip_error: f64,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn frac_apply(args: &FracApplyArgs) -> Result<bool> {
    let (p, echo) = args.resolve()?;
    let file_input = match p.function.as_str() {
        "file" => {
            if p.input.is_empty() {
                return Err(Error::Config("function = file needs an input path".into()));
            }
            Some(io::read_step_function_csv(&io::read_file(p.input.as_ref())?)?)
        }
        "indicator" | "power" | "sine" => None,
        other => return Err(Error::Config(format!("unknown function `{other}`"))),
    };
    let grid = match &file_input {
        Some(f) => *f.grid(),
        None => TimeGrid::unit_start(p.t_end, p.n_cells)?,
    };
    let (a, b, q, t_end) = (p.a, p.b, p.p, grid.t_end());
    let pointwise = |t: f64| match p.function.as_str() {
        "indicator" => f64::from(t > a && t <= b),
        "power" => t.powf(q),
        _ => (2.0 * std::f64::consts::PI * t / t_end).sin(),
    };
    let kernel = FracKernelMatrix::new(grid, p.alpha, p.side)?;
    let preamble = csv_preamble("frac-apply", None, &echo);
    let out_csv = p.out_dir.join("frac_apply.csv");
    let (input_l2, output_l2, err, scale) = match p.op.as_str() {
        "integral" => {
            let f = file_input.unwrap_or_else(|| {
                StepFunction::from_cell_integrals(grid, |x, y| match p.function.as_str() {
                    "indicator" => (y.min(b) - x.max(a)).max(0.0),
                    "power" => (y.powf(q + 1.0) - x.powf(q + 1.0)) / (q + 1.0),
                    _ => {
                        let w = 2.0 * std::f64::consts::PI / t_end;
                        ((w * x).cos() - (w * y).cos()) / w
                    }
                })
            });
            let g = kernel.apply(&f)?;
            let back = kernel.solve_derivative(&g)?;
            write_csv(&out_csv, &preamble, &io::node_values_csv(&g))?;
            (f.l2_norm(), g.l2_norm(), max_diff(back.values(), f.values()), max_abs(f.values()))
        }
        "derivative" => {
            let g = match file_input {
                Some(f) => NodeValues::new(grid, p.side, f.into_values())?,
                None => NodeValues::sample(grid, p.side, pointwise),
            };
            let d = kernel.solve_derivative(&g)?;
            let back = kernel.apply(&d)?;
            write_csv(&out_csv, &preamble, &io::step_function_csv(&d))?;
            (g.l2_norm(), d.l2_norm(), max_diff(&back.values, &g.values), max_abs(&g.values))
        }
        other => return Err(Error::Config(format!("unknown op `{other}` (expected integral or derivative)"))),
    };
    let rel = if scale > 0.0 { err / scale } else { err };
    let checks = vec![Check::deterministic("round trip", 0.0, rel, rel, p.tolerance)];
    super::finish(
        RunReport::new(
            "frac-apply",
            None,
            echo,
            checks,
            FracApplyResults {
                grid,
                input_l2,
                output_l2,
                round_trip_error: rel,
            },
        ),
        &p.out_dir.join("frac_apply.json"),
    )
}
