//! Acceptance criteria, one test per criterion. Each test prints its
//! sub-checks and a final `criterion N ... PASS|FAIL` line to stderr
//! (unbuffered, so the lines show up even when output capture is on).

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use lfbm::cylindrical::{
    integrate_vector_mc, random_map, random_smooth_operator, representation_norm, representation_norm_sq,
    suff_condition_bound, CylindricalEnsemble, OperatorPath,
};
use lfbm::fbm::{cov_liouville, sample_cholesky};
use lfbm::frac_calc::indicator_reconstruction_error;
use lfbm::numerics::stats::linear_fit;
use lfbm::spde::{default_lags, existence_threshold_scan, GalerkinModel, MildSimulator, SeriesClass};
use lfbm::stoch_integral::{
    isometry_norm, kernel_variance, norm_equivalence_report, random_step_function, IsometryCheck,
    NormEquivalenceReport,
};
use lfbm::{CovKind, HurstOrder, Scheme, TimeGrid};

struct Criterion {
    id: u32,
    title: &'static str,
    lines: Vec<(bool, String)>,
    start: Instant,
}

impl Criterion {
    fn new(id: u32, title: &'static str) -> Self {
        Self {
            id,
            title,
            lines: Vec::new(),
            start: Instant::now(),
        }
    }

    fn check(&mut self, ok: bool, detail: impl Into<String>) -> bool {
        let detail = detail.into();
        let _ = writeln!(std::io::stderr(), "    [{}] {}", if ok { "ok" } else { "FAILED" }, detail);
        self.lines.push((ok, detail));
        ok
    }

    fn runtime(&mut self, limit: Duration) {
        let took = self.start.elapsed();
        self.check(took < limit, format!("runtime {:.2} s (limit {} s)", took.as_secs_f64(), limit.as_secs()));
    }

    /// Prints the verdict line and fails the test on any failed check.
    fn finish(self) {
        let failed: Vec<&String> = self.lines.iter().filter(|(ok, _)| !ok).map(|(_, d)| d).collect();
        let verdict = if failed.is_empty() { "PASS" } else { "FAIL" };
        let _ = writeln!(
            std::io::stderr(),
            "criterion {} ({}): {verdict} [{} of {} checks passed]",
            self.id,
            self.title,
            self.lines.len() - failed.len(),
            self.lines.len()
        );
        assert!(failed.is_empty(), "criterion {} failed: {failed:?}", self.id);
    }
}

fn beta(b: f64) -> HurstOrder {
    HurstOrder::new(b).unwrap()
}

#[test]
fn criterion_01_brownian_reduction() {
    let mut c = Criterion::new(1, "Brownian reduction");
    let grid = TimeGrid::unit_start(1.0, 255).unwrap();
    let nodes = grid.nodes();
    let half = beta(0.5);
    let mut worst_cov: f64 = 0.0;
    for &s in &nodes {
        for &t in &nodes {
            worst_cov = worst_cov.max((cov_liouville(s, t, half).unwrap() - s.min(t)).abs());
        }
    }
    c.check(worst_cov <= 1e-12, format!("max |cov - min(s,t)| over 256 nodes = {worst_cov:.2e}"));
    let mut worst_norm: f64 = 0.0;
    for i in 0..100 {
        let f = random_step_function(grid, 1, i);
        let l2 = f.l2_norm();
        worst_norm = worst_norm.max((isometry_norm(&f, half).unwrap() - l2).abs() / l2.max(1.0));
    }
    c.check(worst_norm <= 1e-12, format!("max isometry vs L2 error over 100 functions = {worst_norm:.2e}"));
    c.runtime(Duration::from_secs(1));
    c.finish();
}

#[test]
fn criterion_02_isometry() {
    let mut c = Criterion::new(2, "isometry for step functions");
    let grid = TimeGrid::unit_start(1.0, 64).unwrap();
    let mut failures = 0;
    let mut total = 0;
    for b in [0.1, 0.3, 0.7, 0.9] {
        let ens = sample_cholesky(grid, beta(b), CovKind::Liouville, 20_000, 2).unwrap();
        let mut worst: f64 = 0.0;
        let mut fails = 0;
        for i in 0..100 {
            let f = random_step_function(grid, 2, i);
            let row = IsometryCheck::new(&f, beta(b), &ens).unwrap();
            worst = worst.max(row.z_score.abs());
            total += 1;
            if !row.passes(4.0) {
                fails += 1;
            }
        }
        failures += fails;
        c.check(true, format!("beta = {b}: {fails} of 100 outside 4 SE, max |z| = {worst:.2}"));
    }
    c.check(failures <= 1, format!("{failures} of {total} rows outside 4 SE (at most 1 allowed)"));
    c.runtime(Duration::from_secs(120));
    c.finish();
}

#[test]
fn criterion_03_indicator_reconstruction() {
    let mut c = Criterion::new(3, "indicator reconstruction");
    let levels = [64usize, 128, 256, 512, 1024];
    for alpha in [0.1, 0.25, 0.4] {
        let errs: Vec<f64> = levels
            .iter()
            .map(|&n| indicator_reconstruction_error(TimeGrid::unit_start(1.0, n).unwrap(), alpha, 0.5).unwrap())
            .collect();
        let monotone = errs.windows(2).all(|w| w[1] < w[0]);
        let x: Vec<f64> = levels.iter().map(|&n| (n as f64).ln()).collect();
        let y: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let order = -linear_fit(&x, &y).unwrap().slope;
        c.check(monotone, format!("alpha = {alpha}: errors {:?} decrease monotonically", errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>()));
        c.check(order >= 0.4, format!("alpha = {alpha}: measured order {order:.3} >= 0.4"));
    }
    c.finish();
}

#[test]
fn criterion_04_kernel_variance_scaling() {
    let mut c = Criterion::new(4, "kernel variance scaling");
    let lengths: Vec<f64> = (-8..=-2).map(|k| 2f64.powi(k)).collect();
    for b in [0.25, 0.5, 0.75] {
        for a in [0.0, 0.1, 0.3] {
            if a >= (b + 0.5f64).min(1.0) {
                continue;
            }
            let values: Result<Vec<f64>, _> = lengths.iter().map(|&l| kernel_variance(0.0, l, a, beta(b))).collect();
            let values = match values {
                Ok(v) => v,
                Err(e) => {
                    c.check(false, format!("alpha = {a}, beta = {b}: {e}"));
                    continue;
                }
            };
            let x: Vec<f64> = lengths.iter().map(|l| l.ln()).collect();
            let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
            let slope = linear_fit(&x, &y).unwrap().slope;
            c.check(
                (slope - (b - a)).abs() <= 0.02,
                format!("alpha = {a}, beta = {b}: slope {slope:.5} vs {:.2}", b - a),
            );
            let consts: Vec<f64> = values.iter().zip(&lengths).map(|(v, l)| v / l.powf(b - a)).collect();
            let lo = consts.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = consts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            c.check(
                hi / lo - 1.0 <= 0.01,
                format!("alpha = {a}, beta = {b}: constant {lo:.6}..{hi:.6} over 2^-8..2^-2 (spread {:.2e})", hi / lo - 1.0),
            );
        }
    }
    c.finish();
}

#[test]
fn criterion_05_norm_equivalence() {
    let mut c = Criterion::new(5, "norm equivalence brackets");
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/norm_equivalence.json");
    let golden: NormEquivalenceReport = serde_json::from_str(&std::fs::read_to_string(golden_path).unwrap()).unwrap();
    let betas = [0.2, 0.3, 0.4];
    let half = norm_equivalence_report(&betas, 100, golden.seed, golden.grid).unwrap();
    let full = norm_equivalence_report(&betas, 200, golden.seed, golden.grid).unwrap();
    for ((h, f), g) in half.brackets.iter().zip(&full.brackets).zip(&golden.brackets) {
        c.check(
            f.min > 0.0 && f.max.is_finite(),
            format!("beta = {}: ratios in [{:.5}, {:.5}]", f.beta, f.min, f.max),
        );
        c.check(
            f.spread() <= g.spread() * (1.0 + 1e-12),
            format!("beta = {}: max/min {:.6} vs golden {:.6}", f.beta, f.spread(), g.spread()),
        );
        let widening = f.spread() / h.spread() - 1.0;
        c.check(widening <= 0.10, format!("beta = {}: widening 100 -> 200 samples {widening:.2e}", f.beta));
    }
    c.finish();
}

#[test]
fn criterion_06_vector_isometry() {
    let mut c = Criterion::new(6, "vector isometry and tensor identity");
    let grid = TimeGrid::unit_start(1.0, 32).unwrap();
    for b in [0.3, 0.5, 0.7] {
        let f = random_step_function(grid, 6, 0);
        let s = random_map(3, 4, 6, 0);
        let lhs = representation_norm(&OperatorPath::rank_one(&f, &s), beta(b)).unwrap();
        let rhs = isometry_norm(&f, beta(b)).unwrap() * s.hs_norm();
        c.check((lhs - rhs).abs() <= 1e-12 * rhs, format!("beta = {b}: rank-one identity error {:.2e}", (lhs - rhs).abs() / rhs));
        for m in [1, 2, 4] {
            let ens = CylindricalEnsemble::sample(grid, beta(b), m, Scheme::Cholesky, 20_000, 6).unwrap();
            for e in [1, 2, 4] {
                let phi = OperatorPath::sample_right(grid, &random_smooth_operator(m, e, 1.0, 6, (10 * m + e) as u64));
                let oracle = representation_norm_sq(&phi, beta(b)).unwrap();
                let (_, est) = integrate_vector_mc(&phi, &ens).unwrap();
                let z = est.z_score(oracle);
                c.check(z.abs() <= 4.0, format!("beta = {b}, (m, e) = ({m}, {e}): z = {z:+.2}"));
            }
        }
    }
    c.finish();
}

#[test]
fn criterion_07_derivative_bound() {
    let mut c = Criterion::new(7, "derivative bound");
    let grid = TimeGrid::unit_start(1.0, 64).unwrap();
    for b in [0.2, 0.35] {
        let mut worst: f64 = 0.0;
        let mut violations = 0;
        for i in 0..50 {
            let phi = random_smooth_operator(2, 3, 1.0, 7, i);
            let r = suff_condition_bound(&phi, beta(b), grid).unwrap();
            worst = worst.max(r.actual / r.bound);
            if !r.holds(0.005) {
                violations += 1;
            }
        }
        c.check(violations == 0, format!("beta = {b}: {violations} violations, max actual/bound = {worst:.4}"));
    }
    c.finish();
}

#[test]
fn criterion_08_existence_threshold() {
    let mut c = Criterion::new(8, "existence threshold");
    for d in [1usize, 2] {
        let center = d as f64 / 4.0;
        let betas = [center - 0.1, center + 0.1];
        let r = existence_threshold_scan(d, &betas, 0.0, &[8, 16, 32, 64], 1.0).unwrap();
        for row in &r.rows {
            let expected = if row.beta > center { SeriesClass::Convergent } else { SeriesClass::Divergent };
            c.check(
                row.classification == expected,
                format!("d = {d}, beta = {:.2}: {:?} (expected {expected:?})", row.beta, row.classification),
            );
            let target = -4.0 * row.beta;
            c.check(
                (row.wavenumber_exponent - target).abs() <= 0.15,
                format!("d = {d}, beta = {:.2}: tail exponent {:.4} vs {target:.2}", row.beta, row.wavenumber_exponent),
            );
        }
    }
    c.runtime(Duration::from_secs(120));
    c.finish();
}

#[test]
fn criterion_09_regularity() {
    let mut c = Criterion::new(9, "temporal regularity");
    let grid = TimeGrid::unit_start(1.0, 256).unwrap();
    let lags = default_lags(&grid);
    let thetas = [0.0, 0.1];
    let mut est = Vec::new();
    for b in [0.5, 0.75] {
        let model = GalerkinModel::new(1, 64, 0.0).unwrap();
        let sim = MildSimulator::new(model, grid, beta(b), 9).unwrap();
        let stats = sim.statistics(2000, &thetas, &lags).unwrap();
        for (sf, &theta) in stats.structure.iter().zip(&thetas) {
            let h = sf.regularity().unwrap().holder_estimate;
            c.check(
                h >= b - theta - 0.1,
                format!("beta = {b}, theta = {theta}: estimate {h:.4} >= {:.2}", b - theta - 0.1),
            );
            est.push(((b, theta), h));
        }
    }
    let get = |b: f64, t: f64| est.iter().find(|(k, _)| *k == (b, t)).unwrap().1;
    let monotone = get(0.75, 0.0) > get(0.5, 0.0)
        && get(0.75, 0.1) > get(0.5, 0.1)
        && get(0.5, 0.0) > get(0.5, 0.1)
        && get(0.75, 0.0) > get(0.75, 0.1);
    c.check(monotone, "estimates increase in beta and decrease in theta");
    let h = get(0.5, 0.0);
    c.check((h - 0.25).abs() <= 0.05, format!("beta = 0.5, theta = 0: {h:.4} within 0.05 of 0.25"));
    c.runtime(Duration::from_secs(300));
    c.finish();
}

fn run_cli(args: &[&str], out: &Path) -> u8 {
    let mut argv: Vec<String> = vec!["lfbm".into()];
    argv.extend(args.iter().map(|s| s.to_string()));
    argv.push("--out_dir".into());
    argv.push(out.display().to_string());
    let cli = <lfbm::cli::Cli as clap::Parser>::try_parse_from(argv).unwrap();
    lfbm::cli::exit_code(&lfbm::cli::execute(&cli.command))
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_10_determinism() {
    let mut c = Criterion::new(10, "determinism");
    let runs: [&[&str]; 6] = [
        &["fbm-sample", "--beta", "0.7", "--n_paths", "300", "--compare_schemes", "true"],
        &["frac-apply", "--function", "power", "--op", "derivative"],
        &["isometry", "--n_paths", "500", "--n_functions", "5", "--n_cells", "16"],
        &["norm-compare", "--f_samples", "20", "--n_cells", "32"],
        &["cylindrical", "--n_paths", "300", "--n_cells", "8", "--betas", "0.3"],
        &["heat", "--cutoff", "8", "--n_cells", "64", "--n_paths", "50", "--beta", "0.7"],
    ];
    let root = tempfile::tempdir().unwrap();
    for args in runs {
        let a = root.path().join(format!("{}-a", args[0]));
        let b = root.path().join(format!("{}-b", args[0]));
        run_cli(args, &a);
        run_cli(args, &b);
        let (fa, fb) = (dir_bytes(&a), dir_bytes(&b));
        let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
        c.check(!fa.is_empty() && fa == fb, format!("{}: {names:?} byte-identical", args[0]));
    }
    c.finish();
}
