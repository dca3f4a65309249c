//! `heat` and `threshold-scan`.

use serde::Serialize;

use super::config::{params, List};
use super::report::{csv_preamble, write_csv, Check, RunReport};
use crate::error::{Error, Result};
use crate::fbm::HurstOrder;
use crate::grid::TimeGrid;
use crate::io;
use crate::spde::{
    default_lags, existence_threshold_scan, series_tail, GalerkinModel, MildSimulator, RegularityReport, SeriesClass,
    SeriesTail, StructureFunction, ThresholdReport,
};
use crate::svg::{LinePlot, Series};

/// `β - θ > d/4`, the condition for the `E_θ` variance series to converge.
fn expected_class(dim: usize, beta: f64, theta: f64) -> SeriesClass {
    if beta - theta > dim as f64 / 4.0 {
        SeriesClass::Convergent
    } else {
        SeriesClass::Divergent
    }
}

fn class_name(c: SeriesClass) -> &'static str {
    match c {
        SeriesClass::Convergent => "convergent",
        SeriesClass::Divergent => "divergent",
    }
}

params!(HeatArgs => Heat {
    d: usize = 1, "spatial dimension (1 or 2)";
    cutoff: usize = 64, "Galerkin cutoff K per axis";
    beta: f64 = 0.5, "Hurst order";
    theta: f64 = 0.0, "E_theta weight for the norm CSV and the series classification";
    thetas: List<f64> = List::of([0.0, 0.1]), "E_theta weights of the structure functions";
    t_end: f64 = 1.0, "horizon T";
    n_cells: usize = 256, "time cells";
    n_paths: usize = 2000, "replicates";
    seed: u64 = 0, "master seed";
    lags: List<usize> = List::default(), "structure-function lags in cells (default: powers of two from T/512 to T/16)";
    holder_margin: f64 = 0.1, "required Hölder estimate is beta - theta - holder_margin";
    z_max: f64 = 4.0, "z-score threshold";
});

#[derive(Serialize)]
struct StructureEntry {
    structure: StructureFunction,
    exact: Vec<f64>,
    regularity: Option<RegularityReport>,
}

#[derive(Serialize)]
struct HeatResults {
    tail: SeriesTail,
    classification: SeriesClass,
    expected_classification: SeriesClass,
    expected_norm_sq: f64,
    structure: Vec<StructureEntry>,
}

pub fn heat(args: &HeatArgs) -> Result<bool> {
    let (p, echo) = args.resolve()?;
    let beta = HurstOrder::new(p.beta)?;
    let grid = TimeGrid::unit_start(p.t_end, p.n_cells)?;
    let model = GalerkinModel::new(p.d, p.cutoff, p.theta)?;
    let lags = if p.lags.0.is_empty() { default_lags(&grid) } else { p.lags.0.clone() };
    let mut thetas = p.thetas.0.clone();
    if !thetas.contains(&p.theta) {
        thetas.insert(0, p.theta);
    }
    let tail = series_tail(&model, beta, p.theta, p.t_end)?;
    let classification = if tail.convergent {
        SeriesClass::Convergent
    } else {
        SeriesClass::Divergent
    };
    let expected = expected_class(p.d, p.beta, p.theta);
    let mut checks = vec![Check::holds(
        format!("classification {} (expected {})", class_name(classification), class_name(expected)),
        classification == expected,
    )];

    let sim = MildSimulator::new(model.clone(), grid, beta, p.seed)?;
    let stats = sim.statistics(p.n_paths, &thetas, &lags)?;
    let main = thetas.iter().position(|&t| t == p.theta).expect("inserted above");
    let expected_norm_sq = model.expected_norm_sq(p.t_end, beta, p.theta)?;
    let last = stats.norm_sq[main].last().expect("grid has nodes");
    checks.push(Check::statistical(
        format!("E|U(T)|^2 theta={}", p.theta),
        expected_norm_sq,
        last,
        p.z_max,
    ));

    let mut entries = Vec::new();
    let mut estimates = Vec::new();
    for (sf, &theta) in stats.structure.iter().zip(&thetas) {
        let exact = sim.exact_structure(theta, &lags);
        for (i, &m) in lags.iter().enumerate() {
            checks.push(Check::z(
                format!("S(h) theta={theta}, lag={m}"),
                exact[i],
                sf.values[i],
                sf.std_errors[i],
                (sf.values[i] - exact[i]) / sf.std_errors[i],
                p.z_max,
            ));
        }
        let converges = series_tail(&model, beta, theta, p.t_end)?.convergent;
        let regularity = if converges && lags.len() >= 2 { Some(sf.regularity()?) } else { None };
        match &regularity {
            Some(r) => {
                let bound = p.beta - theta - p.holder_margin;
                checks.push(Check::at_least(format!("Hölder estimate theta={theta}"), bound, r.holder_estimate));
                estimates.push((theta, r.holder_estimate));
            }
            None => log::warn!("no Hölder estimate for theta = {theta}: the series diverges or too few lags"),
        }
        entries.push(StructureEntry {
            structure: sf.clone(),
            exact,
            regularity,
        });
    }
    estimates.sort_by(|a, b| a.0.total_cmp(&b.0));
    if estimates.len() >= 2 {
        let monotone = estimates.windows(2).all(|w| w[1].1 <= w[0].1);
        checks.push(Check::holds("Hölder estimate non-increasing in theta", monotone));
    }

    let preamble = csv_preamble("heat", Some(p.seed), &echo);
    let rows: Vec<Vec<f64>> = stats.times.iter().zip(&stats.norm_sq[main]).map(|(t, e)| vec![*t, e.mean, e.std_error]).collect();
    write_csv(
        &p.out_dir.join("heat_norms.csv"),
        &preamble,
        &io::table_csv(&["t", "mean_norm_sq", "std_error"], &rows),
    )?;
    let sf_rows: Vec<Vec<f64>> = entries
        .iter()
        .flat_map(|e| {
            let s = &e.structure;
            (0..s.lags.len()).map(move |i| vec![s.theta, s.lag_cells[i] as f64, s.lags[i], s.values[i], s.std_errors[i], e.exact[i]])
        })
        .collect();
    write_csv(
        &p.out_dir.join("heat_structure.csv"),
        &preamble,
        &io::table_csv(&["theta", "lag_cells", "h", "structure", "std_error", "exact"], &sf_rows),
    )?;
    let plot = LinePlot {
        title: format!("Structure function, d = {}, beta = {}", p.d, p.beta),
        x_label: "h".into(),
        y_label: "E|U(t+h) - U(t)|^2".into(),
        log_x: true,
        log_y: true,
        series: entries
            .iter()
            .map(|e| Series {
                name: format!("theta = {}", e.structure.theta),
                points: e.structure.lags.iter().copied().zip(e.structure.values.iter().copied()).collect(),
            })
            .collect(),
    };
    let mut svg = plot.render();
    let comment: String = String::from_utf8(preamble.clone())
        .expect("ascii")
        .lines()
        .map(|l| l.trim_start_matches("# ").replace("--", "- -"))
        .collect::<Vec<_>>()
        .join("; ");
    svg = svg.replacen("<svg ", &format!("<!-- {comment} -->\n<svg "), 1);
    io::write_file(&p.out_dir.join("heat_structure.svg"), svg.as_bytes())?;

    super::finish(
        RunReport::new(
            "heat",
            Some(p.seed),
            echo,
            checks,
            HeatResults {
                tail,
                classification,
                expected_classification: expected,
                expected_norm_sq,
                structure: entries,
            },
        ),
        &p.out_dir.join("heat_regularity.json"),
    )
}

params!(ThresholdScanArgs => ThresholdScan {
    d: usize = 1, "spatial dimension (1 or 2)";
    betas: List<f64> = List::default(), "Hurst orders (default: d/4 - 0.1 and d/4 + 0.1)";
    theta: f64 = 0.0, "E_theta weight";
    cutoffs: List<usize> = List::of([8, 16, 32, 64]), "Galerkin cutoffs K";
    t_end: f64 = 1.0, "horizon T";
    exponent_tol: f64 = 0.15, "tolerance of the fitted wavenumber exponent against 4(theta - beta)";
});

pub fn threshold_scan(args: &ThresholdScanArgs) -> Result<bool> {
    let (p, echo) = args.resolve()?;
    let betas = if p.betas.0.is_empty() {
        let c = p.d as f64 / 4.0;
        vec![c - 0.1, c + 0.1]
    } else {
        p.betas.0.clone()
    };
    if betas.iter().any(|b| !(*b > 0.0 && *b < 1.0)) {
        return Err(Error::Config(format!("betas must lie in (0, 1), got {betas:?}")));
    }
    let report: ThresholdReport = existence_threshold_scan(p.d, &betas, p.theta, &p.cutoffs.0, p.t_end)?;
    let mut checks = Vec::new();
    for row in &report.rows {
        let expected = expected_class(p.d, row.beta, p.theta);
        checks.push(Check::holds(
            format!("beta={}: {} (expected {})", row.beta, class_name(row.classification), class_name(expected)),
            row.classification == expected,
        ));
        let target = 4.0 * (p.theta - row.beta);
        checks.push(Check::deterministic(
            format!("beta={}: tail exponent", row.beta),
            target,
            row.wavenumber_exponent,
            (row.wavenumber_exponent - target).abs(),
            p.exponent_tol,
        ));
    }
    super::finish(
        RunReport::new("threshold-scan", None, echo, checks, report),
        &p.out_dir.join("threshold.json"),
    )
}
