use std::path::Path;

use serde::Serialize;

use super::config::ConfigEcho;
use crate::error::Result;
use crate::io;
use crate::numerics::stats::McEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    /// Passes when `|z| ≤ z_max`.
    Statistical,
    /// Passes when the error is within the tolerance.
    Deterministic,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    pub oracle: f64,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub z_score: Option<f64>,
    pub error: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn statistical(name: impl Into<String>, oracle: f64, estimate: &McEstimate, z_max: f64) -> Self {
        let z = estimate.z_score(oracle);
        Self::z(name, oracle, estimate.mean, estimate.std_error, z, z_max)
    }

    pub fn z(name: impl Into<String>, oracle: f64, estimate: f64, std_error: f64, z: f64, z_max: f64) -> Self {
        Self {
            name: name.into(),
            kind: CheckKind::Statistical,
            oracle,
            estimate,
            std_error: Some(std_error),
            z_score: Some(z),
            error: None,
            tolerance: z_max,
            pass: z.abs() <= z_max,
            note: None,
        }
    }

    /// Relative error `|estimate - oracle| / max(|oracle|, floor)`.
    pub fn relative(name: impl Into<String>, oracle: f64, estimate: f64, tolerance: f64) -> Self {
        let err = (estimate - oracle).abs() / oracle.abs().max(f64::MIN_POSITIVE);
        Self::deterministic(name, oracle, estimate, err, tolerance)
    }

    pub fn deterministic(name: impl Into<String>, oracle: f64, estimate: f64, error: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            kind: CheckKind::Deterministic,
            oracle,
            estimate,
            std_error: None,
            z_score: None,
            error: Some(error),
            tolerance,
            pass: error <= tolerance,
            note: None,
        }
    }

    /// A lower bound `estimate ≥ oracle`; the error is the shortfall.
    pub fn at_least(name: impl Into<String>, bound: f64, estimate: f64) -> Self {
        let shortfall = (bound - estimate).max(0.0);
        Self::deterministic(name, bound, estimate, shortfall, 0.0)
    }

    /// A predicate without a numeric oracle (1 = expected, 0 = not).
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self::deterministic(name, 1.0, if ok { 1.0 } else { 0.0 }, if ok { 0.0 } else { 1.0 }, 0.0)
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// The JSON artifact of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport<T: Serialize> {
    pub command: &'static str,
    pub version: &'static str,
    pub master_seed: Option<u64>,
    pub config: ConfigEcho,
    pub all_passed: bool,
    pub checks: Vec<Check>,
    pub results: T,
}

impl<T: Serialize> RunReport<T> {
    pub fn new(command: &'static str, master_seed: Option<u64>, config: ConfigEcho, checks: Vec<Check>, results: T) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            master_seed,
            all_passed: checks.iter().all(|c| c.pass),
            config,
            checks,
            results,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        io::write_file(path, &io::to_json(self)?)
    }
}

/// `# key=value` lines prepended to CSV artifacts so that each file
/// carries its configuration.
pub fn csv_preamble(command: &str, master_seed: Option<u64>, config: &ConfigEcho) -> Vec<u8> {
    let mut s = format!("# lfbm {command} {}\n", env!("CARGO_PKG_VERSION"));
    if let Some(seed) = master_seed {
        s.push_str(&format!("# master_seed={seed}\n"));
    }
    for (k, v) in config {
        s.push_str(&format!("# {k}={v}\n"));
    }
    s.into_bytes()
}

pub fn write_csv(path: &Path, preamble: &[u8], body: &[u8]) -> Result<()> {
    let mut bytes = preamble.to_vec();
    bytes.extend_from_slice(body);
    io::write_file(path, &bytes)
}

/// Prints one line per check to stderr.
pub fn log_checks(checks: &[Check]) {
    for c in checks {
        let detail = match (c.z_score, c.error) {
            (Some(z), _) => format!("z = {z:+.3}"),
            (None, Some(e)) => format!("error = {e:.3e} (tol {:.1e})", c.tolerance),
            _ => String::new(),
        };
        eprintln!("{} {}: oracle {:.6e}, estimate {:.6e}, {detail}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.oracle, c.estimate);
    }
}
