//! Command-line front end. Each subcommand writes its artifacts to
//! `out_dir` and returns whether all checks passed.

pub mod config;
mod heat;
mod integral;
pub mod report;
mod sample;

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};

pub use heat::{HeatArgs, ThresholdScanArgs};
pub use integral::{CylindricalArgs, IsometryArgs, KernelVarianceArgs, NormCompareArgs};
pub use sample::{FbmSampleArgs, FracApplyArgs};

#[derive(Debug, Parser)]
#[command(name = "lfbm", version, about = "Liouville fBm, fractional calculus and SPDE experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample fBm paths and check their covariance.
    FbmSample(FbmSampleArgs),
    /// Apply a fractional integral or derivative to a step function.
    FracApply(FracApplyArgs),
    /// Monte Carlo check of the isometry on random step functions.
    Isometry(IsometryArgs),
    /// Scaling of the singular kernel variance.
    KernelVariance(KernelVarianceArgs),
    /// Ratio brackets between the Liouville and classical integrand norms.
    NormCompare(NormCompareArgs),
    /// Vector isometry for finite-rank operator integrands.
    Cylindrical(CylindricalArgs),
    /// Galerkin simulation of the fractional heat equation.
    Heat(HeatArgs),
    /// Convergence of the modal variance series.
    ThresholdScan(ThresholdScanArgs),
}

/// Writes the report, logs its checks and returns the overall verdict.
fn finish<T: Serialize>(report: report::RunReport<T>, path: &Path) -> Result<bool> {
    report.write(path)?;
    report::log_checks(&report.checks);
    Ok(report.all_passed)
}

pub fn execute(command: &Command) -> Result<bool> {
    match command {
        Command::FbmSample(a) => sample::fbm_sample(a),
        Command::FracApply(a) => sample::frac_apply(a),
        Command::Isometry(a) => integral::isometry(a),
        Command::KernelVariance(a) => integral::kernel_variance(a),
        Command::NormCompare(a) => integral::norm_compare(a),
        Command::Cylindrical(a) => integral::cylindrical(a),
        Command::Heat(a) => heat::heat(a),
        Command::ThresholdScan(a) => heat::threshold_scan(a),
    }
}

/// Exit code 0 when every check passed, 1 on a failed check or numerical
/// failure, 2 on a configuration or input error.
pub fn exit_code(result: &Result<bool>) -> u8 {
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(Error::Config(_) | Error::InvalidParameter { .. } | Error::Io { .. } | Error::Json(_)) => 2,
        Err(_) => 1,
    }
}

/// Parses arguments, runs the command and reports timing on stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let start = Instant::now();
    let result = execute(&cli.command);
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    eprintln!("wall clock: {:.3} s", start.elapsed().as_secs_f64());
    ExitCode::from(exit_code(&result))
}
