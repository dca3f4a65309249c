//! CSV and JSON persistence.
//!
//! CSV follows RFC 4180: comma separated, CRLF-free `\n` records, fields
//! quoted when they contain a comma, quote or line break. Floats are written
//! in Rust's shortest round-trip form so identical runs produce identical
//! bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fbm::PathEnsemble;
use crate::grid::{NodeValues, StepFunction, TimeGrid};

fn quote(field: &str) -> std::borrow::Cow<'_, str> {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\"")).into()
    } else {
        field.into()
    }
}

/// Buffered CSV record writer.
pub struct CsvWriter<W: Write> {
    out: W,
    columns: usize,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W, header: &[&str]) -> std::io::Result<Self> {
        write_record(&mut out, header.iter().copied())?;
        Ok(Self {
            out,
            columns: header.len(),
        })
    }

    pub fn record<S: AsRef<str>>(&mut self, fields: &[S]) -> std::io::Result<()> {
        debug_assert_eq!(fields.len(), self.columns);
        write_record(&mut self.out, fields.iter().map(|s| s.as_ref()))
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

fn write_record<'a>(out: &mut impl Write, fields: impl Iterator<Item = &'a str>) -> std::io::Result<()> {
    let mut first = true;
    for f in fields {
        if !first {
            out.write_all(b",")?;
        }
        first = false;
        out.write_all(quote(f).as_bytes())?;
    }
    out.write_all(b"\n")
}

pub fn float(x: f64) -> String {
    format!("{x:?}")
}

/// Ensemble in long format: `path_id,t,value`.
pub fn ensemble_csv(ens: &PathEnsemble) -> Vec<u8> {
    let times = ens.grid.nodes();
    let mut w = CsvWriter::new(Vec::new(), &["path_id", "t", "value"]).expect("in-memory write");
    for (r, p) in ens.paths().enumerate() {
        for (t, v) in times.iter().zip(p) {
            w.record(&[r.to_string(), float(*t), float(*v)]).expect("in-memory write");
        }
    }
    w.into_inner()
}

/// `t,value` with `t` the right end point of each cell.
pub fn step_function_csv(f: &StepFunction) -> Vec<u8> {
    let mut w = CsvWriter::new(Vec::new(), &["t", "value"]).expect("in-memory write");
    for (j, v) in f.values().iter().enumerate() {
        w.record(&[float(f.grid().node(j + 1)), float(*v)]).expect("in-memory write");
    }
    w.into_inner()
}

pub fn node_values_csv(v: &NodeValues) -> Vec<u8> {
    let mut w = CsvWriter::new(Vec::new(), &["t", "value"]).expect("in-memory write");
    for (t, x) in v.times().iter().zip(&v.values) {
        w.record(&[float(*t), float(*x)]).expect("in-memory write");
    }
    w.into_inner()
}

/// Generic table writer.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> Vec<u8> {
    let mut w = CsvWriter::new(Vec::new(), header).expect("in-memory write");
    for row in rows {
        let fields: Vec<String> = row.iter().map(|x| float(*x)).collect();
        w.record(&fields).expect("in-memory write");
    }
    w.into_inner()
}

/// Reads a `t,value` step function written by [`step_function_csv`] on a
/// grid starting at 0. The times must be uniform right end points; lines
/// starting with `#` are skipped.
pub fn read_step_function_csv(text: &str) -> Result<StepFunction> {
    let mut lines = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::Config("empty step function file".into()))?;
    if header.trim() != "t,value" {
        return Err(Error::Config(format!("expected header `t,value`, found `{header}`")));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        let mut parts = line.split(',');
        let (t, v) = match (parts.next(), parts.next(), parts.next()) {
            (Some(t), Some(v), None) => (t, v),
            _ => return Err(Error::Config(format!("line {}: expected two fields", i + 2))),
        };
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 2)))
        };
        times.push(parse(t)?);
        values.push(parse(v)?);
    }
    let n = times.len();
    if n == 0 {
        return Err(Error::Config("step function file has no rows".into()));
    }
    let grid = TimeGrid::unit_start(times[n - 1], n)?;
    for (j, t) in times.iter().enumerate() {
        if (t - grid.node(j + 1)).abs() > 1e-9 * grid.t_end() {
            return Err(Error::Config(format!("row {}: t = {t} is not on a uniform grid", j + 1)));
        }
    }
    StepFunction::new(grid, values)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
