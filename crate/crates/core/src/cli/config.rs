//! Flat `key = value` configuration with strict key checking.
//!
//! Every subcommand declares its keys once through [`params!`]; the macro
//! produces the clap flag struct (one `--key` flag per key) and a resolved
//! parameter struct. Resolution order is flag, then file, then default.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fbm::{Normalization, Scheme};
use crate::grid::Side;
use crate::io;

/// Resolved key/value pairs, echoed into every artifact.
pub type ConfigEcho = BTreeMap<String, String>;

/// Parses `key = value` lines. `#` starts a comment; blank lines are
/// ignored; duplicate and unknown keys are errors.
pub fn parse_config(text: &str, allowed: &[&str]) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if !allowed.contains(&key) {
            return Err(Error::Config(format!(
                "line {}: unknown key `{key}` (allowed: {})",
                n + 1,
                allowed.join(", ")
            )));
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key `{key}`", n + 1)));
        }
    }
    Ok(out)
}

pub fn load_config(path: Option<&Path>, allowed: &[&str]) -> Result<BTreeMap<String, String>> {
    match path {
        Some(p) => parse_config(&io::read_file(p)?, allowed),
        None => Ok(BTreeMap::new()),
    }
}

pub fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("key `{key}`: cannot parse `{value}`: {e}")))
}

/// Comma separated list, e.g. `0.1,0.3,0.7`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct List<T>(pub Vec<T>);

impl<T> List<T> {
    pub fn of(items: impl Into<Vec<T>>) -> Self {
        List(items.into())
    }
}

impl<T: FromStr> FromStr for List<T>
where
    T::Err: fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.trim().is_empty() {
            return Ok(List(Vec::new()));
        }
        s.split(',')
            .map(|x| x.trim().parse::<T>().map_err(|e| format!("`{}`: {e}", x.trim())))
            .collect::<std::result::Result<_, _>>()
            .map(List)
    }
}

impl<T: fmt::Display> fmt::Display for List<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

fn bad(what: &str, s: &str, options: &str) -> String {
    format!("unknown {what} `{s}` (expected {options})")
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cholesky" => Ok(Scheme::Cholesky),
            "moving_average" => Ok(Scheme::MovingAverage),
            _ => Err(bad("scheme", s, "cholesky or moving_average")),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Cholesky => "cholesky",
            Scheme::MovingAverage => "moving_average",
        })
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            _ => Err(bad("side", s, "left or right")),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

impl FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "unhalved" => Ok(Normalization::Unhalved),
            "conventional" => Ok(Normalization::Conventional),
            _ => Err(bad("normalization", s, "unhalved or conventional")),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Unhalved => "unhalved",
            Normalization::Conventional => "conventional",
        })
    }
}

/// Declares the keys of one subcommand.
///
/// `out_dir` is always present; it selects where artifacts go and is kept
/// out of the echo so that runs differing only in location produce
/// identical bytes.
macro_rules! params {
    ($args:ident => $params:ident { $( $field:ident : $ty:ty = $default:expr, $help:literal; )* }) => {
        #[derive(Debug, Clone, Default, clap::Args)]
        pub struct $args {
            /// Flat `key = value` file; flags override its entries.
            #[arg(long)]
            pub config: Option<std::path::PathBuf>,
            /// Directory for the output artifacts.
            #[arg(long = "out_dir")]
            pub out_dir: Option<std::path::PathBuf>,
            $(
                #[arg(long = stringify!($field), help = $help)]
                pub $field: Option<$ty>,
            )*
        }

        #[derive(Debug, Clone)]
        pub struct $params {
            pub out_dir: std::path::PathBuf,
            $( pub $field: $ty, )*
        }

        impl $args {
            pub const KEYS: &'static [&'static str] = &["out_dir", $(stringify!($field)),*];

            pub fn resolve(&self) -> $crate::error::Result<($params, $crate::cli::config::ConfigEcho)> {
                let file = $crate::cli::config::load_config(self.config.as_deref(), Self::KEYS)?;
                let mut echo = $crate::cli::config::ConfigEcho::new();
                let out_dir = match (&self.out_dir, file.get("out_dir")) {
                    (Some(p), _) => p.clone(),
                    (None, Some(s)) => std::path::PathBuf::from(s),
                    (None, None) => std::path::PathBuf::from("."),
                };
                $(
                    let $field: $ty = match (&self.$field, file.get(stringify!($field))) {
                        (Some(v), _) => v.clone(),
                        (None, Some(s)) => $crate::cli::config::parse_value(stringify!($field), s)?,
                        (None, None) => $default,
                    };
                    echo.insert(stringify!($field).to_string(), $field.to_string());
                )*
                Ok(($params { out_dir, $($field),* }, echo))
            }
        }
    };
}

pub(crate) use params;
