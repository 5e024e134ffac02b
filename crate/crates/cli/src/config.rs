//! Run configuration: a flat TOML file whose keys mirror the long flags.
//! Flags given on the command line take precedence over the file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub system: Option<String>,
    pub energy: Option<f64>,
    pub bracket: Option<[f64; 2]>,
    pub branch: Option<String>,
    pub occurrence: Option<usize>,
    pub involution: Option<usize>,
    pub kind: Option<String>,
    pub samples: Option<usize>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub grid: Option<usize>,
    pub t_max: Option<f64>,
    pub tol: Option<f64>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub step: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub format: Option<Vec<String>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Output formats written by commands that produce files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub json: bool,
    pub csv: bool,
    pub svg: bool,
}

impl Formats {
    pub fn parse(list: &[String]) -> Result<Self, Failure> {
        let mut f = Formats { json: false, csv: false, svg: false };
        for item in list {
            match item.as_str() {
                "json" => f.json = true,
                "csv" => f.csv = true,
                "svg" => f.svg = true,
                other => return Err(Failure::usage(format!("unknown format {other:?} (json, csv, svg)"))),
            }
        }
        Ok(f)
    }
}

/// Flag value, else config value, else a usage error naming the flag.
pub fn required<T: Clone>(flag: &Option<T>, file: &Option<T>, name: &str) -> Result<T, Failure> {
    flag.clone().or_else(|| file.clone()).ok_or_else(|| Failure::usage(format!("missing --{name}")))
}

pub fn or_default<T: Clone>(flag: &Option<T>, file: &Option<T>, default: T) -> T {
    flag.clone().or_else(|| file.clone()).unwrap_or(default)
}

/// Parses `a,b` into two floats.
pub fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let v = parse_floats(s)?;
    <[f64; 2]>::try_from(v).map_err(|v| format!("expected two comma-separated numbers, got {}", v.len()))
}

pub fn parse_floats(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"))).collect()
}
