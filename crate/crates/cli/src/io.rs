//! File formats shared by the subcommands.
//!
//! `data.csv` has no header; rows are observations and values are written
//! with 17 significant digits so that they read back bit-exactly.

use std::fs;
use std::path::Path;

use coalhc_core::Dataset;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_matrix(path: &Path, rows: usize, cols: usize, values: &[f64]) -> CliResult<()> {
    let mut out = String::with_capacity(rows * cols * 24);
    for i in 0..rows {
        let line: Vec<String> = values[i * cols..(i + 1) * cols].iter().map(|v| format_f64(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    write_string(path, &out)
}

pub fn write_dataset(path: &Path, data: &Dataset) -> CliResult<()> {
    write_matrix(path, data.n(), data.d(), data.values())
}

pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| {
                    CliError::data(format!("{}: row {}: cannot parse {field:?}", path.display(), i + 1))
                })
            })
            .collect::<CliResult<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(CliError::data(format!(
                    "{}: row {} has {} columns, expected {}",
                    path.display(),
                    i + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    Dataset::from_rows(&rows).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn read_labels(path: &Path) -> CliResult<Vec<usize>> {
    read_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.parse::<usize>()
                .map_err(|_| CliError::data(format!("{}: line {}: bad label {l:?}", path.display(), i + 1)))
        })
        .collect()
}

pub fn write_labels(path: &Path, labels: &[usize]) -> CliResult<()> {
    let mut out = String::new();
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    write_string(path, &out)
}

pub fn read_string(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_string(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read_string(path)?)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// As [`read_json`], but a malformed file is a configuration error.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read_string(path)?)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    s.push('\n');
    write_string(path, &s)
}
