//! Plain-text matrix files and JSON artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use air_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Comma-separated rows with 17 significant digits, so values round-trip.
pub fn matrix_to_csv(x: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..x.rows() {
        for (j, v) in x.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v:.16e}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix_csv(text: &str) -> Result<Matrix, CliError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Usage(format!("line {}: {e}", lineno + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(CliError::Usage(format!(
                    "line {}: expected {} fields, found {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Usage("matrix file is empty".into()));
    }
    Ok(Matrix::from_rows(&rows))
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    parse_matrix_csv(&text).map_err(|e| match e {
        CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_matrix_csv(x: &Matrix, path: &Path) -> Result<(), CliError> {
    fs::write(path, matrix_to_csv(x))?;
    Ok(())
}

/// Row and column Laplacians as nested arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplacianFile {
    pub lr: Vec<Vec<f64>>,
    pub lc: Vec<Vec<f64>>,
}

fn nested(x: &Matrix) -> Vec<Vec<f64>> {
    (0..x.rows()).map(|i| x.row(i).to_vec()).collect()
}

fn from_nested(name: &str, rows: &[Vec<f64>]) -> Result<Matrix, CliError> {
    let n = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Usage(format!(
            "{name} must be a non-empty rectangular array"
        )));
    }
    Ok(Matrix::from_rows(rows))
}

impl LaplacianFile {
    pub fn new(lr: &Matrix, lc: &Matrix) -> Self {
        Self {
            lr: nested(lr),
            lc: nested(lc),
        }
    }

    pub fn matrices(&self) -> Result<(Matrix, Matrix), CliError> {
        Ok((from_nested("lr", &self.lr)?, from_nested("lc", &self.lc)?))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_json(self, path)
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
