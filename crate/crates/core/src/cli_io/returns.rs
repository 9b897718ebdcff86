//! Scenario (returns) CSV ingestion.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Unit of the return rates in a scenario file. Values are converted to
/// percent on load.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    #[default]
    Percent,
    Fraction,
}

impl Units {
    pub fn to_percent(self) -> f64 {
        match self {
            Units::Percent => 1.0,
            Units::Fraction => 100.0,
        }
    }
}

impl std::str::FromStr for Units {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "percent" => Ok(Units::Percent),
            "fraction" => Ok(Units::Fraction),
            other => Err(format!("unknown units {other:?} (expected percent or fraction)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CsvError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("no data rows")]
    NoDataRows,
    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    NonNumeric { row: usize, column: usize, value: String },
}

/// Reads an `N × n` matrix of return rates (rows = observations, columns =
/// assets). Rows and columns in errors are 1-based; rows count lines of the
/// file, header included.
pub fn load_returns_csv(path: &Path, header: bool, units: Units) -> Result<Vec<Vec<f64>>, CsvError> {
    let io = |e: &dyn std::fmt::Display| CsvError::Io { path: path.display().to_string(), message: e.to_string() };
    let mut reader =
        csv::ReaderBuilder::new().has_headers(header).flexible(true).trim(csv::Trim::All).from_path(path).map_err(|e| io(&e))?;
    let scale = units.to_percent();
    let width = if header { Some(reader.headers().map_err(|e| io(&e))?.len()) } else { None };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| io(&e))?;
        let line = record.position().map_or(rows.len() + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if let Some(expected) = width.or_else(|| rows.first().map(Vec::len)) {
            if record.len() != expected {
                return Err(CsvError::Ragged { row: line, expected, found: record.len() });
            }
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v * scale),
                _ => Err(CsvError::NonNumeric { row: line, column: c + 1, value: cell.to_string() }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CsvError::NoDataRows);
    }
    Ok(rows)
}
