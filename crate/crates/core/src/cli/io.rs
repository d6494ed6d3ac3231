//! Text formats of the command-line tool: CSV matrices, value lists and
//! 17-significant-digit number rendering.

use std::str::FromStr;

use serde_json::{Number, Value};

use crate::centering::SampleMatrix;
use crate::error::{Error, Result};

/// Renders `x` with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// JSON number with 17 significant digits; non-finite values become `null`.
pub fn json_f64(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    Number::from_str(&fmt_f64(x)).map(Value::Number).unwrap_or(Value::Null)
}

fn parse_cell(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses a CSV matrix: rows are observations, columns coordinates. A first
/// line with no numeric field is taken as a header. Errors name the 1-based
/// line and column of the offending cell.
pub fn parse_matrix(text: &str) -> Result<SampleMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0usize;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::InvalidInput(format!("malformed CSV: {e}")))?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if k == 0 && record.iter().all(|f| parse_cell(f).is_none()) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::InvalidInput(format!(
                    "row {line} has {} columns, expected {w}",
                    record.len()
                )))
            }
            Some(_) => {}
        }
        for (col, field) in record.iter().enumerate() {
            let v = parse_cell(field).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "non-numeric value '{field}' at row {line}, column {}",
                    col + 1
                ))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    let d = width.ok_or_else(|| Error::InvalidInput("no data rows".into()))?;
    SampleMatrix::new(rows, d, values)
}

/// Writes a matrix as header-less CSV with 17 significant digits.
pub fn write_matrix(x: &SampleMatrix) -> String {
    let mut out = String::new();
    for row in x.rows() {
        let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Comma-separated list of finite numbers.
pub fn parse_f64_list(text: &str) -> Result<Vec<f64>> {
    let items: Vec<&str> = text.split(',').map(str::trim).collect();
    if items.iter().all(|s| s.is_empty()) {
        return Err(Error::InvalidInput("empty list".into()));
    }
    items
        .iter()
        .map(|s| parse_cell(s).ok_or_else(|| Error::InvalidInput(format!("'{s}' is not a finite number"))))
        .collect()
}

/// Comma-separated significance levels, each in (0, 1).
pub fn parse_alpha_list(text: &str) -> Result<Vec<f64>> {
    let alphas = parse_f64_list(text)?;
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::InvalidInput(format!("alpha {a} is not in (0, 1)")));
    }
    Ok(alphas)
}

/// Comma-separated positive integers.
pub fn parse_usize_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(str::trim)
        .map(|s| {
            s.parse::<usize>()
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| Error::InvalidInput(format!("'{s}' is not a positive integer")))
        })
        .collect()
}
