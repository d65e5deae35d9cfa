//! CSV ingestion and emission.
//!
//! One row per atom: `n` coordinates and an optional trailing weight. A first
//! row whose first field is not a number is a header. Blank lines and lines
//! starting with `#` are ignored.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rectify_core::{AtomicMeasure, Ball};

use crate::error::{CliError, CliResult};

/// Numeric rows with their 1-based line numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Rows {
    pub path: PathBuf,
    pub values: Vec<Vec<f64>>,
    pub lines: Vec<u64>,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn read_rows(path: &Path) -> CliResult<Rows> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| io_error(path, e))?;
    let mut values = Vec::new();
    let mut lines = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Parse {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if first {
            first = false;
            if record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
                continue;
            }
        }
        let mut row = Vec::with_capacity(record.len());
        for (i, field) in record.iter().enumerate() {
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(CliError::Parse {
                        path: path.to_path_buf(),
                        line,
                        message: format!("column {} ({field:?}) is not a finite number", i + 1),
                    })
                }
            }
        }
        values.push(row);
        lines.push(line);
    }
    if values.is_empty() {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "no data rows".into(),
        });
    }
    Ok(Rows {
        path: path.to_path_buf(),
        values,
        lines,
    })
}

/// Atoms from `n` coordinate columns and an optional weight column.
pub fn read_measure(path: &Path, dim: Option<usize>) -> CliResult<AtomicMeasure> {
    let rows = read_rows(path)?;
    let n = dim.unwrap_or(rows.values[0].len());
    let mut positions = Vec::with_capacity(rows.values.len() * n);
    let mut weights = Vec::with_capacity(rows.values.len());
    for (row, &line) in rows.values.iter().zip(&rows.lines) {
        if row.len() != n && row.len() != n + 1 {
            return Err(CliError::Dimension {
                path: rows.path.clone(),
                line,
                expected: format!("{n} or {}", n + 1),
                got: row.len(),
            });
        }
        let w = row.get(n).copied().unwrap_or(1.0);
        if w < 0.0 {
            return Err(CliError::Parse {
                path: rows.path.clone(),
                line,
                message: format!("negative weight {w}"),
            });
        }
        positions.extend_from_slice(&row[..n]);
        weights.push(w);
    }
    Ok(AtomicMeasure::new(n, positions, weights)?)
}

/// Balls from `n` center columns and a radius column.
pub fn read_balls(path: &Path, dim: Option<usize>) -> CliResult<Vec<Ball>> {
    let rows = read_rows(path)?;
    let n = dim.unwrap_or(rows.values[0].len().saturating_sub(1));
    rows.values
        .iter()
        .zip(&rows.lines)
        .map(|(row, &line)| {
            if row.len() != n + 1 {
                return Err(CliError::Dimension {
                    path: rows.path.clone(),
                    line,
                    expected: (n + 1).to_string(),
                    got: row.len(),
                });
            }
            Ball::new(row[..n].to_vec(), row[n]).map_err(|e| CliError::Parse {
                path: rows.path.clone(),
                line,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Writes a measure with a header and 17 significant digits per value, so
/// that [`read_measure`] recovers it exactly.
pub fn write_measure(path: &Path, mu: &AtomicMeasure) -> CliResult<()> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let mut out = BufWriter::new(file);
    let n = mu.dim();
    let header: Vec<String> = (0..n).map(|i| format!("x{i}")).chain(["weight".to_string()]).collect();
    let mut body = header.join(",");
    body.push('\n');
    for j in 0..mu.len() {
        for x in mu.position(j) {
            body.push_str(&format!("{x:.16e},"));
        }
        body.push_str(&format!("{:.16e}\n", mu.weight(j)));
    }
    out.write_all(body.as_bytes()).map_err(|e| io_error(path, e))?;
    out.flush().map_err(|e| io_error(path, e))
}

pub fn write_points(path: &Path, points: &[Vec<f64>]) -> CliResult<()> {
    let mu = AtomicMeasure::from_points(points)?;
    write_measure(path, &mu)
}
