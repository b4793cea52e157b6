//! Headerless CSV feature files, one-label-per-line label files, and the
//! prediction writers.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::labels::LabelVector;
use crate::preprocess::FeatureMatrix;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Parse comma-separated rows of decimal numbers.
pub fn parse_features(text: &str, path: &Path) -> Result<FeatureMatrix> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (k, line) in text.lines().enumerate() {
        let lineno = k + 1;
        let line = line.trim();
        if line.is_empty() {
            return Err(parse_error(path, lineno, "empty line"));
        }
        let mut count = 0;
        for cell in line.split(',') {
            let cell = cell.trim();
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_error(path, lineno, format!("`{cell}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_error(path, lineno, format!("non-finite value `{cell}`")));
            }
            values.push(v);
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(c) if c != count => {
                return Err(parse_error(path, lineno, format!("expected {c} columns, found {count}")));
            }
            _ => {}
        }
        rows += 1;
    }
    let Some(cols) = cols else {
        return Err(parse_error(path, 1, "no feature rows"));
    };
    FeatureMatrix::new(Array2::from_shape_vec((rows, cols), values).expect("rows x cols"))
}

pub fn load_features(path: &Path) -> Result<FeatureMatrix> {
    parse_features(&read(path)?, path)
}

/// Parse one positive integer label per line; the class count is the
/// largest label seen.
pub fn parse_labels(text: &str, path: &Path) -> Result<LabelVector> {
    let mut labels = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let cell = line.trim();
        let y: usize = cell
            .parse()
            .map_err(|_| parse_error(path, k + 1, format!("`{cell}` is not a positive integer label")))?;
        if y == 0 {
            return Err(parse_error(path, k + 1, "labels start at 1"));
        }
        labels.push(y);
    }
    if labels.is_empty() {
        return Err(parse_error(path, 1, "no labels"));
    }
    let labels = LabelVector::from_observed(labels)?;
    let missing = labels.missing_classes();
    if !missing.is_empty() {
        log::warn!("{}: classes {missing:?} never occur", path.display());
    }
    Ok(labels)
}

pub fn load_labels(path: &Path) -> Result<LabelVector> {
    parse_labels(&read(path)?, path)
}

fn write_lines(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let wrap = |e| Error::io(path.display().to_string(), e);
    let file = std::fs::File::create(path).map_err(wrap)?;
    let mut out = std::io::BufWriter::new(file);
    body(&mut out).map_err(wrap)?;
    out.flush().map_err(wrap)
}

/// Soft predictions as CSV with round-trip float formatting.
pub fn write_matrix(path: &Path, values: &Array2<f64>) -> Result<()> {
    write_lines(path, |out| {
        for row in values.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    })
}

pub fn write_labels(path: &Path, labels: &LabelVector) -> Result<()> {
    write_lines(path, |out| {
        for y in labels.iter() {
            writeln!(out, "{y}")?;
        }
        Ok(())
    })
}
