//! Plain-text persistence for sample paths and JSON documents.
//!
//! Paths are CSV with one row per time index and one column per component.
//! A header line `x1,...,xn` is written and optional on read.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::SamplePath;

pub fn path_to_csv(path: &SamplePath) -> String {
    let data = path.data();
    let mut out = String::with_capacity(data.len() * 24);
    let header: Vec<String> = (1..=data.ncols()).map(|i| format!("x{i}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for t in 0..data.nrows() {
        for i in 0..data.ncols() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:.16e}", data[(t, i)]);
        }
        out.push('\n');
    }
    out
}

/// Parses a path CSV; `origin` is used only in error locations.
pub fn path_from_csv(text: &str, origin: &str) -> Result<SamplePath> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if rows.is_empty() && width.is_none() && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            width = Some(fields.len());
            continue;
        }
        if let Some(w) = width {
            if fields.len() != w {
                return Err(Error::Parse {
                    location: format!("{origin}:{}", lineno + 1),
                    message: format!("expected {w} fields, found {}", fields.len()),
                });
            }
        }
        width = Some(fields.len());
        let mut row = Vec::with_capacity(fields.len());
        for (col, f) in fields.iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                location: format!("{origin}:{}:{}", lineno + 1, col + 1),
                message: format!("not a number: {f:?}"),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse { location: origin.to_string(), message: "no data rows".into() });
    }
    let n = rows[0].len();
    let data = DMatrix::from_fn(rows.len(), n, |t, i| rows[t][i]);
    SamplePath::new(data)
}

pub fn read_path(file: &Path) -> Result<SamplePath> {
    let text = fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
    path_from_csv(&text, &file.display().to_string())
}

pub fn write_path(file: &Path, path: &SamplePath) -> Result<()> {
    fs::write(file, path_to_csv(path)).map_err(|e| Error::io(file, e))
}

pub fn read_json<T: DeserializeOwned>(file: &Path) -> Result<T> {
    let text = fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        location: format!("{}:{}:{}", file.display(), e.line(), e.column()),
        message: e.to_string(),
    })
}

pub fn write_json<T: Serialize>(file: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(file, text).map_err(|e| Error::io(file, e))
}
