//! File names and plain-text formats of everything the commands write.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ratio_mc::{Error, Points};
use serde::Serialize;

use crate::error::CliError;

pub const DATASET_CSV: &str = "dataset.csv";
pub const DATASET_MANIFEST: &str = "dataset_manifest.json";
pub const MODEL_JSON: &str = "model.json";
pub const LOSS_TRACE_CSV: &str = "loss_trace.csv";
pub const TRAIN_MANIFEST: &str = "train_manifest.json";
pub const SAMPLES_CSV: &str = "samples.csv";
pub const WEIGHTED_SAMPLES_CSV: &str = "weighted_samples.csv";
pub const SAMPLE_META: &str = "sample_meta.json";
pub const REPORT_JSON: &str = "report.json";
pub const RATIO_GRID_CSV: &str = "ratio_grid.csv";

/// Writes through a temporary sibling and renames, so a failed run never
/// leaves a truncated file behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.partial"));
    fs::write(&tmp, contents).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(Error::from)?;
    s.push('\n');
    write_atomic(path, &s)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(serde_json::from_str(&text).map_err(Error::from)?)
}

/// Header `x0,...,x{d-1}[,weight]`, values in shortest round-trip form.
pub fn points_csv(points: &Points, weights: Option<&[f64]>) -> String {
    let mut s = String::new();
    let header: Vec<String> = (0..points.dim()).map(|j| format!("x{j}")).collect();
    s.push_str(&header.join(","));
    if weights.is_some() {
        s.push_str(",weight");
    }
    s.push('\n');
    for (i, row) in points.rows().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            let _ = write!(s, "{v:?}");
        }
        if let Some(w) = weights {
            let _ = write!(s, ",{:?}", w[i]);
        }
        s.push('\n');
    }
    s
}

/// Reads the leading `x0, x1, ...` columns of a CSV; trailing columns such
/// as `weight` or `label` are ignored.
pub fn read_points_csv(path: &Path) -> Result<Points, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_points_csv(&text).map_err(CliError::from)
}

pub fn parse_points_csv(text: &str) -> Result<Points, Error> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing header".into(),
    })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let d = cols.iter().enumerate().take_while(|(j, c)| **c == format!("x{j}")).count();
    if d == 0 {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected columns x0, x1, ..., got {header:?}"),
        });
    }
    let mut points = Points::new(d);
    let mut row = Vec::with_capacity(d);
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        row.clear();
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::DimensionMismatch {
                expected: cols.len(),
                found: fields.len(),
            });
        }
        for f in &fields[..d] {
            row.push(f.trim().parse::<f64>().map_err(|e| Error::Parse {
                line: i + 2,
                message: format!("{f:?}: {e}"),
            })?);
        }
        points.push(&row);
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_csv_round_trip() {
        let p = Points::from_rows(2, &[[0.1, -3e-300], [1.0 / 3.0, 7.0]]).unwrap();
        let text = points_csv(&p, Some(&[0.25, 0.75]));
        assert!(text.starts_with("x0,x1,weight\n"));
        assert_eq!(parse_points_csv(&text).unwrap(), p);
    }

    #[test]
    fn bad_points_csv() {
        assert!(parse_points_csv("a,b\n1,2\n").is_err());
        assert!(matches!(parse_points_csv("x0,x1\n1\n"), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(parse_points_csv("x0\n1\nzz\n"), Err(Error::Parse { line: 3, .. })));
    }
}
