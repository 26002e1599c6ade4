use std::io::Write;
use std::path::Path;

use conflux_core::io::{ComplexJson, MatrixJson};
use serde::Serialize;

use crate::commands::{ConflueReport, ConnectReport, SolveReport};
use crate::error::CliError;

fn entry_headers(prefix: &str, n: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(2 * n * n);
    for i in 1..=n {
        for j in 1..=n {
            out.push(format!("{prefix}{i}{j}_re"));
            out.push(format!("{prefix}{i}{j}_im"));
        }
    }
    out
}

fn matrix_cells(m: Option<&MatrixJson>, n: usize) -> Vec<String> {
    match m {
        Some(rows) => rows.iter().flatten().flat_map(|z| [z[0].to_string(), z[1].to_string()]).collect(),
        None => vec![String::new(); 2 * n * n],
    }
}

fn point_cells(x: ComplexJson) -> [String; 2] {
    [x[0].to_string(), x[1].to_string()]
}

fn dimension<'a>(ms: impl Iterator<Item = Option<&'a MatrixJson>>) -> usize {
    ms.flatten().next().map_or(0, |m| m.len())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

/// Columns x_re, x_im, y entries, residual.
pub fn solve_csv(r: &SolveReport) -> Result<String, CliError> {
    let points: Vec<_> = r.runs.iter().flat_map(|run| &run.points).collect();
    let n = dimension(points.iter().map(|p| p.value.as_ref()));
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["x_re".to_string(), "x_im".to_string()];
    header.extend(entry_headers("y", n));
    header.push("residual".into());
    w.write_record(&header).map_err(csv_err)?;
    for p in points {
        let mut row: Vec<String> = point_cells(p.x).into();
        row.extend(matrix_cells(p.value.as_ref(), n));
        row.push(p.residual.map_or(String::new(), |v| v.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

/// Columns x_re, x_im, then P entries row-major as re/im pairs.
pub fn connect_csv(r: &ConnectReport) -> Result<String, CliError> {
    let points: Vec<_> = r.runs.iter().flat_map(|run| &run.points).collect();
    let n = dimension(points.iter().map(|p| p.p.as_ref()));
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["x_re".to_string(), "x_im".to_string()];
    header.extend(entry_headers("p", n));
    w.write_record(&header).map_err(csv_err)?;
    for p in points {
        let mut row: Vec<String> = point_cells(p.x).into();
        row.extend(matrix_cells(p.p.as_ref(), n));
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

/// Every midpoint and probe sample: strip, h, x_re, x_im, then P entries.
pub fn conflue_csv(r: &ConflueReport) -> Result<String, CliError> {
    let n = r.strips.first().map_or(0, |s| s.limit.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["strip".to_string(), "h".to_string(), "x_re".to_string(), "x_im".to_string()];
    header.extend(entry_headers("p", n));
    w.write_record(&header).map_err(csv_err)?;
    for s in &r.strips {
        for sample in s.samples.iter().chain(&s.probe_samples) {
            let mut row = vec![s.index.to_string(), sample.h.to_string()];
            row.extend(point_cells(sample.x));
            row.extend(matrix_cells(Some(&sample.p), n));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    finish(w)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Io(std::io::Error::other(e)))
}

/// Writes to `path`, or stdout when absent.
pub fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                out.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}
