//! Measurement CSV format and result files.
//!
//! Measurements travel as a comma-separated table with header
//! `t_min,blood,kidney,bladder` plus optional `kidney_err,bladder_err`
//! columns, one row per acquisition frame. Numbers are written in Rust's
//! shortest round-trip decimal form, so a save/load cycle reproduces every
//! `f64` bit for bit.
//!
//! Ensemble output lands in three files: `coefficients.csv` (mean and std
//! rows over the six coefficients), `strips.csv` (frame times, measured
//! data, and one reconstructed column per run per observable), and
//! `runs.json` (structured per-run results).

use crate::aco::EnsembleResult;
use crate::kinetics::COEFFICIENT_NAMES;
use crate::synth::{AcquisitionSchedule, MeasurementSet, SynthError};
use serde_json::json;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}, column {col}: cannot parse {text:?} as a number")]
    ParseError { row: usize, col: usize, text: String },
    #[error("row {row}: expected {expected} columns, found {found}")]
    ColumnCount { row: usize, expected: usize, found: usize },
    #[error("unrecognized header {0:?}")]
    BadHeader(String),
    #[error("row {row}: time must increase strictly (and start positive)")]
    NonMonotoneTime { row: usize },
    #[error("row {row}, column {col}: negative value {value}")]
    NegativeValue { row: usize, col: usize, value: f64 },
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("serializing runs.json: {0}")]
    Json(#[from] serde_json::Error),
}

const HEADER_BASE: &str = "t_min,blood,kidney,bladder";
const HEADER_ERRS: &str = "t_min,blood,kidney,bladder,kidney_err,bladder_err";

fn read_error(path: &Path, source: std::io::Error) -> IoError {
    IoError::File { path: path.display().to_string(), source }
}

/// Parses a measurement CSV file. Rows are 1-based in errors, counting the
/// header line.
pub fn load_measurements(path: impl AsRef<Path>) -> Result<MeasurementSet, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| read_error(path, e))?;
    parse_measurements(&text)
}

/// Parses measurement CSV text; see [`load_measurements`].
pub fn parse_measurements(text: &str) -> Result<MeasurementSet, IoError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| IoError::BadHeader(String::new()))?;
    let header = header.trim();
    let with_errs = match header {
        HEADER_BASE => false,
        HEADER_ERRS => true,
        other => return Err(IoError::BadHeader(other.to_string())),
    };
    let n_cols = if with_errs { 6 } else { 4 };

    let mut times = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n_cols - 1];
    for (idx, line) in lines {
        let row = idx + 1; // 1-based, header is row 1
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_cols {
            return Err(IoError::ColumnCount { row, expected: n_cols, found: fields.len() });
        }
        let mut parsed = [0.0_f64; 6];
        for (col0, field) in fields.iter().enumerate() {
            parsed[col0] = field.trim().parse().map_err(|_| IoError::ParseError {
                row,
                col: col0 + 1,
                text: field.trim().to_string(),
            })?;
        }
        let t = parsed[0];
        if t <= *times.last().unwrap_or(&0.0) || !t.is_finite() {
            return Err(IoError::NonMonotoneTime { row });
        }
        for (col0, value) in parsed[1..n_cols].iter().enumerate() {
            if *value < 0.0 || !value.is_finite() {
                return Err(IoError::NegativeValue { row, col: col0 + 2, value: *value });
            }
        }
        times.push(t);
        for (col, dst) in columns.iter_mut().enumerate() {
            dst.push(parsed[col + 1]);
        }
    }

    let schedule = AcquisitionSchedule::new(times)?;
    let mut cols = columns.into_iter();
    let blood = cols.next().expect("blood column");
    let kidney = cols.next().expect("kidney column");
    let bladder = cols.next().expect("bladder column");
    let kidney_err = cols.next();
    let bladder_err = cols.next();
    Ok(MeasurementSet::new(schedule, blood, kidney, bladder, kidney_err, bladder_err)?)
}

/// Writes a measurement set in the CSV format read by
/// [`load_measurements`]; the round trip is value-exact.
pub fn save_measurements(set: &MeasurementSet, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    fs::write(path, format_measurements(set)).map_err(|e| read_error(path, e))
}

/// Renders a measurement set as CSV text.
pub fn format_measurements(set: &MeasurementSet) -> String {
    let with_errs = set.kidney_err.is_some() && set.bladder_err.is_some();
    let mut out = String::new();
    out.push_str(if with_errs { HEADER_ERRS } else { HEADER_BASE });
    out.push('\n');
    for (i, &t) in set.schedule.times().iter().enumerate() {
        write!(out, "{t},{},{},{}", set.blood[i], set.kidney[i], set.bladder[i]).expect("string");
        if with_errs {
            let ke = set.kidney_err.as_ref().expect("checked");
            let be = set.bladder_err.as_ref().expect("checked");
            write!(out, ",{},{}", ke[i], be[i]).expect("string");
        }
        out.push('\n');
    }
    out
}

/// Writes `coefficients.csv`, `strips.csv`, and `runs.json` for an ensemble
/// into `dir` (created if missing).
pub fn emit_results(result: &EnsembleResult, dir: impl AsRef<Path>) -> Result<(), IoError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| read_error(dir, e))?;

    // coefficients.csv: stat row label, then the six coefficients.
    let mut coeffs = String::from("stat");
    for name in COEFFICIENT_NAMES {
        write!(coeffs, ",{name}").expect("string");
    }
    coeffs.push('\n');
    for (label, values) in [("mean", &result.mean), ("std", &result.std)] {
        coeffs.push_str(label);
        for v in values {
            write!(coeffs, ",{v}").expect("string");
        }
        coeffs.push('\n');
    }
    let path = dir.join("coefficients.csv");
    fs::write(&path, coeffs).map_err(|e| read_error(&path, e))?;

    // strips.csv: time, measured data, then per-run reconstructions.
    let n_runs = result.strips.len();
    let mut strips = String::from("t_min,kidney_data,bladder_data");
    for i in 1..=n_runs {
        write!(strips, ",kidney_run_{i}").expect("string");
    }
    for i in 1..=n_runs {
        write!(strips, ",bladder_run_{i}").expect("string");
    }
    strips.push('\n');
    for (row, &t) in result.times.iter().enumerate() {
        write!(strips, "{t},{},{}", result.kidney_data[row], result.bladder_data[row])
            .expect("string");
        for run in &result.strips {
            write!(strips, ",{}", run.kidney[row]).expect("string");
        }
        for run in &result.strips {
            write!(strips, ",{}", run.bladder[row]).expect("string");
        }
        strips.push('\n');
    }
    let path = dir.join("strips.csv");
    fs::write(&path, strips).map_err(|e| read_error(&path, e))?;

    // runs.json: documented structured results.
    let payload = json!({
        "coefficient_order": COEFFICIENT_NAMES,
        "mean": result.mean,
        "std": result.std,
        "runs": result.runs,
    });
    let path = dir.join("runs.json");
    fs::write(&path, serde_json::to_string_pretty(&payload)?).map_err(|e| read_error(&path, e))
}
