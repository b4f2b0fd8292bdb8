//! CSV ingestion and emission for mixed-frequency samples.
//!
//! Two files describe a dataset:
//! - low-frequency: header `period_id,y`, one row per period;
//! - high-frequency: header `period_id,lag_index,x` with
//!   `lag_index in 0..m-1`, lag 0 being the most recent observation of the
//!   period.
//!
//! Every period must carry exactly one value per lag; missing data is
//! rejected, never imputed. Values are written in shortest round-trip
//! decimal form, so a file written by this tool re-parses bit-exactly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use thiserror::Error;

use midas_specd_core::weights::MixedSample;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("period {period} has {got} high-frequency rows, expected {expected}")]
    RaggedPeriod { period: i64, expected: usize, got: usize },

    #[error("{path}:{line}: missing value")]
    MissingValue { path: PathBuf, line: u64 },

    #[error("period {period} present in only one of the two files")]
    PeriodMismatch { period: i64 },

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Paths and the (optional) declared frequency ratio of a dataset on disk.
#[derive(Debug, Clone)]
pub struct DataFileLayout {
    pub low_path: PathBuf,
    pub high_path: PathBuf,
    /// Declared frequency ratio; inferred from the lag indexes when absent.
    pub m: Option<usize>,
}

fn parse_field(
    field: &str,
    path: &Path,
    line: u64,
    what: &str,
) -> Result<f64, DataError> {
    let trimmed = field.trim();
    if trimmed.is_empty() {
        return Err(DataError::MissingValue { path: path.to_path_buf(), line });
    }
    trimmed.parse::<f64>().map_err(|_| DataError::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("cannot parse {what} value '{trimmed}'"),
    })
}

fn parse_int(field: &str, path: &Path, line: u64, what: &str) -> Result<i64, DataError> {
    let trimmed = field.trim();
    if trimmed.is_empty() {
        return Err(DataError::MissingValue { path: path.to_path_buf(), line });
    }
    trimmed.parse::<i64>().map_err(|_| DataError::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("cannot parse {what} '{trimmed}'"),
    })
}

fn open_reader(path: &Path, want: &[&str]) -> Result<csv::Reader<File>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| DataError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
    let headers = reader.headers().map_err(|e| DataError::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: e.to_string(),
    })?;
    let got: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
    if got != want {
        return Err(DataError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header '{}', found '{}'", want.join(","), got.join(",")),
        });
    }
    Ok(reader)
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

/// Loads a mixed-frequency sample, validating period alignment and lag
/// coverage. Rows come back ordered by ascending period, columns by lag
/// index (lag 0 first).
pub fn load_sample(layout: &DataFileLayout) -> Result<MixedSample, DataError> {
    let low_path = layout.low_path.as_path();
    let mut low: BTreeMap<i64, f64> = BTreeMap::new();
    let mut reader = open_reader(low_path, &["period_id", "y"])?;
    for record in reader.records() {
        let record = record.map_err(|e| DataError::Parse {
            path: low_path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
        let line = record_line(&record);
        if record.len() != 2 {
            return Err(DataError::Parse {
                path: low_path.to_path_buf(),
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let period = parse_int(&record[0], low_path, line, "period_id")?;
        let y = parse_field(&record[1], low_path, line, "y")?;
        if low.insert(period, y).is_some() {
            return Err(DataError::Parse {
                path: low_path.to_path_buf(),
                line,
                message: format!("duplicate period_id {period}"),
            });
        }
    }
    if low.is_empty() {
        return Err(DataError::Invalid(format!(
            "{}: no data rows",
            low_path.display()
        )));
    }

    let high_path = layout.high_path.as_path();
    let mut high: BTreeMap<i64, BTreeMap<usize, f64>> = BTreeMap::new();
    let mut max_lag = 0usize;
    let mut reader = open_reader(high_path, &["period_id", "lag_index", "x"])?;
    for record in reader.records() {
        let record = record.map_err(|e| DataError::Parse {
            path: high_path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
        let line = record_line(&record);
        if record.len() != 3 {
            return Err(DataError::Parse {
                path: high_path.to_path_buf(),
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let period = parse_int(&record[0], high_path, line, "period_id")?;
        let lag = parse_int(&record[1], high_path, line, "lag_index")?;
        if lag < 0 {
            return Err(DataError::Parse {
                path: high_path.to_path_buf(),
                line,
                message: format!("negative lag_index {lag}"),
            });
        }
        let lag = lag as usize;
        if let Some(m) = layout.m {
            if lag >= m {
                return Err(DataError::Parse {
                    path: high_path.to_path_buf(),
                    line,
                    message: format!("lag_index {lag} outside 0..{}", m - 1),
                });
            }
        }
        let x = parse_field(&record[2], high_path, line, "x")?;
        max_lag = max_lag.max(lag);
        if high.entry(period).or_default().insert(lag, x).is_some() {
            return Err(DataError::Parse {
                path: high_path.to_path_buf(),
                line,
                message: format!("duplicate (period_id {period}, lag_index {lag})"),
            });
        }
    }

    let m = layout.m.unwrap_or(max_lag + 1);
    if m == 0 {
        return Err(DataError::Invalid("frequency ratio m must be >= 1".into()));
    }
    for period in high.keys() {
        if !low.contains_key(period) {
            return Err(DataError::PeriodMismatch { period: *period });
        }
    }
    for period in low.keys() {
        if !high.contains_key(period) {
            return Err(DataError::PeriodMismatch { period: *period });
        }
    }

    let t = low.len();
    let mut y = Array1::zeros(t);
    let mut x_high = Array2::zeros((t, m));
    for (row, (period, y_val)) in low.iter().enumerate() {
        y[row] = *y_val;
        let lags = &high[period];
        if lags.len() != m {
            return Err(DataError::RaggedPeriod {
                period: *period,
                expected: m,
                got: lags.len(),
            });
        }
        for (lag, x) in lags {
            // Lags are unique and < m when declared; when inferred, a gap
            // shows up as a missing lag below.
            if *lag >= m {
                return Err(DataError::RaggedPeriod {
                    period: *period,
                    expected: m,
                    got: lags.len(),
                });
            }
            x_high[(row, *lag)] = *x;
        }
        if (0..m).any(|lag| !lags.contains_key(&lag)) {
            return Err(DataError::RaggedPeriod {
                period: *period,
                expected: m,
                got: lags.len(),
            });
        }
    }

    MixedSample::new(y, x_high).map_err(|e| DataError::Invalid(e.to_string()))
}

/// Writes a sample in the two-file layout, periods numbered from 1.
pub fn write_sample(
    sample: &MixedSample,
    low_path: &Path,
    high_path: &Path,
) -> Result<(), DataError> {
    let mut low = BufWriter::new(File::create(low_path)?);
    writeln!(low, "period_id,y")?;
    for (row, y) in sample.y().iter().enumerate() {
        writeln!(low, "{},{}", row + 1, y)?;
    }
    low.flush()?;

    let mut high = BufWriter::new(File::create(high_path)?);
    writeln!(high, "period_id,lag_index,x")?;
    for row in 0..sample.t() {
        for lag in 0..sample.m() {
            writeln!(high, "{},{},{}", row + 1, lag, sample.x_high()[(row, lag)])?;
        }
    }
    high.flush()?;
    Ok(())
}
