use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::SignalMatrix;

/// Parses a CSV stream. Rows come back sorted by time; `signals` picks the
/// value columns in the given order (all non-time columns when empty).
pub fn read_csv<R: Read>(reader: R, time_column: &str, signals: &[String]) -> Result<SignalMatrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.iter().all(String::is_empty) {
        return Err(Error::InvalidInput("missing header row".into()));
    }
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidInput(format!("column '{name}' not found (have: {})", header.join(", "))))
    };
    let time_idx = find(time_column)?;
    let names: Vec<String> = if signals.is_empty() {
        header.iter().enumerate().filter(|(j, _)| *j != time_idx).map(|(_, h)| h.clone()).collect()
    } else {
        signals.to_vec()
    };
    if names.is_empty() {
        return Err(Error::InvalidInput("no signal columns".into()));
    }
    let idx: Vec<usize> = names.iter().map(|n| find(n)).collect::<Result<_>>()?;

    let parse = |record: &csv::StringRecord, row: usize, j: usize| -> Result<f64> {
        let cell = record.get(j).unwrap_or("");
        let v: f64 = cell.parse().map_err(|_| Error::Cell {
            row,
            column: header[j].clone(),
            message: format!("cannot parse '{cell}' as a number"),
        })?;
        if !v.is_finite() {
            return Err(Error::Cell { row, column: header[j].clone(), message: format!("non-finite value '{cell}'") });
        }
        Ok(v)
    };

    let mut rows: Vec<(f64, Vec<f64>)> = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        // row numbers are 1-based data rows, matching what a spreadsheet shows below the header
        let row = r + 1;
        let t = parse(&record, row, time_idx)?;
        let vals = idx.iter().map(|&j| parse(&record, row, j)).collect::<Result<Vec<_>>>()?;
        rows.push((t, vals));
    }
    if rows.len() < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 data rows, found {}", rows.len())));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidInput(format!("duplicate time {}", w[0].0)));
    }
    let values = DMatrix::from_fn(rows.len(), names.len(), |t, i| rows[t].1[i]);
    SignalMatrix::new(rows.iter().map(|r| r.0).collect(), values, names)
}

pub fn load_csv(path: &Path, time_column: &str, signals: &[String]) -> Result<SignalMatrix> {
    read_csv(std::fs::File::open(path)?, time_column, signals)
}

/// Writes `time` followed by one column per name. Floats use Rust's
/// shortest round-trip formatting, so reading back is bit-exact.
pub fn write_matrix_csv<W: Write>(
    writer: W,
    time_column: &str,
    times: &[f64],
    names: &[String],
    values: &DMatrix<f64>,
) -> Result<()> {
    if values.nrows() != times.len() {
        return Err(Error::DimensionMismatch { context: "csv rows", expected: times.len(), actual: values.nrows() });
    }
    if values.ncols() != names.len() {
        return Err(Error::DimensionMismatch { context: "csv columns", expected: names.len(), actual: values.ncols() });
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(std::iter::once(time_column).chain(names.iter().map(String::as_str)))?;
    for (t, time) in times.iter().enumerate() {
        let row = values.row(t);
        w.write_record(std::iter::once(time.to_string()).chain(row.iter().map(f64::to_string)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv<W: Write>(writer: W, time_column: &str, m: &SignalMatrix) -> Result<()> {
    write_matrix_csv(writer, time_column, m.times(), m.names(), m.values())
}

/// `time, F1..FK`.
pub fn write_factors_csv<W: Write>(writer: W, time_column: &str, times: &[f64], scores: &DMatrix<f64>) -> Result<()> {
    let names: Vec<String> = (1..=scores.ncols()).map(|k| format!("F{k}")).collect();
    write_matrix_csv(writer, time_column, times, &names, scores)
}
