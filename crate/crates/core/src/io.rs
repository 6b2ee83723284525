//! CSV ingestion and emission.
//!
//! The series format is a header row with a `t` column followed by one or
//! more value columns, UTF-8, `.` decimal separator. Writers emit 17
//! significant digits so values round-trip exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Format a float with 17 significant digits (exact f64 round trip).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Read a time series: first column must be `t`, remaining columns are value
/// dimensions. Rows containing non-finite or unparseable values are dropped
/// and counted on the returned series.
pub fn read_series_csv(path: &Path) -> Result<TimeSeries> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::Csv(format!("{}: {e}", path.display())),
        _ => e.into(),
    })?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() || headers.get(0) != Some("t") {
        return Err(Error::Csv(format!(
            "{}: first column must be named 't', got {:?}",
            path.display(),
            headers.get(0)
        )));
    }
    let dim = headers.len() - 1;
    if dim == 0 {
        return Err(Error::Csv(format!("{}: no value columns", path.display())));
    }
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Csv(format!(
                "{}: row has {} fields, expected {}",
                path.display(),
                record.len(),
                headers.len()
            )));
        }
        let parse = |s: &str| s.trim().parse::<f64>().unwrap_or(f64::NAN);
        times.push(parse(&record[0]));
        rows.push((1..record.len()).map(|i| parse(&record[i])).collect());
    }
    let label = headers.get(1).unwrap_or("value").to_string();
    TimeSeries::from_rows_dropping(times, rows, dim, label)
}

/// Write a series with header `t,<columns>`; scalar series use `value` when
/// no column names are given.
pub fn write_series_csv(path: &Path, series: &TimeSeries, columns: Option<&[String]>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let names: Vec<String> = match columns {
        Some(cols) => {
            if cols.len() != series.dim() {
                return Err(Error::Csv(format!(
                    "{} column names for dim {}",
                    cols.len(),
                    series.dim()
                )));
            }
            cols.to_vec()
        }
        None => {
            if series.dim() == 1 {
                vec!["value".to_string()]
            } else {
                (0..series.dim()).map(|i| format!("v{i}")).collect()
            }
        }
    };
    writeln!(w, "t,{}", names.join(","))?;
    for i in 0..series.len() {
        let mut line = fmt_f64(series.times()[i]);
        for v in series.row(i) {
            line.push(',');
            line.push_str(&fmt_f64(*v));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Write a generic table (header + rows of floats) in the same format.
pub fn write_table_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Csv(format!(
                "row has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Read a generic numeric table, returning (header, rows).
pub fn read_table_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::Csv(format!("{}: {e}", path.display())),
        _ => e.into(),
    })?;
    let header: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row: std::result::Result<Vec<f64>, _> =
            record.iter().map(|s| s.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?);
    }
    Ok((header, rows))
}
