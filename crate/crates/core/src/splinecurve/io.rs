//! CSV import/export of meridians `(t, R, Z)` and slip profiles `(t, u_S)`.
//!
//! Lines starting with `#` are metadata and skipped on read.

use std::io::{Read, Write};

use crate::error::{Result, SwimError};

fn io_err(e: impl std::fmt::Display) -> SwimError {
    SwimError::InvalidArgument(format!("csv: {e}"))
}

/// Writes `#`-prefixed metadata lines, a header and equal-length columns.
pub fn write_columns<W: Write>(
    out: W,
    metadata: &[String],
    header: &[&str],
    columns: &[&[f64]],
) -> Result<()> {
    let mut out = out;
    for line in metadata {
        writeln!(out, "# {line}").map_err(io_err)?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(io_err)?;
    let n = columns.first().map_or(0, |c| c.len());
    for i in 0..n {
        w.write_record(columns.iter().map(|c| format!("{:.17e}", c[i])))
            .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn read_table<R: Read>(input: R, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(io_err)?;
        if rec.len() < width {
            return Err(io_err(format!("expected {width} columns, got {}", rec.len())));
        }
        let row = (0..width)
            .map(|j| rec[j].parse::<f64>().map_err(io_err))
            .collect::<Result<Vec<f64>>>()?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(SwimError::NonFinite("csv input"));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_curve_csv<W: Write>(
    out: W,
    metadata: &[String],
    t: &[f64],
    r: &[f64],
    z: &[f64],
) -> Result<()> {
    write_columns(out, metadata, &["t", "R", "Z"], &[t, r, z])
}

/// Reads `(t, R, Z)` samples.
pub fn read_curve_csv<R: Read>(input: R) -> Result<Vec<(f64, f64, f64)>> {
    Ok(read_table(input, 3)?
        .into_iter()
        .map(|r| (r[0], r[1], r[2]))
        .collect())
}

pub fn write_slip_csv<W: Write>(out: W, metadata: &[String], t: &[f64], u: &[f64]) -> Result<()> {
    write_columns(out, metadata, &["t", "u_S"], &[t, u])
}

/// Reads `(t, u_S)` samples.
pub fn read_slip_csv<R: Read>(input: R) -> Result<Vec<(f64, f64)>> {
    Ok(read_table(input, 2)?
        .into_iter()
        .map(|r| (r[0], r[1]))
        .collect())
}
