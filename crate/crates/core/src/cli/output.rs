//! CSV and JSON output helpers.
//!
//! Numbers use the shortest representation that round-trips, with a `.`
//! decimal point; magnitudes outside `[1e-4, 1e15)` switch to exponent form
//! (`1.5e-7`), which gnuplot and every CSV reader accept.

use crate::error::{Error, Result};
use crate::geometry::Domain;
use serde::Serialize;
use std::io::Write;

pub fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Column names for a point: `x` in one dimension, `x1..xd` otherwise.
pub fn coord_headers(prefix: &str, d: usize) -> Vec<String> {
    if d == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=d).map(|i| format!("{prefix}{i}")).collect()
    }
}

/// RFC-4180 CSV: comma separated, CRLF record ends, quoting only when needed.
pub struct Table<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> Table<W> {
    pub fn new(w: W, header: &[String]) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(w);
        inner.write_record(header).map_err(csv_err)?;
        Ok(Table { inner })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        self.inner.write_record(values.iter().map(|&v| fmt_num(v))).map_err(csv_err)
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Numerical(format!("csv: {other:?}")),
    }
}

pub fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(format!("json: {e}")))?;
    writeln!(out, "{text}")?;
    Ok(())
}

pub fn create_file(path: &std::path::Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| Error::Validation(format!("cannot create {}: {e}", path.display())))?;
    Ok(std::io::BufWriter::new(f))
}

/// Points of a `k`-per-axis grid of cell midpoints over the bounding box
/// that lie in the domain.
pub fn sample_points(domain: &Domain, k: usize) -> Result<Vec<Vec<f64>>> {
    let d = domain.dim();
    if k == 0 || (k as f64).powi(d as i32) > 1e6 {
        return Err(Error::Validation(format!("{k} samples per axis in {d} dimensions is out of range")));
    }
    let (lo, hi) = domain.bounding_box();
    let total = k.pow(d as u32);
    let mut pts = Vec::new();
    for flat in 0..total {
        let mut rem = flat;
        let mut x = vec![0.0; d];
        for i in (0..d).rev() {
            let j = rem % k;
            rem /= k;
            x[i] = lo[i] + (j as f64 + 0.5) * (hi[i] - lo[i]) / k as f64;
        }
        if domain.contains(&x)? {
            pts.push(x);
        }
    }
    Ok(pts)
}
