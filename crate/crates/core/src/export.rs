//! CSV writers. Numbers use the shortest round-trip representation, so
//! identical inputs give byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::analysis::{CpsdCurve, HysteresisLoop};
use crate::error::{Error, Result};
use crate::sim::SimTrace;

/// Writes equal-length columns under a header row.
pub fn write_columns<W: Write>(out: &mut W, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    if header.len() != columns.len() {
        return Err(Error::Dimension("header and column counts differ".into()));
    }
    let n = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::Dimension("columns differ in length".into()));
    }
    writeln!(out, "{}", header.join(","))?;
    let mut line = String::new();
    for i in 0..n {
        line.clear();
        for (j, c) in columns.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            push_number(&mut line, c[i]);
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Plain notation for ordinary magnitudes, exponent notation outside them.
fn push_number(line: &mut String, v: f64) {
    use std::fmt::Write as _;
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) || !v.is_finite() {
        let _ = write!(line, "{v}");
    } else {
        let _ = write!(line, "{v:e}");
    }
}

pub fn write_csv(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_columns(&mut w, header, columns)?;
    w.flush()?;
    Ok(())
}

/// Trace columns `t,r,e,u,d,n,y`.
pub fn write_trace(path: &Path, tr: &SimTrace) -> Result<()> {
    write_csv(
        path,
        &["t", "r", "e", "u", "d", "n", "y"],
        &[&tr.t, &tr.r, &tr.e, &tr.u, &tr.d, &tr.n, &tr.y],
    )
}

/// Reset instants, one per row.
pub fn write_resets(path: &Path, tr: &SimTrace) -> Result<()> {
    write_csv(path, &["t_reset"], &[&tr.resets])
}

pub fn write_cpsd(path: &Path, c: &CpsdCurve) -> Result<()> {
    write_csv(
        path,
        &["frequency_hz", "cumulative_power"],
        &[&c.frequency, &c.cumulative],
    )
}

pub fn write_loop(path: &Path, l: &HysteresisLoop) -> Result<()> {
    let (u, y): (Vec<f64>, Vec<f64>) = l.points.iter().copied().unzip();
    write_csv(path, &["u", "y"], &[&u, &y])
}
