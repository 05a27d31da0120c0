//! Text formats for fields and diagnostics, and atomic file writes.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! value parses back to the identical bit pattern.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::domain::{Field, ModelParams, ReducedGrid, Sector};
use crate::error::{Error, Result};
use crate::flow::TraceRow;

pub const FIELD_HEADER: &str = "# N m p lambda L n axes sector";

pub const DIAGNOSTICS_HEADER: &str =
    "iter,energy_I,energy_J,mass,l2_of_v,mu,residual_norm,projected_grad_norm,step_size";

/// Header line, parameter line, then one value per line in node order.
pub fn write_field(field: &Field) -> String {
    let grid = field.grid();
    let p = grid.params();
    let mut out = String::with_capacity(24 * field.values().len() + 128);
    out.push_str(FIELD_HEADER);
    out.push('\n');
    let _ = writeln!(
        out,
        "{} {} {} {} {} {} {} {}",
        p.n_dim,
        p.m,
        p.p,
        p.lambda,
        grid.length(),
        grid.points_per_axis(),
        grid.axes(),
        field.sector()
    );
    for v in field.values() {
        let _ = writeln!(out, "{v}");
    }
    out
}

/// Rebuilds the grid from the parameter line and validates the values.
pub fn read_field(text: &str) -> Result<Field> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let bad = |what: String| Error::Parameter(format!("field dump: {what}"));
    match lines.next() {
        Some(h) if h.trim() == FIELD_HEADER => {}
        other => return Err(bad(format!("expected header '{FIELD_HEADER}', found {other:?}"))),
    }
    let meta: Vec<&str> = lines
        .next()
        .ok_or_else(|| bad("missing parameter line".into()))?
        .split_whitespace()
        .collect();
    if meta.len() != 8 {
        return Err(bad(format!("parameter line has {} entries, expected 8", meta.len())));
    }
    let int = |i: usize| meta[i].parse::<usize>().map_err(|e| bad(format!("entry {i}: {e}")));
    let real = |i: usize| meta[i].parse::<f64>().map_err(|e| bad(format!("entry {i}: {e}")));
    let params = ModelParams::new(int(0)?, int(1)?, real(2)?, real(3)?)?;
    let grid = Arc::new(ReducedGrid::new(params, real(4)?, int(5)?)?);
    let axes = int(6)?;
    if axes != grid.axes() {
        return Err(bad(format!("dump has {axes} axes but the parameters give {}", grid.axes())));
    }
    let sector: Sector = meta[7].parse()?;
    let values = lines
        .enumerate()
        .map(|(i, l)| l.trim().parse::<f64>().map_err(|e| bad(format!("value {i}: {e}"))))
        .collect::<Result<Vec<f64>>>()?;
    Field::new(grid, values, sector)
}

/// Rows for every trace entry, preceded by the header.
pub fn write_diagnostics_csv<'a>(rows: impl IntoIterator<Item = &'a TraceRow>) -> String {
    let mut out = String::from(DIAGNOSTICS_HEADER);
    out.push('\n');
    for r in rows {
        let d = &r.diagnostics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.iter,
            d.energy_i,
            d.energy_j,
            d.mass,
            d.l2_of_v,
            d.mu,
            d.residual_norm,
            d.projected_grad_norm,
            r.step_size
        );
    }
    out
}

/// Two-column CSV.
pub fn write_curve_csv(x_name: &str, y_name: &str, points: &[(f64, f64)]) -> String {
    let mut out = format!("{x_name},{y_name}\n");
    for (x, y) in points {
        let _ = writeln!(out, "{x},{y}");
    }
    out
}

/// Writes to a sibling temporary file and renames it over `path`.
pub fn atomic_write(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(contents)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)
}
