//! Field snapshots as two-column CSV (`x,u`).
//!
//! Values are written with Rust's shortest round-trip formatting, so a
//! written snapshot reads back bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::{Field, Grid};

pub fn snapshot_to_string(field: &Field) -> String {
    let grid = field.grid();
    let mut out = String::with_capacity(32 * grid.n());
    out.push_str("x,u\n");
    for (j, v) in field.values().iter().enumerate() {
        writeln!(out, "{},{}", grid.node(j), v).expect("writing to a String");
    }
    out
}

pub fn write_snapshot(field: &Field, path: &Path) -> Result<()> {
    fs::write(path, snapshot_to_string(field))?;
    Ok(())
}

pub fn parse_snapshot(text: &str, grid: &Grid) -> Result<Field> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "x,u" => {}
        other => return Err(Error::Malformed(format!("expected header `x,u`, found {other:?}"))),
    }
    let mut values = Vec::with_capacity(grid.n());
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (x, u) = line
            .split_once(',')
            .ok_or_else(|| Error::Malformed(format!("line {}: expected two columns", i + 2)))?;
        let x: f64 = x.trim().parse().map_err(|e| Error::Malformed(format!("line {}: {e}", i + 2)))?;
        let u: f64 = u.trim().parse().map_err(|e| Error::Malformed(format!("line {}: {e}", i + 2)))?;
        if values.len() < grid.n() && (x - grid.node(values.len())).abs() > 1e-9 * grid.length() {
            return Err(Error::Malformed(format!(
                "line {}: node x = {x} does not match the grid ({})",
                i + 2,
                grid.node(values.len())
            )));
        }
        values.push(u);
    }
    if values.len() != grid.n() {
        return Err(Error::GridMismatch { expected: grid.n(), found: values.len() });
    }
    Field::new(*grid, values)
}

pub fn read_snapshot(path: &Path, grid: &Grid) -> Result<Field> {
    parse_snapshot(&fs::read_to_string(path)?, grid)
}
