//! Snapshot writers.
//!
//! CSV rows follow the fixed header [`CSV_HEADER`]; unused vector
//! components are written as 0. Numbers use the shortest representation
//! that parses back to the same `f64`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::deck::OutputFormat;
use crate::discretization::NodeCloud;
use crate::error::{Error, Result};
use crate::material::FieldState;

pub const CSV_HEADER: &str = "id,x,y,z,ux,uy,uz,vx,vy,vz,fx,fy,fz,energy";

/// Shortest round-trip text of `x`, switching to exponent form outside
/// `[1e-5, 1e16)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) || !a.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn padded(field: &[f64], i: usize, d: usize) -> [f64; 3] {
    let mut out = [0.0; 3];
    out[..d].copy_from_slice(&field[i * d..(i + 1) * d]);
    out
}

pub fn snapshot_csv(state: &FieldState, cloud: &NodeCloud) -> String {
    let d = cloud.dim().get();
    let mut out = String::with_capacity(cloud.len() * 200);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for i in 0..cloud.len() {
        let x = cloud.positions()[i];
        let u = padded(&state.u, i, d);
        let v = padded(&state.v, i, d);
        let f = padded(&state.f, i, d);
        let _ = write!(out, "{i}");
        for &value in x.iter().chain(&u).chain(&v).chain(&f) {
            let _ = write!(out, ",{}", num(value));
        }
        let _ = writeln!(out, ",{}", num(state.energy[i]));
    }
    out
}

/// Legacy ASCII VTK unstructured grid with one vertex cell per node.
pub fn snapshot_vtk(state: &FieldState, cloud: &NodeCloud, step: usize) -> String {
    let d = cloud.dim().get();
    let n = cloud.len();
    let mut out = String::with_capacity(n * 200);
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "peridyn snapshot step {step} time {}", state.time);
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {n} double");
    for p in cloud.positions() {
        let _ = writeln!(out, "{} {} {}", num(p[0]), num(p[1]), num(p[2]));
    }
    let _ = writeln!(out, "CELLS {n} {}", 2 * n);
    for i in 0..n {
        let _ = writeln!(out, "1 {i}");
    }
    let _ = writeln!(out, "CELL_TYPES {n}");
    for _ in 0..n {
        out.push_str("1\n");
    }
    let _ = writeln!(out, "POINT_DATA {n}");
    for (name, field) in [("displacement", &state.u), ("velocity", &state.v), ("force", &state.f)] {
        let _ = writeln!(out, "VECTORS {name} double");
        for i in 0..n {
            let v = padded(field, i, d);
            let _ = writeln!(out, "{} {} {}", num(v[0]), num(v[1]), num(v[2]));
        }
    }
    let _ = writeln!(out, "SCALARS energy double 1");
    let _ = writeln!(out, "LOOKUP_TABLE default");
    for &e in &state.energy {
        let _ = writeln!(out, "{}", num(e));
    }
    out
}

pub fn snapshot_path(dir: &Path, step: usize, format: OutputFormat) -> PathBuf {
    let ext = match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Vtk => "vtk",
    };
    dir.join(format!("snapshot_{step:06}.{ext}"))
}

/// Writes one snapshot into `dir` and returns its path.
pub fn write_snapshot(
    state: &FieldState,
    cloud: &NodeCloud,
    step: usize,
    format: OutputFormat,
    dir: &Path,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = snapshot_path(dir, step, format);
    let text = match format {
        OutputFormat::Csv => snapshot_csv(state, cloud),
        OutputFormat::Vtk => snapshot_vtk(state, cloud, step),
    };
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
