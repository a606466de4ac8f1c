//! CSV and JSON exchange formats.
//!
//! A field is a CSV with columns `i,j,chart,re_g,im_g,H` plus a JSON
//! sidecar (same path, `.json` extension) holding the grid geometry. A
//! quadratic differential is stored the same way with columns
//! `i,j,re_q,im_q,abs_q,arg_q`. Floats are written with 17 significant
//! digits.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussfield::{Grid, TwoChartComplexField};
use crate::liegroup::GroupSpec;
use crate::potential::{Chart, ChartPoint};
use crate::qdiff::QDiffField;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Grid geometry and provenance stored next to a field CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub grid: Grid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupSpec>,
    /// Expression of the prescribed mean curvature, when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QDiffMeta {
    pub grid: Grid,
    pub param_chart: Chart,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_field_csv(field: &TwoChartComplexField, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "j", "chart", "re_g", "im_g", "H"])?;
    for (idx, (g, h)) in field.g.iter().zip(&field.h).enumerate() {
        let (i, j) = field.grid.ij(idx);
        w.write_record([
            i.to_string(),
            j.to_string(),
            g.chart.as_str().to_string(),
            fmt_f64(g.value.re),
            fmt_f64(g.value.im),
            fmt_f64(*h),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct FieldRow {
    i: usize,
    j: usize,
    chart: String,
    re_g: f64,
    im_g: f64,
    #[serde(rename = "H")]
    h: f64,
}

/// Reads a field CSV onto `grid`; every node must appear exactly once.
pub fn read_field_csv(input: impl Read, grid: Grid) -> Result<TwoChartComplexField> {
    let mut g = vec![None; grid.len()];
    let mut h = vec![0.0; grid.len()];
    for row in csv::Reader::from_reader(input).deserialize() {
        let row: FieldRow = row?;
        if row.i >= grid.nx || row.j >= grid.ny {
            return Err(Error::InvalidInput(format!("node ({}, {}) outside the {}x{} grid", row.i, row.j, grid.nx, grid.ny)));
        }
        let chart =
            Chart::parse(&row.chart).ok_or_else(|| Error::InvalidInput(format!("unknown chart {:?}", row.chart)))?;
        let idx = grid.index(row.i, row.j);
        if g[idx].is_some() {
            return Err(Error::InvalidInput(format!("node ({}, {}) appears twice", row.i, row.j)));
        }
        g[idx] = Some(ChartPoint::new(chart, Complex64::new(row.re_g, row.im_g)));
        h[idx] = row.h;
    }
    let g = g
        .into_iter()
        .enumerate()
        .map(|(idx, p)| {
            p.ok_or_else(|| {
                let (i, j) = grid.ij(idx);
                Error::InvalidInput(format!("node ({i}, {j}) missing"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TwoChartComplexField::new(grid, g, h)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Writes the CSV at `path` and its sidecar.
pub fn save_field(field: &TwoChartComplexField, meta: &FieldMeta, path: &Path) -> Result<()> {
    if meta.grid != field.grid {
        return Err(Error::InvalidInput("sidecar grid differs from the field grid".into()));
    }
    let mut out = BufWriter::new(File::create(path)?);
    write_field_csv(field, &mut out)?;
    out.flush()?;
    write_json(meta, &sidecar_path(path))
}

pub fn load_field(path: &Path) -> Result<(TwoChartComplexField, FieldMeta)> {
    let meta: FieldMeta = read_json(&sidecar_path(path))?;
    let field = read_field_csv(BufReader::new(File::open(path)?), meta.grid)?;
    Ok((field, meta))
}

pub fn save_qdiff(q: &QDiffField, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    q.write_csv(&mut out)?;
    out.flush()?;
    write_json(&QDiffMeta { grid: q.grid, param_chart: q.param_chart }, &sidecar_path(path))
}

#[derive(Deserialize)]
struct QRow {
    i: usize,
    j: usize,
    re_q: f64,
    im_q: f64,
}

pub fn load_qdiff(path: &Path) -> Result<QDiffField> {
    let meta: QDiffMeta = read_json(&sidecar_path(path))?;
    let grid = meta.grid;
    let mut q = vec![None; grid.len()];
    for row in csv::Reader::from_reader(BufReader::new(File::open(path)?)).deserialize() {
        let row: QRow = row?;
        if row.i >= grid.nx || row.j >= grid.ny {
            return Err(Error::InvalidInput(format!("node ({}, {}) outside the grid", row.i, row.j)));
        }
        q[grid.index(row.i, row.j)] = Some(Complex64::new(row.re_q, row.im_q));
    }
    let q = q
        .into_iter()
        .enumerate()
        .map(|(idx, v)| {
            v.ok_or_else(|| {
                let (i, j) = grid.ij(idx);
                Error::InvalidInput(format!("node ({i}, {j}) missing"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QDiffField { grid, q, param_chart: meta.param_chart })
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    write_json(value, path)
}
