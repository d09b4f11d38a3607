//! File formats: dataset CSV with a JSON sidecar, trajectory, band and
//! per-cycle history CSVs.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! read–write cycle reproduces every value exactly.

use std::fs::File;
use std::path::{Path, PathBuf};

use crate::benchmarks::{Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::trainer::CycleRecord;
use crate::validation::{Trajectory, UncertaintyBand};

/// `data.csv` → `data.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn write_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    let header: Vec<String> = (1..=ds.n_inputs())
        .map(|i| format!("x{i}"))
        .chain((1..=ds.n_outputs()).map(|j| format!("y{j}")))
        .collect();
    w.write_record(&header)?;
    for (x, y) in ds.x.iter().zip(&ds.y) {
        w.write_record(x.iter().chain(y).map(|v| v.to_string()))?;
    }
    w.flush()?;
    if let Some(meta) = &ds.meta {
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(meta)? + "\n")?;
    }
    Ok(())
}

/// Reads a `x1,…,xn,y1,…,ym` CSV; the sidecar is loaded when present.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = r.headers()?.clone();
    let mut n = 0;
    let mut m = 0;
    for (col, name) in header.iter().enumerate() {
        let expect_x = format!("x{}", n + 1);
        let expect_y = format!("y{}", m + 1);
        if m == 0 && name == expect_x {
            n += 1;
        } else if n > 0 && name == expect_y {
            m += 1;
        } else {
            let want = if m == 0 {
                format!("`{expect_x}` or `{expect_y}`")
            } else {
                format!("`{expect_y}`")
            };
            return Err(Error::Data(format!(
                "bad header column {} `{name}`: expected {want}",
                col + 1
            )));
        }
    }
    if n == 0 || m == 0 {
        return Err(Error::Data("header needs at least one x and one y column".into()));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != n + m {
            return Err(Error::Data(format!("row {} has {} fields, expected {}", line + 1, rec.len(), n + m)));
        }
        let mut vals = Vec::with_capacity(n + m);
        for (col, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Data(format!("row {} column `{}`: `{field}` is not a number", line + 1, &header[col]))
            })?;
            vals.push(v);
        }
        ys.push(vals.split_off(n));
        xs.push(vals);
    }
    let sidecar = sidecar_path(path);
    let meta = if sidecar.exists() {
        let meta: DatasetMeta = serde_json::from_str(&std::fs::read_to_string(&sidecar)?)?;
        Some(meta)
    } else {
        None
    };
    let ds = Dataset { x: xs, y: ys, meta };
    ds.validate()?;
    Ok(ds)
}

pub fn write_trajectory(tr: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let dim = tr.states.first().map_or(0, Vec::len);
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=dim).map(|i| format!("x{i}")))
        .collect();
    w.write_record(&header)?;
    for (t, s) in tr.times().zip(&tr.states) {
        w.write_record(std::iter::once(t).chain(s.iter().copied()).map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_band(band: &UncertaintyBand, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "mean", "variance"])?;
    for (i, (m, v)) in band.mean.iter().zip(&band.variance).enumerate() {
        w.write_record([i.to_string(), m.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_history(history: &[CycleRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "cycle",
        "term_count",
        "val_mse",
        "train_mse",
        "active_connections",
        "lambda",
        "expression",
    ])?;
    for r in history {
        w.write_record([
            r.cycle.to_string(),
            r.term_count.to_string(),
            r.val_mse.to_string(),
            r.train_mse.to_string(),
            r.active_connections.to_string(),
            r.lambda.to_string(),
            r.expression.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
