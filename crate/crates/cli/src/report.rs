//! CSV tables and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use burgulence::Estimate;
use serde_json::json;

use crate::RunError;

/// Shortest round-trip decimal; `NaN` for undefined values.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x}")
    }
}

/// `ok`, or why a row carries no usable error bar.
pub fn status(e: &Estimate) -> &'static str {
    if !e.mean.is_finite() {
        "undefined"
    } else if e.has_error_bar() {
        "ok"
    } else {
        "no-error-bar"
    }
}

/// One output table.
pub struct Table {
    name: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, header: &[&'static str]) -> Self {
        Self { name, header: header.to_vec(), rows: Vec::new() }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    /// Replaces the status (last) cell of the latest row.
    pub fn flag_last(&mut self, status: &str) {
        if let Some(cell) = self.rows.last_mut().and_then(|r| r.last_mut()) {
            *cell = status.to_string();
        }
    }
}

/// Fits table shared by most experiments.
pub fn fits_table() -> Table {
    Table::new("fits.csv", &["observable", "exponent", "stderr", "range_lo", "range_hi", "status"])
}

pub fn fit_row(t: &mut Table, observable: &str, fit: Result<(f64, f64, (f64, f64)), burgulence::Error>) {
    match fit {
        Ok((e, se, (lo, hi))) => t.row(vec![observable.into(), num(e), num(se), num(lo), num(hi), "ok".into()]),
        Err(err) => t.row(vec![observable.into(), num(f64::NAN), num(f64::NAN), num(f64::NAN), num(f64::NAN), format!("failed: {err}")]),
    }
}

/// Output directory that records what was written.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|e| RunError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn note(&mut self, name: &str) {
        self.files.push(name.to_string());
    }

    pub fn write(&mut self, table: &Table) -> Result<(), RunError> {
        let path = self.path(table.name);
        let io = |e: csv::Error| RunError::Io(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        w.write_record(&table.header).map_err(io)?;
        for r in &table.rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
        self.note(table.name);
        Ok(())
    }
}

pub struct Manifest<'a> {
    pub experiment: &'a str,
    pub config_echo: &'a str,
    pub threads: usize,
    pub wall_seconds: f64,
    pub files: &'a [String],
    pub failure: Option<&'a RunError>,
}

pub fn write_manifest(dir: &Path, m: &Manifest<'_>) -> Result<(), RunError> {
    let doc = json!({
        "experiment": m.experiment,
        "version": env!("CARGO_PKG_VERSION"),
        "status": if m.failure.is_some() { "failed" } else { "ok" },
        "failure": m.failure.map(|e| e.to_string()),
        "wall_seconds": m.wall_seconds,
        "threads": m.threads,
        "files": m.files,
        "config": m.config_echo,
    });
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&doc).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| RunError::Io(format!("{}: {e}", path.display())))
}
