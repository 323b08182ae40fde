use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, headers: &[&str]) -> Self {
        Table { name: name.to_string(), headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let to_err = |e: csv::Error| CliError::Invalid(format!("csv {}: {e}", self.name));
        w.write_record(&self.headers).map_err(to_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(to_err)?;
        }
        w.into_inner().map_err(|e| CliError::Invalid(format!("csv {}: {e}", self.name)))
    }
}

/// A binary PPM (P6) raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub name: String,
    pub width: usize,
    pub height: usize,
    /// Row-major RGB triples.
    pub pixels: Vec<[u8; 3]>,
}

impl Image {
    pub fn blank(name: &str, width: usize, height: usize) -> Self {
        Image { name: name.to_string(), width, height, pixels: vec![[0, 0, 0]; width * height] }
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        if x < self.width && y < self.height {
            self.pixels[y * self.width + x] = rgb;
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportBundle {
    pub tables: Vec<Table>,
    pub image: Option<Image>,
    /// Scenario results; goes under `results` in the summary.
    pub results: Value,
    /// Set when a search came back empty (exit code 3 under `--strict`).
    pub not_found: Option<String>,
}

/// Everything the summary needs besides the bundle itself.
#[derive(Debug, Clone, Serialize)]
pub struct RunInfo {
    pub scenario: String,
    pub config: String,
    pub seed: u64,
    pub trials: usize,
    pub wall_clock_seconds: Option<f64>,
}

/// Writes `<table>.csv` for each table, the image, and `summary.json`.
/// Every file goes through a temporary file and a rename.
pub fn write_report(bundle: &ReportBundle, info: &RunInfo, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut written = Vec::new();
    for t in &bundle.tables {
        let path = out_dir.join(format!("{}.csv", t.name));
        write_atomic(&path, &t.to_csv()?)?;
        written.push(path);
    }
    if let Some(img) = &bundle.image {
        let path = out_dir.join(format!("{}.ppm", img.name));
        write_atomic(&path, &img.to_ppm())?;
        written.push(path);
    }
    let files: Vec<String> = written
        .iter()
        .map(|p| p.file_name().expect("file name").to_string_lossy().into_owned())
        .collect();
    let mut summary = json!({
        "tool": "ifs-lab",
        "version": TOOL_VERSION,
        "scenario": info.scenario,
        "seed": info.seed,
        "trials": info.trials,
        "config": info.config,
        "files": files,
        "results": bundle.results,
    });
    if let Some(t) = info.wall_clock_seconds {
        summary["wall_clock_seconds"] = json!(t);
    }
    let mut text = serde_json::to_vec_pretty(&summary).map_err(|e| CliError::Invalid(e.to_string()))?;
    text.push(b'\n');
    let path = out_dir.join("summary.json");
    write_atomic(&path, &text)?;
    written.push(path);
    Ok(written)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().expect("file name").to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::io(path, e)
    })
}
