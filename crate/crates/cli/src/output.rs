//! Output files: CSV tables, JSON documents and the run manifest, all written
//! atomically (temporary file in the target directory, then rename).

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// CSV cell for a number; `NA` when infinite or undefined.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        x.to_string()
    } else {
        "NA".to_string()
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), num)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Collects artifacts of one run and writes them with a manifest.
pub struct Run {
    out_dir: PathBuf,
    command: String,
    started: Instant,
    artifacts: Vec<String>,
    notes: Vec<String>,
    partial: bool,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub args: Vec<String>,
    pub config_echo: Value,
    pub seed: Option<u64>,
    pub artifacts: &'a [String],
    pub partial: bool,
    pub notes: &'a [String],
    pub wall_time_seconds: f64,
}

impl Run {
    pub fn new(out_dir: &Path, command: &str) -> Self {
        Run {
            out_dir: out_dir.to_path_buf(),
            command: command.to_string(),
            started: Instant::now(),
            artifacts: Vec::new(),
            notes: Vec::new(),
            partial: false,
        }
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv: {e}"))?;
        self.file(name, &bytes)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.file(name, &bytes)
    }

    fn file(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.out_dir.join(name), bytes)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    /// Marks the outputs as incomplete (some points failed).
    pub fn flag_partial(&mut self, note: String) {
        self.partial = true;
        self.notes.push(note);
    }

    pub fn note(&mut self, note: String) {
        self.notes.push(note);
    }

    pub fn finish(self, config_echo: Value, seed: Option<u64>) -> Result<PathBuf> {
        let manifest = RunManifest {
            tool: "diffsearch",
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            args: std::env::args().collect(),
            config_echo,
            seed,
            artifacts: &self.artifacts,
            partial: self.partial,
            notes: &self.notes,
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = self.out_dir.join("manifest.json");
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        write_atomic(&path, &bytes)?;
        Ok(path)
    }
}
