use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hetcycle::export::{fmt_f64, schema_line};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance record written next to every run's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config_path: String,
    pub config_sha256: String,
    pub command: Vec<String>,
    pub tool_version: &'static str,
    pub elapsed_ms: u128,
    pub outputs: Vec<String>,
}

/// Collects output files for one run and writes the manifest last.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(OutputDir { dir: dir.to_path_buf(), written: Vec::new() })
    }

    fn open(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.open(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    /// Writes a CSV with the schema line, a header row and one row per record.
    pub fn csv(&mut self, name: &str, kind: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
        let mut w = self.open(name)?;
        writeln!(w, "{}", schema_line(kind))?;
        let mut cw = csv::Writer::from_writer(w);
        cw.write_record(header)?;
        for row in rows {
            cw.write_record(row.iter().map(Cell::render))?;
        }
        cw.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?.flush()?;
        Ok(())
    }

    pub fn finish(mut self, config: &Path, config_bytes: &[u8], command: Vec<String>, elapsed_ms: u128) -> Result<()> {
        let manifest = RunManifest {
            config_path: config.display().to_string(),
            config_sha256: Sha256::digest(config_bytes).iter().map(|b| format!("{b:02x}")).collect(),
            command,
            tool_version: env!("CARGO_PKG_VERSION"),
            elapsed_ms,
            outputs: {
                let mut v = self.written.clone();
                v.push("manifest.json".into());
                v
            },
        };
        self.json("manifest.json", &manifest)
    }
}

/// One CSV field.
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => fmt_f64(*x),
            Cell::I(n) => n.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}
