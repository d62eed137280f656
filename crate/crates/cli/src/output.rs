use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] tetspec::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Argument(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(_) => "numerical",
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => "io",
            CliError::Argument(_) => "argument",
        }
    }
}

/// Writes `{"error": {...}}` to standard error.
pub fn report_error(kind: &str, message: &str) {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
}

/// One CSV row: sweep key (degree, rank or time step), metric name, value.
#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub key: String,
    pub metric: String,
    pub value: f64,
}

impl Row {
    pub fn new(key: impl ToString, metric: impl Into<String>, value: f64) -> Self {
        Self { key: key.to_string(), metric: metric.into(), value }
    }
}

/// Accumulates files of one run and writes the manifest last.
pub struct RunDir {
    dir: PathBuf,
    files: Vec<String>,
}

impl RunDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_csv(&mut self, name: &str, rows: &[Row]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_with<F>(&mut self, name: &str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut std::io::BufWriter<fs::File>) -> std::io::Result<()>,
    {
        let mut w = std::io::BufWriter::new(fs::File::create(self.path(name))?);
        f(&mut w)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn finish(mut self, command: &str, config: Value, summary: Value, timings: Value) -> Result<PathBuf, CliError> {
        self.files.push("manifest.json".into());
        let manifest = json!({
            "command": command,
            "config": config,
            "versions": { "tetspec": env!("CARGO_PKG_VERSION") },
            "files": self.files,
            "summary": summary,
            "timings_seconds": timings,
        });
        fs::write(self.path("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(self.dir)
    }
}
