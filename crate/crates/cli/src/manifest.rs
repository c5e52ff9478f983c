use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

/// Environment variable naming the output directory.
pub const OUT_DIR_ENV: &str = "ANNEALSCAPE_OUT";
pub const DEFAULT_OUT_DIR: &str = "annealscape-out";

/// Everything needed to repeat a run: replaying `config` through
/// `--config <manifest>` reproduces every file in `outputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub config: Value,
    pub seeds: BTreeMap<String, u64>,
    pub threads: usize,
    pub started: String,
    pub finished: String,
    pub output_dir: PathBuf,
    /// File names relative to `output_dir`.
    pub outputs: Vec<String>,
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn output_dir() -> Result<PathBuf> {
    let dir = std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

/// Collects the files a subcommand writes.
pub struct Outputs {
    dir: PathBuf,
    names: Vec<String>,
}

impl Outputs {
    pub fn new(dir: PathBuf) -> Self {
        Self { dir, names: Vec::new() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Writes a file through `body`, recording its name.
    pub fn write<F>(&mut self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(&path, e))?;
        self.names.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n")
        })
    }
}

pub fn write_manifest(
    subcommand: &str,
    config: &impl Serialize,
    seeds: BTreeMap<String, u64>,
    started: String,
    outputs: &Outputs,
) -> Result<PathBuf> {
    let manifest = RunManifest {
        subcommand: subcommand.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: serde_json::to_value(config).map_err(|e| CliError::Internal(e.to_string()))?,
        seeds,
        threads: rayon::current_num_threads(),
        started,
        finished: now(),
        output_dir: outputs.dir().to_path_buf(),
        outputs: outputs.names().to_vec(),
    };
    let path = outputs.dir().join(format!("{subcommand}.manifest.json"));
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Internal(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}
