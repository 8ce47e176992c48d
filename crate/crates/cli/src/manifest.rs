use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use mew_core::SCHEMA_VERSION;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::args::Command;
use crate::error::{read_error, write_error, CliError, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to repeat and audit one command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    /// The command and its arguments, with absolute paths.
    pub config: Command,
    pub inputs: Vec<FileDigest>,
    /// Output files, relative to the manifest's directory.
    pub outputs: Vec<FileDigest>,
    pub wall_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_per_second: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceptance_rate: Option<f64>,
    /// Command-specific results such as per-chain summaries.
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn digest_inputs(paths: &[PathBuf]) -> Result<Vec<FileDigest>> {
    paths
        .iter()
        .map(|p| {
            Ok(FileDigest {
                path: p.clone(),
                sha256: sha256_file(p).map_err(|e| read_error(p, e))?,
            })
        })
        .collect()
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| read_error(path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| read_error(path, e))?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(CliError::input(format!(
            "{}: schema version {} is not supported (expected {SCHEMA_VERSION})",
            path.display(),
            manifest.schema_version
        )));
    }
    Ok(manifest)
}

/// An output directory that tracks the files written into it.
pub struct OutDir {
    dir: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| write_error(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn open(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| write_error(&path, e))?;
        self.files.push(name.to_string());
        Ok(BufWriter::new(file))
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let mut w = self.open(name)?;
        w.write_all(contents).and_then(|_| w.flush()).map_err(|e| write_error(&self.path(name), e))
    }

    /// Writes `manifest.json` through a temporary file and a rename.
    pub fn finish(self, run: Finished) -> Result<()> {
        let outputs = self
            .files
            .iter()
            .map(|name| {
                let path = self.path(name);
                Ok(FileDigest {
                    path: PathBuf::from(name),
                    sha256: sha256_file(&path).map_err(|e| write_error(&path, e))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: run.config,
            inputs: run.inputs,
            outputs,
            wall_seconds: run.started.elapsed().as_secs_f64(),
            steps_per_second: run.steps.map(|s| s as f64 / run.started.elapsed().as_secs_f64().max(1e-9)),
            acceptance_rate: run.acceptance_rate,
            details: run.details,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifests serialize");
        let tmp = self.path(".manifest.json.tmp");
        let target = self.path(MANIFEST_NAME);
        fs::write(&tmp, text + "\n").map_err(|e| write_error(&tmp, e))?;
        fs::rename(&tmp, &target).map_err(|e| write_error(&target, e))
    }
}

/// What a finished command reports into its manifest.
pub struct Finished {
    pub config: Command,
    pub inputs: Vec<FileDigest>,
    pub started: Instant,
    /// Total chain steps, for the step rate.
    pub steps: Option<u64>,
    pub acceptance_rate: Option<f64>,
    pub details: Value,
}
