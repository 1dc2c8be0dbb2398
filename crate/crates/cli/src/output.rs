//! Dataset serialization, file emission, and run manifests.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Full-precision float field: 17 significant digits round-trip any f64;
/// NaN is spelled out so downstream parsers see the sentinel.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Renders rows of already-stringified cells under a fixed header.
pub fn to_csv(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, Failure> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(header)
        .and_then(|_| rows.iter().try_for_each(|row| writer.write_record(row)))
        .map_err(|e| Failure::Io(format!("csv encoding failed: {e}")))?;
    writer
        .into_inner()
        .map_err(|e| Failure::Io(format!("csv encoding failed: {e}")))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Failure::Io(format!("json encoding failed: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Provenance sidecar written next to every file dataset. Re-running the
/// recorded command line reproduces the output byte for byte, which the
/// checksum makes checkable.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub schema_version: &'static str,
    pub command_line: Vec<String>,
    pub parameters: serde_json::Value,
    pub seed: u64,
    pub nodes: usize,
    pub workers: Option<usize>,
    pub package_version: &'static str,
    pub outputs: Vec<OutputDigest>,
}

#[derive(Debug, Serialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

fn digest(path: &Path, bytes: &[u8]) -> OutputDigest {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    OutputDigest {
        path: path.display().to_string(),
        sha256: format!("{:x}", hasher.finalize()),
        bytes: bytes.len() as u64,
    }
}

/// Writes the dataset to `--out` (plus its manifest sidecar) or to stdout.
pub fn emit(
    out: Option<&PathBuf>,
    bytes: &[u8],
    mut manifest: Manifest,
) -> Result<(), Failure> {
    match out {
        Some(path) => {
            std::fs::write(path, bytes)
                .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
            manifest.outputs.push(digest(path, bytes));
            let sidecar = sidecar_path(path);
            let manifest_bytes = to_json(&manifest)?;
            std::fs::write(&sidecar, manifest_bytes)
                .map_err(|e| Failure::Io(format!("cannot write {}: {e}", sidecar.display())))?;
        }
        None => {
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| Failure::Io(format!("cannot write to stdout: {e}")))?;
        }
    }
    Ok(())
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}
