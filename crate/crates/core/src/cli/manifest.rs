use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::density::io::{to_json_string, write_text};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to rerun a command and check its outputs. Output
/// paths are relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> Result<FileDigest> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileDigest { path: path.to_path_buf(), sha256: sha256_hex(&bytes) })
}

/// A named output file and its full contents.
pub struct Output {
    pub name: &'static str,
    pub contents: String,
}

impl Output {
    pub fn new(name: &'static str, contents: String) -> Self {
        Self { name, contents }
    }
}

/// Writes `outputs` and the manifest describing them into `out_dir`.
pub fn write_run<C: Serialize>(
    out_dir: &Path,
    command: &str,
    config: &C,
    seeds: Vec<u64>,
    inputs: &[PathBuf],
    outputs: &[Output],
) -> Result<RunManifest> {
    let inputs = inputs.iter().map(|p| digest_file(p)).collect::<Result<Vec<_>>>()?;
    let mut written = Vec::with_capacity(outputs.len());
    for o in outputs {
        write_text(&out_dir.join(o.name), &o.contents)?;
        written.push(FileDigest { path: o.name.into(), sha256: sha256_hex(o.contents.as_bytes()) });
    }
    let manifest = RunManifest {
        command: command.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: serde_json::to_value(config)?,
        seeds,
        inputs,
        outputs: written,
    };
    write_text(&out_dir.join(MANIFEST_FILE), &to_json_string(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Checks that every recorded input still has its recorded digest.
pub fn verify_inputs(manifest: &RunManifest) -> Result<()> {
    for recorded in &manifest.inputs {
        let now = digest_file(&recorded.path)?;
        if now.sha256 != recorded.sha256 {
            return Err(Error::Precondition(format!("input {} changed since the run", recorded.path.display())));
        }
    }
    Ok(())
}

/// Output files whose digest differs between two manifests.
pub fn output_mismatches(original: &RunManifest, replayed: &RunManifest) -> Vec<PathBuf> {
    let mut bad: Vec<PathBuf> = original
        .outputs
        .iter()
        .filter(|o| !replayed.outputs.iter().any(|r| r.path == o.path && r.sha256 == o.sha256))
        .map(|o| o.path.clone())
        .collect();
    bad.extend(
        replayed.outputs.iter().filter(|r| !original.outputs.iter().any(|o| o.path == r.path)).map(|r| r.path.clone()),
    );
    bad
}
