//! Run manifests: what ran, with which settings, on which bytes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clock::WallClock;
use crate::error::{io_at, CliResult};
use crate::formats::json_bytes;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub tool_version: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_clock_s: f64,
}

impl RunManifest {
    /// `(role, sha256)` of every output; equal across reproducible runs even
    /// when paths and timings differ.
    pub fn output_digests(&self) -> Vec<(String, String)> {
        self.outputs.iter().map(|d| (d.role.clone(), d.sha256.clone())).collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `<out>.manifest.json` next to `out`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// Tracks the files a command reads and writes, then writes the manifest
/// next to the first output.
pub struct Run {
    manifest: RunManifest,
    clock: WallClock,
}

impl Run {
    pub fn new(command: &str, config: serde_json::Value, seeds: Vec<u64>) -> Self {
        Run {
            manifest: RunManifest {
                command: command.to_owned(),
                config,
                seeds,
                tool_version: env!("CARGO_PKG_VERSION").to_owned(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                wall_clock_s: 0.0,
            },
            clock: WallClock::start(),
        }
    }

    pub fn read(&mut self, role: &str, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(io_at(path))?;
        self.manifest.inputs.push(digest(role, path, &bytes));
        Ok(bytes)
    }

    pub fn write(&mut self, role: &str, path: &Path, bytes: &[u8]) -> CliResult<()> {
        std::fs::write(path, bytes).map_err(io_at(path))?;
        self.manifest.outputs.push(digest(role, path, bytes));
        Ok(())
    }

    pub fn finish(mut self) -> CliResult<RunManifest> {
        self.manifest.wall_clock_s = self.clock.seconds();
        if let Some(first) = self.manifest.outputs.first() {
            let path = manifest_path(Path::new(&first.path));
            std::fs::write(&path, json_bytes(&self.manifest)).map_err(io_at(&path))?;
        }
        Ok(self.manifest)
    }
}

fn digest(role: &str, path: &Path, bytes: &[u8]) -> FileDigest {
    FileDigest { role: role.to_owned(), path: path.display().to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_sits_next_to_output() {
        assert_eq!(manifest_path(Path::new("out/a.json")), Path::new("out/a.json.manifest.json"));
        assert_eq!(manifest_path(Path::new("t.csv")), Path::new("t.csv.manifest.json"));
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
