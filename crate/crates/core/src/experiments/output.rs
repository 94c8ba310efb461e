//! CSV emission and the run manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::error::Result;

/// Header plus one record per row, minimal quoting, LF line endings.
pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// A file written by a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

pub fn write_artifact(dir: &Path, file: &str, contents: &[u8]) -> Result<Artifact> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(file), contents)?;
    Ok(Artifact {
        file: file.to_string(),
        bytes: contents.len() as u64,
        sha256: hex::encode(Sha256::digest(contents)),
    })
}

/// Everything needed to reproduce a run. Contains no timestamps so that
/// identical runs produce identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub artifacts: Vec<Artifact>,
}

pub const MANIFEST_FILE: &str = "run-manifest.json";

impl RunManifest {
    pub fn new(command: impl Into<String>, config: &ExperimentConfig, artifacts: Vec<Artifact>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            seed: config.seed,
            config: config.clone(),
            artifacts,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        name: &'static str,
        x: f64,
    }

    #[test]
    fn csv_is_lf_terminated_and_quoted_when_needed() {
        let bytes = csv_bytes(&[Row { name: "a,b", x: 0.5 }, Row { name: "c", x: 2.0 }]).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(text, "name,x\n\"a,b\",0.5\nc,2.0\n");
        assert!(!text.contains('\r'));
    }

    #[test]
    fn artifacts_carry_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let a = write_artifact(dir.path(), "x.csv", b"abc").unwrap();
        assert_eq!(a.sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(std::fs::read(dir.path().join("x.csv")).unwrap(), b"abc");
        let m = RunManifest::new("test", &ExperimentConfig::default(), vec![a]);
        let path = m.write(dir.path()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(v["artifacts"][0]["file"], "x.csv");
        assert_eq!(v["seed"], 2015);
    }
}
