//! Sealed run manifests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::commands::{FileDigest, Invocation};
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact: String,
    pub version: String,
    pub invocation: Invocation,
    /// Every config key after defaults and overrides.
    pub config: BTreeMap<String, String>,
    pub tolerances: BTreeMap<String, f64>,
    pub threads: usize,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::usage(format!("cannot read manifest {}: {e}", path.display()))
        })?;
        let m: RunManifest = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("malformed manifest {}: {e}", path.display())))?;
        if m.artifact != "hardyflow" {
            return Err(CliError::usage(format!(
                "{} is not a hardyflow manifest",
                path.display()
            )));
        }
        if m.version != VERSION {
            return Err(CliError::usage(format!(
                "manifest was written by version {}, this is {VERSION}; refusing to replay",
                m.version
            )));
        }
        Ok(m)
    }
}

/// Names of files whose bytes differ from the recorded digests.
pub fn compare(recorded: &[FileDigest], actual: &[FileDigest]) -> Vec<String> {
    let mut bad: Vec<String> = recorded
        .iter()
        .filter(|r| !actual.iter().any(|a| a == *r))
        .map(|r| r.file.clone())
        .collect();
    bad.extend(
        actual
            .iter()
            .filter(|a| !recorded.iter().any(|r| r.file == a.file))
            .map(|a| a.file.clone()),
    );
    bad.sort();
    bad.dedup();
    bad
}
