//! Per-run manifests: enough metadata to reproduce any output byte for byte
//! (given the same build), plus a content digest of the inputs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliResult;

pub const MANIFEST_SCHEMA: &str = "manifest/1";

#[derive(Serialize, Deserialize, Debug)]
pub struct RunManifest {
    pub schema: String,
    pub command: String,
    /// Flag values as strings, sorted by key.
    pub parameters: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub tool_version: String,
    /// UTC, RFC 3339. The only field that differs between identical runs.
    pub timestamp: String,
    /// `sha256:<hex>` of the input file, when the command reads one.
    pub input_digest: Option<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>) -> Self {
        RunManifest {
            schema: MANIFEST_SCHEMA.to_string(),
            command: command.to_string(),
            parameters: BTreeMap::new(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            input_digest: None,
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    pub fn param_opt(self, key: &str, value: Option<impl ToString>) -> Self {
        match value {
            Some(v) => self.param(key, v),
            None => self,
        }
    }

    pub fn with_input(mut self, path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path)?;
        let digest = Sha256::digest(&bytes);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.input_digest = Some(format!("sha256:{hex}"));
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// Write `<output>.manifest.json` next to an output file.
    pub fn write_for(&self, output: &Path) -> CliResult<()> {
        let mut name = output.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        let path = output.with_file_name(name);
        crate::output::atomic_write(&path, self.to_json().as_bytes())
    }
}
