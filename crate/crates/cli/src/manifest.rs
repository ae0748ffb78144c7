//! Run manifests: every command serializes one next to its outputs so a
//! report can be reproduced from the manifest alone.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

/// Manifest file name for one command, so runs sharing an output directory
/// keep one manifest each.
pub fn manifest_file(command: &str) -> String {
    format!("{command}_manifest.json")
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    /// Input file paths by role (opinions, prices, calendar, config, ...).
    pub inputs: BTreeMap<String, String>,
    /// Command parameters: strategies, provider, horizon, equation mode,
    /// seed, windows.
    pub params: BTreeMap<String, String>,
    pub out_dir: String,
}

impl RunManifest {
    pub fn new(command: &str, out_dir: &Path) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            inputs: BTreeMap::new(),
            params: BTreeMap::new(),
            out_dir: out_dir.display().to_string(),
        }
    }

    pub fn input(mut self, role: &str, path: Option<&Path>) -> Self {
        if let Some(path) = path {
            self.inputs.insert(role.to_string(), path.display().to_string());
        }
        self
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn write(&self, out_dir: &Path) -> anyhow::Result<()> {
        let path = out_dir.join(manifest_file(&self.command));
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, json + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}
