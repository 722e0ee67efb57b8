//! Run manifests: the resolved configuration of one invocation and its hash.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "run_manifest.json";

/// Hex SHA-256 of the compact JSON form. Object keys are sorted, so equal
/// configs hash equally.
pub fn config_hash(config: &Value) -> String {
    hex::encode(Sha256::digest(config.to_string().as_bytes()))
}

pub fn build(command: &str, config: Value) -> Value {
    json!({
        "format": "sdoh-run-manifest",
        "format_version": 1,
        "tool": env!("CARGO_PKG_NAME"),
        "tool_version": env!("CARGO_PKG_VERSION"),
        "core_version": sdoh_core::VERSION,
        "command": command,
        "config_hash": config_hash(&config),
        "config": config,
    })
}

pub fn write(path: &Path, command: &str, config: Value) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let text = serde_json::to_string_pretty(&build(command, config))? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
