//! Run manifests: what produced which artifacts, and from what config.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::CliResult;

/// Written as `manifest.json` beside the artifacts. Reruns of the same
/// config and seed reproduce every artifact byte for byte; only the two
/// wall-clock fields of the manifest differ.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    /// Crate version of the binary that produced the run.
    pub toolkit_version: String,
    /// Subcommand that ran.
    pub command: String,
    /// SHA-256 of the canonicalized config (key order and whitespace do not
    /// affect it).
    pub config_hash: String,
    /// Base seed the run used, if the request kind draws randomness.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_seed: Option<u64>,
    /// Wall-clock start, milliseconds since the Unix epoch.
    pub started_unix_ms: u128,
    /// Wall-clock end, milliseconds since the Unix epoch.
    pub finished_unix_ms: u128,
    /// Every file the run wrote (including this manifest), relative to the
    /// output directory.
    pub outputs: Vec<String>,
    /// Run-specific calibration notes (e.g. derived thresholds).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notes: Option<serde_json::Value>,
}

pub fn now_unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Serialize the manifest (listing itself as an output) into `out_dir`.
pub fn write_manifest(out_dir: &Path, mut manifest: RunManifest) -> CliResult<()> {
    let name = "manifest.json".to_string();
    if !manifest.outputs.contains(&name) {
        manifest.outputs.push(name.clone());
    }
    manifest.outputs.sort();
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| crate::CliError::Domain(format!("manifest serialization failed: {e}")))?;
    std::fs::write(out_dir.join(name), text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_itself_and_sorts_outputs() {
        let dir = tempfile::tempdir().unwrap();
        write_manifest(
            dir.path(),
            RunManifest {
                toolkit_version: "0.0.0".into(),
                command: "simulate".into(),
                config_hash: "ab".into(),
                base_seed: Some(7),
                started_unix_ms: 1,
                finished_unix_ms: 2,
                outputs: vec!["z.csv".into(), "a.json".into()],
                notes: None,
            },
        )
        .unwrap();
        let text = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let outputs: Vec<&str> =
            v["outputs"].as_array().unwrap().iter().map(|s| s.as_str().unwrap()).collect();
        assert_eq!(outputs, vec!["a.json", "manifest.json", "z.csv"]);
        assert_eq!(v["base_seed"], 7);
    }
}
