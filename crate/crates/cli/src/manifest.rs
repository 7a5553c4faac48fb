use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::Serialize;
use serde_json::Value as Json;

use rtm_eval::util::{sha256_hex, write_atomic};

/// Provenance record written next to every output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub args: Vec<String>,
    /// Digest of the version, subcommand and effective settings; paths excluded.
    pub config_hash: String,
    pub settings: Json,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

pub struct ManifestBuilder {
    subcommand: &'static str,
    settings: Json,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    started_at: DateTime<Utc>,
}

pub fn config_hash(subcommand: &str, settings: &Json) -> String {
    let canonical = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": subcommand,
        "settings": settings,
    });
    sha256_hex(canonical.to_string().as_bytes())
}

impl ManifestBuilder {
    pub fn new(subcommand: &'static str) -> Self {
        Self {
            subcommand,
            settings: Json::Null,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            started_at: Utc::now(),
        }
    }

    pub fn settings(&mut self, settings: Json) {
        self.settings = settings;
    }

    /// Records the digest of an input file, or of every file under a directory.
    pub fn input(&mut self, path: &Path) -> std::io::Result<()> {
        if path.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(path)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            entries.sort();
            for p in entries {
                self.input(&p)?;
            }
        } else {
            let bytes = std::fs::read(path)?;
            self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        }
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write(self, path: &Path) -> std::io::Result<()> {
        let manifest = RunManifest {
            tool: "rtm-eval",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: self.subcommand,
            args: std::env::args().collect(),
            config_hash: config_hash(self.subcommand, &self.settings),
            settings: self.settings,
            inputs: self.inputs,
            outputs: self.outputs,
            started_at: self.started_at,
            finished_at: Utc::now(),
        };
        let mut json = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
        json.push('\n');
        write_atomic(path, json.as_bytes())
    }
}

/// `<dir>/manifest.json` for directory outputs, `<file>.manifest.json` otherwise.
pub fn manifest_path(out: &Path, out_is_dir: bool) -> PathBuf {
    if out_is_dir {
        out.join("manifest.json")
    } else {
        let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        out.with_file_name(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_depends_on_settings_only() {
        let a = config_hash("evaluate", &serde_json::json!({"averaging": "micro"}));
        let b = config_hash("evaluate", &serde_json::json!({"averaging": "micro"}));
        let c = config_hash("evaluate", &serde_json::json!({"averaging": "macro"}));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn manifest_locations() {
        assert_eq!(manifest_path(Path::new("out"), true), Path::new("out/manifest.json"));
        assert_eq!(manifest_path(Path::new("x/facts.jsonl"), false), Path::new("x/facts.jsonl.manifest.json"));
    }
}
