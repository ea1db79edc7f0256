//! One JSON manifest per run, keys sorted, with a SHA-256 of every output.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Default)]
pub struct RunManifest {
    command: String,
    config: Map<String, Value>,
    inputs: Map<String, Value>,
    outputs: Map<String, Value>,
    seed: Option<u64>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            ..Self::default()
        }
    }

    pub fn config(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.config.insert(key.to_string(), value.into());
        self
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.seed = Some(seed);
        self
    }

    pub fn input(&mut self, role: &str, path: &Path) -> &mut Self {
        self.inputs
            .insert(role.to_string(), Value::String(path.display().to_string()));
        self
    }

    /// Records an emitted file by path and checksum of the bytes written.
    pub fn output(&mut self, role: &str, path: &Path, bytes: &[u8]) -> &mut Self {
        let mut entry = Map::new();
        entry.insert("path".into(), Value::String(path.display().to_string()));
        entry.insert("sha256".into(), Value::String(sha256_hex(bytes)));
        self.outputs.insert(role.to_string(), Value::Object(entry));
        self
    }

    pub fn render(&self, elapsed: Duration) -> String {
        let mut root = Map::new();
        root.insert("command".into(), Value::String(self.command.clone()));
        root.insert("config".into(), Value::Object(self.config.clone()));
        root.insert("inputs".into(), Value::Object(self.inputs.clone()));
        root.insert("outputs".into(), Value::Object(self.outputs.clone()));
        root.insert(
            "seed".into(),
            self.seed.map_or(Value::Null, Value::from),
        );
        root.insert(
            "wall_clock_ms".into(),
            Value::from(elapsed.as_secs_f64() * 1e3),
        );
        let mut text = serde_json::to_string_pretty(&Value::Object(root))
            .expect("manifest values serialize");
        text.push('\n');
        text
    }
}

/// `<primary>.manifest.json` unless a path was given.
pub fn manifest_path(explicit: Option<&Path>, primary: &Path) -> PathBuf {
    explicit.map(Path::to_path_buf).unwrap_or_else(|| {
        let mut name = primary.as_os_str().to_os_string();
        name.push(".manifest.json");
        PathBuf::from(name)
    })
}
