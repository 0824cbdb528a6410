use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub tool_version: String,
    pub timestamp: String,
    pub config_hash: String,
    pub outputs: Vec<String>,
}

/// JSON with object keys in sorted order.
pub fn canonical_json(v: &serde_json::Value) -> String {
    // serde_json's map is ordered by key unless `preserve_order` is enabled
    let sorted: serde_json::Value = serde_json::from_str(&v.to_string()).expect("round trip");
    sorted.to_string()
}

pub fn config_hash(v: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(canonical_json(v).as_bytes()))
}

impl RunManifest {
    pub fn new<C: Serialize>(subcommand: &str, config: &C, outputs: Vec<String>) -> Self {
        let config = serde_json::to_value(config).expect("config serializes");
        Self {
            subcommand: subcommand.to_string(),
            config_hash: config_hash(&config),
            config,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            outputs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_key_order() {
        let a: serde_json::Value = serde_json::from_str(r#"{"b": 1, "a": {"y": 2, "x": [1, 2]}}"#).unwrap();
        let b: serde_json::Value = serde_json::from_str(r#"{"a": {"x": [1, 2], "y": 2}, "b": 1}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        let c: serde_json::Value = serde_json::from_str(r#"{"a": {"x": [2, 1], "y": 2}, "b": 1}"#).unwrap();
        assert_ne!(config_hash(&a), config_hash(&c));
    }
}
