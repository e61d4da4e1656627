use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Written as `manifest.json` next to every output set.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    pub config_sha256: String,
    pub workers: usize,
    pub wall_clock_seconds: f64,
    pub exit_code: u8,
    /// File name to SHA-256 of its contents.
    pub checksums: BTreeMap<String, String>,
    pub warnings: Vec<String>,
    pub breaches: Vec<String>,
}
