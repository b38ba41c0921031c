use std::fs;
use std::path::{Path, PathBuf};

use buffered_flow::MetricGraph;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Failure;

/// Envelope shared by every JSON report.
#[derive(Debug, Serialize)]
pub struct Report<'a, C: Serialize, R: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph_sha256: Option<String>,
    pub config: &'a C,
    pub result: R,
}

impl<'a, C: Serialize, R: Serialize> Report<'a, C, R> {
    pub fn new(command: &'a str, graph_sha256: Option<String>, config: &'a C, result: R) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            graph_sha256,
            config,
            result,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads and parses a graph spec; returns it with the hash of the raw bytes.
pub fn load_graph(path: &Path) -> Result<(MetricGraph, String), Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::Check(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| Failure::Check(format!("{}: not UTF-8", path.display())))?;
    let graph = MetricGraph::from_json(text).map_err(|e| Failure::Check(format!("{}: {e}", path.display())))?;
    Ok((graph, sha256_hex(&bytes)))
}

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Check(format!("{}: {e}", dir.display())))
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, Failure> {
    ensure_dir(dir)?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Failure::Check(format!("{}: {e}", path.display())))?;
    Ok(path)
}

pub fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<PathBuf, Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Check(e.to_string()))?;
    text.push('\n');
    write_text(dir, name, &text)
}
