use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "reeblab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance stamped on every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
}

impl Header {
    pub fn new(command: &str, canonical_config: &str, seed: Option<u64>) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            command: command.to_string(),
            config_sha256: sha256_hex(canonical_config.as_bytes()),
            seed,
        }
    }

    fn csv_block(&self) -> String {
        let seed = self.seed.map_or("none".to_string(), |s| s.to_string());
        format!(
            "# tool: {} {}\n# command: {}\n# config_sha256: {}\n# seed: {seed}\n",
            self.tool, self.version, self.command, self.config_sha256
        )
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// One file produced by a command.
pub enum Artifact {
    Json { name: &'static str, data: Value },
    Csv { name: &'static str, body: String },
}

impl Artifact {
    pub fn json(name: &'static str, data: &impl Serialize) -> Self {
        Artifact::Json {
            name,
            data: serde_json::to_value(data).expect("report serializes"),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Artifact::Json { name, .. } | Artifact::Csv { name, .. } => name,
        }
    }

    fn render(&self, header: &Header) -> String {
        match self {
            Artifact::Json { data, .. } => {
                let doc = json!({ "header": header, "data": data });
                let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
                s.push('\n');
                s
            }
            Artifact::Csv { body, .. } => format!("{}{body}", header.csv_block()),
        }
    }
}

pub fn write_artifacts(dir: &Path, header: &Header, artifacts: &[Artifact]) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    artifacts
        .iter()
        .map(|a| {
            let path = dir.join(a.name());
            fs::write(&path, a.render(header))?;
            Ok(path)
        })
        .collect()
}

/// Machine-readable failure record.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub status: &'static str,
    pub exit_code: i32,
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub header: Option<Header>,
}

impl ErrorReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("error report serializes");
        s.push('\n');
        s
    }
}
