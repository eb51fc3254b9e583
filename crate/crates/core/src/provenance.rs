//! Provenance records attached to every artifact the toolkit writes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub tool_version: String,
    pub command_line: String,
    pub seed: Option<u64>,
    /// Hex digest of the configuration that produced the artifact, if any.
    pub config_hash: Option<String>,
}

impl Provenance {
    pub fn new(command_line: impl Into<String>, seed: Option<u64>) -> Self {
        Provenance {
            tool_version: crate::VERSION.to_string(),
            command_line: command_line.into(),
            seed,
            config_hash: None,
        }
    }

    pub fn with_config_hash(mut self, hash: impl Into<String>) -> Self {
        self.config_hash = Some(hash.into());
        self
    }

    /// `key=value` pairs in a fixed order.
    pub fn fields(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![
            ("tool", format!("tagnoise {}", self.tool_version)),
            ("command", self.command_line.clone()),
        ];
        out.push((
            "seed",
            self.seed.map_or_else(|| "none".to_string(), |s| s.to_string()),
        ));
        if let Some(h) = &self.config_hash {
            out.push(("config_hash", h.clone()));
        }
        out
    }

    /// Comment lines (`# key=value`) for text artifacts.
    pub fn comment_header(&self, prefix: &str) -> String {
        let mut s = String::new();
        for (k, v) in self.fields() {
            let _ = writeln!(s, "{prefix} {k}={v}");
        }
        s
    }

    /// Writes `<artifact>.prov` next to a binary or fixed-format artifact.
    pub fn write_sidecar(&self, artifact: &Path) -> Result<PathBuf> {
        let mut name = artifact.as_os_str().to_owned();
        name.push(".prov");
        let path = PathBuf::from(name);
        let mut body = String::new();
        for (k, v) in self.fields() {
            let _ = writeln!(body, "{k}={v}");
        }
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// SHA-256 of `text`, hex-encoded and truncated to 16 characters.
pub fn config_hash(text: &str) -> String {
    digest_hex(text.as_bytes())
}

/// SHA-256 of `bytes`, hex-encoded and truncated to 16 characters.
pub fn digest_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().take(8).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}
