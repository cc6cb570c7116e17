//! Report plumbing: canonical config hashing, atomic file writes, and the
//! structured error type every subcommand funnels into.

use sha2::{Digest, Sha256};
use std::path::Path;

/// Any failure a subcommand can surface; rendered as JSON on stderr.
#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn usage(message: &str) -> Self {
        CliError {
            kind: "usage",
            message: message.to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": { "kind": self.kind, "message": self.message } }).to_string()
    }
}

macro_rules! from_error {
    ($ty:ty, $kind:literal) => {
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError {
                    kind: $kind,
                    message: e.to_string(),
                }
            }
        }
    };
}

from_error!(std::io::Error, "io");
from_error!(serde_json::Error, "config");
from_error!(sigs_core::grammar::GrammarError, "grammar");
from_error!(sigs_core::interp::InterpError, "interp");
from_error!(sigs_core::residual::ResidualError, "residual");
from_error!(sigs_core::atoms::AtomError, "atoms");
from_error!(sigs_core::tgvae::TrainError, "train");
from_error!(sigs_core::search::SearchError, "search");

/// Re-serialize a JSON value with all object keys sorted, so the hash is
/// independent of key order in the user's file.
fn canonicalize_value(v: &serde_json::Value) -> serde_json::Value {
    match v {
        serde_json::Value::Object(map) => {
            let sorted: std::collections::BTreeMap<_, _> = map
                .iter()
                .map(|(k, val)| (k.clone(), canonicalize_value(val)))
                .collect();
            serde_json::to_value(sorted).expect("canonical map serializes")
        }
        serde_json::Value::Array(items) => {
            serde_json::Value::Array(items.iter().map(canonicalize_value).collect())
        }
        other => other.clone(),
    }
}

/// SHA-256 hex digest of the canonical JSON form of a config value.
pub fn canonical_json_hash(v: &serde_json::Value) -> String {
    let canonical = canonicalize_value(v).to_string();
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Write via a temp file in the same directory plus rename, so readers
/// never observe a half-written report.
pub fn write_atomic(path: &Path, content: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
