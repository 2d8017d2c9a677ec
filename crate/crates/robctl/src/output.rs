//! Output plumbing: atomic file writes and the provenance header every
//! artifact carries (config SHA-256, seed, crate version).

use sha2::{Digest, Sha256};
use std::path::Path;

use robctl_core::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance attached to every output.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Meta {
    pub config_sha256: String,
    pub seed: u64,
    pub version: &'static str,
}

impl Meta {
    pub fn new(config_text: &str, seed: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(config_text.as_bytes());
        Meta {
            config_sha256: format!("{:x}", hasher.finalize()),
            seed,
            version: VERSION,
        }
    }

    /// CSV header comment line.
    pub fn csv_comment(&self) -> String {
        format!(
            "# config_sha256={} seed={} version={}\n",
            self.config_sha256, self.seed, self.version
        )
    }
}

/// Atomic write: temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("out")
        )),
        None => std::path::PathBuf::from(format!(
            ".{}.tmp",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("out")
        )),
    };
    std::fs::write(&tmp, bytes).map_err(|e| Error::Config(format!("write {tmp:?}: {e}")))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::Config(format!("rename to {path:?}: {e}")))?;
    Ok(())
}

/// Read a file into a string with a config-flavoured error.
pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("read {path:?}: {e}")))
}

/// Default seed resolution: explicit flag wins, then `RCTL_SEED`, then 42.
pub fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("RCTL_SEED") {
        Ok(text) => text
            .parse::<u64>()
            .map_err(|_| Error::Config(format!("RCTL_SEED is not a u64: {text}"))),
        Err(_) => Ok(42),
    }
}
