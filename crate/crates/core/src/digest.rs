//! Content digests used for node ids, transcript entries and manifests.

use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Short stable identifier (first 16 hex chars of the SHA-256).
pub fn short_id(bytes: &[u8]) -> String {
    sha256_hex(bytes)[..16].to_string()
}

/// Digest a u64 seed together with labeled parts, for deriving per-item RNG
/// seeds that do not depend on processing order.
pub fn derive_seed(base: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    for p in parts {
        hasher.update([0x1f]);
        hasher.update(p.as_bytes());
    }
    let out = hasher.finalize();
    u64::from_le_bytes(out[..8].try_into().unwrap())
}

pub fn sha256_file(path: &std::path::Path) -> crate::error::Result<String> {
    let bytes = std::fs::read(path).map_err(|e| crate::error::PipelineError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}
