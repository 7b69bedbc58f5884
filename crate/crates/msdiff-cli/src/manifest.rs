//! Run manifest: records the config hash, root seed, and crate versions so
//! a rerun against the same output directory can verify it matches.

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const MANIFEST_NAME: &str = "manifest.txt";

pub fn config_hash(canonical_toml: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(canonical_toml.as_bytes());
    hex(&hasher.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn render(config_hash: &str, seed: u64) -> String {
    format!(
        "config_hash = {config_hash}\nseed = {seed}\nmsdiff_core = {}\nmsdiff_cli = {}\n",
        msdiff_core::VERSION,
        env!("CARGO_PKG_VERSION"),
    )
}

/// Write the manifest, verifying against an existing one first.
pub fn write_and_verify(out_dir: &Path, config_hash: &str, seed: u64) -> Result<()> {
    let path = out_dir.join(MANIFEST_NAME);
    let fresh = render(config_hash, seed);
    if path.exists() {
        let existing = std::fs::read_to_string(&path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        if existing != fresh {
            bail!(
                "manifest mismatch in {}: a previous run used a different config or seed \
                 (delete the output directory to start over)",
                out_dir.display()
            );
        }
        return Ok(());
    }
    std::fs::write(&path, fresh).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
