//! Shared helpers for the benchmarks.

use std::path::PathBuf;

/// Manifest of one of the bundled fixtures (`bookinfo`, `bookinfo-clean`).
pub fn fixture_manifest(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
        .join("manifest.yaml")
}
