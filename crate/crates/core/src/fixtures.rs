//! Locating the bundled fixture files (grammar, worlds, machines, scenarios).

use std::path::{Path, PathBuf};

/// Overrides where fixtures are looked up; handy for installed binaries.
pub const FIXTURES_ENV: &str = "MAJORDOMO_FIXTURES";

/// The fixtures directory: `$MAJORDOMO_FIXTURES` if set, otherwise the
/// `fixtures/` tree that ships with the workspace.
pub fn fixtures_root() -> PathBuf {
    if let Ok(dir) = std::env::var(FIXTURES_ENV) {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// A bundled file by its path under the fixtures root.
pub fn fixture(relative: &str) -> PathBuf {
    fixtures_root().join(relative)
}

/// Resolve a file reference from a scenario or config: absolute paths pass
/// through, anything else is taken relative to `root`.
pub fn resolve_at(root: &Path, reference: &str) -> PathBuf {
    let p = Path::new(reference);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}
