pub mod convert;
pub mod eval;
pub mod genmask;
pub mod phantom;
pub mod register;
pub mod synth;

use std::path::{Path, PathBuf};

use crate::Failure;

pub fn create_dir(path: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(path).map_err(|e| Failure::Config(format!("cannot create {}: {e}", path.display())))
}

/// Writes `text` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, text: &str) -> Result<(), Failure> {
    let tmp = partial_path(path);
    std::fs::write(&tmp, text)
        .and_then(|_| std::fs::rename(&tmp, path))
        .map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))
}

/// `dir/.name.partial` for `dir/name`.
pub fn partial_path(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.partial"))
}

pub fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Failure::Core(e.into()))
}
