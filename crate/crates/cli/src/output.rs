//! Result files. Everything is computed before the first byte is written, and
//! each file goes through a temporary sibling so a failed run leaves nothing
//! half-written behind.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// `results/run.csv` -> `results/run.meta.json`.
pub fn metadata_path(output: &Path) -> PathBuf {
    output.with_extension("meta.json")
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp"))
}

pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let tmp = temp_sibling(path);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Writes the data file and its metadata, data last so that a present data
/// file always has its metadata next to it.
pub fn write_results(output: &Path, data: &str, metadata: &serde_json::Value) -> std::io::Result<()> {
    let meta = serde_json::to_string_pretty(metadata).expect("metadata serializes") + "\n";
    write_atomic(&metadata_path(output), &meta)?;
    write_atomic(output, data)
}
