use std::path::{Path, PathBuf};

use anyhow::Context as _;
use omori_core::ingest::{create_file, csv_files_in};

/// Expands directories into the CSV files they contain.
pub fn expand(paths: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            out.extend(csv_files_in(p)?);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Runs `write` against a freshly created file at `dir/name`.
pub fn write_to<F>(dir: &Path, name: &str, write: F) -> anyhow::Result<PathBuf>
where
    F: FnOnce(std::fs::File) -> omori_core::Result<()>,
{
    let path = dir.join(name);
    let f = create_file(&path)?;
    write(f).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
