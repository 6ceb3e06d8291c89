//! JSON report files.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::create_file;
use crate::stats::TestResult;

/// Pretty-printed JSON with a trailing newline, replacing any existing file.
pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut f = create_file(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// `tests.json`: an array of test records.
pub fn write_tests_json(path: impl AsRef<Path>, tests: &[TestResult]) -> Result<()> {
    write_json(path, tests)
}
