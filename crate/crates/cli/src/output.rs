//! Output staging: nothing touches the disk until every file is ready.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

#[derive(Debug, Default)]
pub struct Staged {
    files: Vec<(String, Vec<u8>)>,
}

impl Staged {
    pub fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    /// Creates `dir` if needed and writes every file atomically.
    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in self.files {
            let path = dir.join(name);
            cqra::io::write_atomic(&path, &bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// File name of a method's weights, e.g. `weights-cqra-t.json`.
pub fn weights_name(method: cqra::MethodTag) -> String {
    format!("weights-{}.json", method.as_str().to_ascii_lowercase())
}

pub fn forecast_name(method: cqra::MethodTag) -> String {
    format!("forecast-{}.csv", method.as_str().to_ascii_lowercase())
}
