//! All-or-nothing output: files are rendered in memory, written to a
//! staging directory and only then moved into place.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_owned(), bytes));
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn commit(&self, out: &Path) -> Result<()> {
        let staging = staging_dir(out);
        if staging.exists() {
            fs::remove_dir_all(&staging).with_context(|| format!("clearing {}", staging.display()))?;
        }
        let written = self.stage(&staging).and_then(|()| {
            fs::create_dir_all(out)?;
            for (name, _) in &self.files {
                fs::rename(staging.join(name), out.join(name)).with_context(|| format!("moving {name}"))?;
            }
            Ok(())
        });
        let _ = fs::remove_dir_all(&staging);
        written
    }

    fn stage(&self, staging: &Path) -> Result<()> {
        fs::create_dir_all(staging).with_context(|| format!("creating {}", staging.display()))?;
        for (name, bytes) in &self.files {
            fs::write(staging.join(name), bytes).with_context(|| format!("writing {name}"))?;
        }
        Ok(())
    }
}

/// Sibling of `out`, so the final renames stay on one filesystem.
fn staging_dir(out: &Path) -> PathBuf {
    let name = out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    parent.join(format!(".{name}.staging-{}", std::process::id()))
}
