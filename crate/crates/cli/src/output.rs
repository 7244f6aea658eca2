//! Staged outputs: everything is written under a temporary name and moved
//! into place only when the whole command succeeds.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

#[derive(Debug, Default)]
pub struct Outputs {
    staged: Vec<(PathBuf, PathBuf)>,
}

fn remove(p: &Path) {
    if p.is_dir() {
        let _ = fs::remove_dir_all(p);
    } else {
        let _ = fs::remove_file(p);
    }
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    /// Temporary path standing in for `target` until [`Outputs::commit`].
    pub fn stage(&mut self, target: &Path) -> Result<PathBuf> {
        let name = target.file_name().with_context(|| format!("output path {} has no file name", target.display()))?;
        let mut tmp_name = name.to_os_string();
        tmp_name.push(".partial");
        let tmp = target.with_file_name(tmp_name);
        if let Some(parent) = tmp.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        remove(&tmp);
        self.staged.push((tmp.clone(), target.to_path_buf()));
        Ok(tmp)
    }

    /// Move every staged path to its final name, replacing older outputs.
    pub fn commit(mut self) -> Result<Vec<PathBuf>> {
        let staged = std::mem::take(&mut self.staged);
        let mut done = Vec::with_capacity(staged.len());
        for (tmp, target) in staged {
            remove(&target);
            fs::rename(&tmp, &target).with_context(|| format!("moving {} into place", target.display()))?;
            done.push(target);
        }
        Ok(done)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        for (tmp, _) in &self.staged {
            remove(tmp);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_moves_and_drop_cleans() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("report.csv");
        fs::write(&target, "old").unwrap();

        let mut out = Outputs::new();
        let tmp = out.stage(&target).unwrap();
        fs::write(&tmp, "new").unwrap();
        drop(out);
        assert!(!tmp.exists());
        assert_eq!(fs::read_to_string(&target).unwrap(), "old");

        let mut out = Outputs::new();
        let tmp = out.stage(&target).unwrap();
        fs::write(&tmp, "new").unwrap();
        let sub = out.stage(&dir.path().join("sub")).unwrap();
        fs::create_dir_all(sub.join("deep")).unwrap();
        out.commit().unwrap();
        assert_eq!(fs::read_to_string(&target).unwrap(), "new");
        assert!(dir.path().join("sub/deep").is_dir());
        assert!(!tmp.exists());
    }
}
