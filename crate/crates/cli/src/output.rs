//! Run directories are written under a sibling staging name and renamed
//! into place at the end, so a half-written run never sits at `out`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

use crate::input_error;

pub struct Staging {
    pub dir: PathBuf,
    target: PathBuf,
    force: bool,
}

impl Staging {
    pub fn new(target: &Path, force: bool) -> Result<Self> {
        if target.exists() && !force {
            return Err(input_error(format!(
                "output directory {} already exists (pass --force to replace it)",
                target.display()
            )));
        }
        let name = target
            .file_name()
            .ok_or_else(|| input_error(format!("bad output directory {}", target.display())))?;
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
        let dir = parent.join(format!(".{}.partial-{}", name.to_string_lossy(), std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Staging {
            dir,
            target: target.to_path_buf(),
            force,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn finish(self) -> Result<PathBuf> {
        if self.force && self.target.exists() {
            fs::remove_dir_all(&self.target).with_context(|| format!("removing {}", self.target.display()))?;
        }
        fs::rename(&self.dir, &self.target).with_context(|| format!("moving run into {}", self.target.display()))?;
        Ok(self.target)
    }
}

/// SHA-256 of a file, hex.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| splinelc::Error::File {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// First line of every text artifact.
pub fn provenance(hash: &str) -> String {
    format!("{} config_hash={hash}", splinelc::TOOL)
}

/// Writes to `path`, or stdout when `path` is `None` or `-`.
pub fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) if p != Path::new("-") => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        _ => {
            print!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn staging_renames_and_refuses_overwrite() {
        let tmp = tempfile::tempdir().unwrap();
        let target = tmp.path().join("run");
        let s = Staging::new(&target, false).unwrap();
        fs::write(s.path("a.txt"), "x").unwrap();
        assert!(!target.exists());
        s.finish().unwrap();
        assert!(target.join("a.txt").exists());
        assert!(Staging::new(&target, false).is_err());
        let s = Staging::new(&target, true).unwrap();
        fs::write(s.path("b.txt"), "y").unwrap();
        s.finish().unwrap();
        assert!(!target.join("a.txt").exists());
        assert!(target.join("b.txt").exists());
    }
}
