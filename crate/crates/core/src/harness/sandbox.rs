//! Private working copies of a repository.

use std::io;
use std::path::{Path, PathBuf};

use tempfile::TempDir;
use walkdir::WalkDir;

/// Entries never copied into a sandbox.
const EXCLUDED: &[&str] = &[".git", "__pycache__", ".pytest_cache", ".mypy_cache"];

/// Copies `src` into `dst` (created if missing), skipping version-control
/// metadata and interpreter caches. `std::fs::copy` uses `copy_file_range`
/// on Linux, which shares extents on filesystems that support it.
pub fn copy_tree(src: &Path, dst: &Path) -> io::Result<()> {
    std::fs::create_dir_all(dst)?;
    let walker = WalkDir::new(src).into_iter().filter_entry(|e| {
        e.depth() == 0 || !EXCLUDED.contains(&e.file_name().to_string_lossy().as_ref())
    });
    for entry in walker {
        let entry = entry.map_err(io::Error::other)?;
        let rel = entry.path().strip_prefix(src).map_err(io::Error::other)?;
        if rel.as_os_str().is_empty() {
            continue;
        }
        let target = dst.join(rel);
        let kind = entry.file_type();
        if kind.is_dir() {
            std::fs::create_dir_all(&target)?;
        } else if kind.is_file() {
            std::fs::copy(entry.path(), &target)?;
        } else if kind.is_symlink() {
            let link = std::fs::read_link(entry.path())?;
            std::os::unix::fs::symlink(link, &target)?;
        }
    }
    Ok(())
}

/// A temporary full copy of a repository, removed on drop.
#[derive(Debug)]
pub struct Sandbox {
    dir: TempDir,
}

impl Sandbox {
    pub fn create(src: &Path) -> io::Result<Self> {
        let dir = tempfile::Builder::new().prefix("faultline-sandbox-").tempdir()?;
        copy_tree(src, dir.path())?;
        Ok(Self { dir })
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    /// Keeps the directory on disk and returns its path.
    pub fn into_path(self) -> PathBuf {
        self.dir.keep()
    }
}
