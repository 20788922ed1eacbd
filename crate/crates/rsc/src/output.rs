//! Output directories that remove everything they wrote unless committed.

use std::path::{Path, PathBuf};

use rsc_core::Image;

use crate::cli::CliError;
use crate::io::{pfm, png, FormatError};

#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    created: Vec<PathBuf>,
    files: Vec<PathBuf>,
    committed: bool,
}

fn write_err(e: FormatError) -> CliError {
    CliError::Runtime(e.to_string())
}

impl OutputDir {
    /// Creates `root` and any missing parents.
    pub fn create(root: &Path) -> Result<Self, CliError> {
        let mut out = Self {
            root: root.to_path_buf(),
            created: Vec::new(),
            files: Vec::new(),
            committed: false,
        };
        out.make_dir(root)?;
        Ok(out)
    }

    fn make_dir(&mut self, dir: &Path) -> Result<(), CliError> {
        let missing: Vec<PathBuf> = dir
            .ancestors()
            .take_while(|p| !p.as_os_str().is_empty() && !p.exists())
            .map(Path::to_path_buf)
            .collect();
        for d in missing.into_iter().rev() {
            std::fs::create_dir(&d)
                .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", d.display())))?;
            self.created.push(d);
        }
        if !dir.is_dir() {
            return Err(CliError::Usage(format!(
                "{} is not a directory",
                dir.display()
            )));
        }
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Creates a subdirectory and returns its path relative to the root.
    pub fn subdir(&mut self, name: &str) -> Result<PathBuf, CliError> {
        let dir = self.root.join(name);
        self.make_dir(&dir)?;
        Ok(PathBuf::from(name))
    }

    fn track(&mut self, rel: &Path) -> PathBuf {
        let path = self.root.join(rel);
        self.files.push(path.clone());
        path
    }

    pub fn bytes(&mut self, rel: impl AsRef<Path>, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.track(rel.as_ref());
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
    }

    pub fn text(&mut self, rel: impl AsRef<Path>, text: &str) -> Result<(), CliError> {
        self.bytes(rel, text.as_bytes())
    }

    pub fn pfm(&mut self, rel: impl AsRef<Path>, img: &Image) -> Result<(), CliError> {
        let path = self.track(rel.as_ref());
        pfm::write(&path, img).map_err(write_err)
    }

    pub fn png(&mut self, rel: impl AsRef<Path>, img: &Image) -> Result<(), CliError> {
        let path = self.track(rel.as_ref());
        png::write(&path, img).map_err(write_err)
    }

    /// Keeps the outputs.
    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in self.files.iter().rev() {
            let _ = std::fs::remove_file(f);
        }
        for d in self.created.iter().rev() {
            let _ = std::fs::remove_dir(d);
        }
    }
}
