//! File formats, benchmark orchestration and the command-line front end
//! for the `polyfit-core` model families.

pub mod bench;
pub mod cli;
pub mod config;
pub mod dataset_io;
pub mod error;
pub mod fit_io;
pub mod model_io;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config.json";

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(format!("cannot encode JSON: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub files: Vec<ManifestEntry>,
}

#[derive(Serialize)]
struct EffectiveConfig<'a, T: Serialize> {
    command: &'a str,
    config_file: Option<&'a Path>,
    settings: &'a T,
}

/// An output directory that remembers what was written into it.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(OutputDir { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Absolute path for `rel`, creating parent directories.
    pub fn path(&mut self, rel: &str) -> Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        if !self.files.iter().any(|f| f == rel) {
            self.files.push(rel.to_string());
        }
        Ok(p)
    }

    pub fn write_text(&mut self, rel: &str, text: &str) -> Result<PathBuf> {
        let p = self.path(rel)?;
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> Result<PathBuf> {
        let p = self.path(rel)?;
        write_json(&p, value)?;
        Ok(p)
    }

    /// Writes the effective configuration and the manifest of every file.
    pub fn finish<T: Serialize>(mut self, command: &str, config_file: Option<&Path>, settings: &T) -> Result<Manifest> {
        self.write_json(EFFECTIVE_CONFIG_FILE, &EffectiveConfig { command, config_file, settings })?;
        let mut files = Vec::new();
        for rel in &self.files {
            let p = self.root.join(rel);
            let bytes = fs::metadata(&p).map_err(|e| Error::io(&p, e))?.len();
            files.push(ManifestEntry { path: rel.clone(), bytes });
        }
        files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            files,
        };
        write_json(&self.root.join(MANIFEST_FILE), &manifest)?;
        Ok(manifest)
    }
}
