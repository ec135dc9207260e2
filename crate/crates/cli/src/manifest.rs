//! Output directories and their manifests.
//!
//! Paths inside a manifest are relative to the directory holding it, so a
//! whole run tree can be moved or compared byte for byte.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Component, Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub options: Value,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| file_err(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn file_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::File {
        path: path.display().to_string(),
        source,
    }
}

fn normalize(path: &Path) -> PathBuf {
    let abs = std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf());
    let mut out = PathBuf::new();
    for c in abs.components() {
        match c {
            Component::ParentDir => {
                out.pop();
            }
            Component::CurDir => {}
            other => out.push(other),
        }
    }
    out
}

/// `path` as seen from `base`, using `..` where needed.
pub fn relative_to(path: &Path, base: &Path) -> String {
    let p = normalize(path);
    let b = normalize(base);
    let pc: Vec<_> = p.components().collect();
    let bc: Vec<_> = b.components().collect();
    let common = pc.iter().zip(&bc).take_while(|(x, y)| x == y).count();
    let mut rel = PathBuf::new();
    for _ in common..bc.len() {
        rel.push("..");
    }
    for c in &pc[common..] {
        rel.push(c);
    }
    rel.to_string_lossy().replace('\\', "/")
}

/// One command's output directory.
pub struct Run {
    pub dir: PathBuf,
    manifest: Manifest,
}

impl Run {
    pub fn new(dir: &Path, command: &str, seed: u64, options: impl Serialize) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| file_err(dir, e))?;
        Ok(Run {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                tool: "argus".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                seed,
                options: serde_json::to_value(options)?,
                inputs: Vec::new(),
                outputs: Vec::new(),
                notes: Vec::new(),
            },
        })
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        self.manifest.inputs.push(FileEntry {
            role: role.into(),
            path: relative_to(path, &self.dir),
            sha256,
        });
        Ok(())
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.manifest.notes.push(note.into());
    }

    /// Resolves a name under the run directory (absolute names pass through).
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Lists a file written by someone else as an output of this run.
    pub fn record(&mut self, role: &str, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        let rel = relative_to(path, &self.dir);
        self.manifest.outputs.retain(|o| o.path != rel);
        self.manifest.outputs.push(FileEntry {
            role: role.into(),
            path: rel,
            sha256,
        });
        Ok(())
    }

    pub fn write_with(
        &mut self,
        role: &str,
        name: &str,
        f: impl FnOnce(&mut dyn Write) -> Result<()>,
    ) -> Result<PathBuf> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| file_err(parent, e))?;
        }
        let file = fs::File::create(&path).map_err(|e| file_err(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush()?;
        drop(w);
        self.record(role, &path)?;
        Ok(path)
    }

    pub fn write_json<T: Serialize + ?Sized>(
        &mut self,
        role: &str,
        name: &str,
        value: &T,
    ) -> Result<PathBuf> {
        self.write_with(role, name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n")?;
            Ok(())
        })
    }

    pub fn write_jsonl<T: Serialize>(
        &mut self,
        role: &str,
        name: &str,
        rows: &[T],
    ) -> Result<PathBuf> {
        self.write_with(role, name, |w| {
            Ok(argus_core::corpus::write_jsonl(w, rows)?)
        })
    }

    pub fn write_text(&mut self, role: &str, name: &str, text: &str) -> Result<PathBuf> {
        self.write_with(role, name, |w| Ok(w.write_all(text.as_bytes())?))
    }

    /// Writes `manifest.json`; outputs are listed in path order.
    pub fn finish(mut self) -> Result<PathBuf> {
        self.manifest.outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let path = self.path(MANIFEST);
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| file_err(&path, e))?;
        Ok(path)
    }
}

pub fn open(path: &Path) -> Result<BufReader<fs::File>> {
    Ok(BufReader::new(
        fs::File::open(path).map_err(|e| file_err(path, e))?,
    ))
}
