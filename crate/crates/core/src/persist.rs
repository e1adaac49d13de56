//! JSON documents on disk.
//!
//! Every document is a JSON object carrying `schema_version` next to its own
//! fields. Writes go to a temporary file in the target directory which is
//! then renamed over the destination, so readers see either the old or the
//! new document and never a torn one.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versioned<T> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub doc: T,
}

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: unsupported schema_version {found}")]
    Version { path: PathBuf, found: u32 },
}

impl PersistError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PersistError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn is_not_found(&self) -> bool {
        matches!(self, PersistError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }
}

/// Pretty JSON with a trailing newline, as written to disk.
pub fn to_document<T: Serialize>(doc: &T) -> String {
    let wrapped = Versioned {
        schema_version: SCHEMA_VERSION,
        doc,
    };
    let mut text = serde_json::to_string_pretty(&wrapped).expect("documents serialize");
    text.push('\n');
    text
}

/// Writes `bytes` to `path` through a temporary file and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PersistError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| PersistError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| PersistError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| PersistError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| PersistError::io(path, e))?;
    tmp.persist(path).map_err(|e| PersistError::io(path, e.error))?;
    Ok(())
}

pub fn write_document<T: Serialize>(path: &Path, doc: &T) -> Result<(), PersistError> {
    write_atomic(path, to_document(doc).as_bytes())
}

pub fn parse_document<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T, PersistError> {
    let wrapped: Versioned<T> = serde_json::from_str(text).map_err(|source| PersistError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if wrapped.schema_version != SCHEMA_VERSION {
        return Err(PersistError::Version {
            path: path.to_path_buf(),
            found: wrapped.schema_version,
        });
    }
    Ok(wrapped.doc)
}

pub fn read_document<T: DeserializeOwned>(path: &Path) -> Result<T, PersistError> {
    let text = std::fs::read_to_string(path).map_err(|e| PersistError::io(path, e))?;
    parse_document(path, &text)
}
