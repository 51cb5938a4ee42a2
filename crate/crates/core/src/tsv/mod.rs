//! Batched TSV serialization of block graphs for bulk graph import.

mod dedup;
pub mod format;
mod io;
mod manifest;
mod read;
mod write;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dedup::{dedup_nodes, DEFAULT_MEMORY_BUDGET};
pub use format::{NodeRow, EDGE_HEADER};
pub use manifest::{DedupGeneration, FileEntry, FileKind, Manifest, Segment, MANIFEST_FILE};
pub use read::{read_batches, read_dedup_nodes, SegmentData};
pub use write::{append_incremental, write_batches, WriteError};

#[derive(Debug, Error)]
pub enum TsvError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("sequencing error: expected height {expected}, got {found}")]
    Sequencing { expected: u64, found: u64 },
    #[error("corrupt file {path}: {reason}")]
    Corruption { path: PathBuf, reason: String },
    #[error("malformed row in {path} line {line}: {reason}")]
    Row { path: PathBuf, line: usize, reason: String },
    #[error("invalid manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("invalid layout: {0}")]
    Layout(String),
}

impl TsvError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> TsvError {
        let path = path.into();
        move |source| TsvError::Io { path, source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Compression {
    #[default]
    None,
    Gzip,
}

impl Compression {
    pub fn extension(self) -> &'static str {
        match self {
            Compression::None => "tsv",
            Compression::Gzip => "tsv.gz",
        }
    }
}

impl fmt::Display for Compression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Compression::None => "none",
            Compression::Gzip => "gzip",
        })
    }
}

impl FromStr for Compression {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Compression::None),
            "gzip" => Ok(Compression::Gzip),
            _ => Err(format!("unknown compression {s:?} (none | gzip)")),
        }
    }
}

/// Where and how batches are written. Batch `k` covers heights
/// `[k * batch_size, (k + 1) * batch_size)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchLayout {
    pub out_dir: PathBuf,
    pub batch_size: u64,
    pub compression: Compression,
}

impl BatchLayout {
    pub fn new(out_dir: impl Into<PathBuf>, batch_size: u64) -> Self {
        BatchLayout {
            out_dir: out_dir.into(),
            batch_size,
            compression: Compression::None,
        }
    }

    pub fn validate(&self) -> Result<(), TsvError> {
        if self.batch_size == 0 {
            return Err(TsvError::Layout("batch_size must be positive".into()));
        }
        Ok(())
    }

    pub fn batch_of(&self, height: u64) -> u64 {
        height / self.batch_size
    }
}
