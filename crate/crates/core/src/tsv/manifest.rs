use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BatchLayout, Compression, TsvError};
use crate::model::{EdgeType, NodeKind};

pub const MANIFEST_FILE: &str = "manifest.json";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileKind {
    Node,
    Edge,
    Conflicts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub kind: FileKind,
    /// Node label or edge type.
    pub label: String,
    /// Relative to the manifest's directory.
    pub path: String,
    pub rows: u64,
    pub sha256: String,
}

impl FileEntry {
    pub fn node_kind(&self) -> Option<NodeKind> {
        (self.kind == FileKind::Node).then(|| self.label.parse().ok()).flatten()
    }

    pub fn edge_type(&self) -> Option<EdgeType> {
        (self.kind == FileKind::Edge).then(|| self.label.parse().ok()).flatten()
    }
}

/// Files holding heights `start..=end`, all inside one batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub batch: u64,
    pub start: u64,
    pub end: u64,
    pub files: Vec<FileEntry>,
}

/// Deduplicated node files covering every segment up to `through_height`.
/// Each generation only holds IDs absent from all earlier generations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupGeneration {
    pub generation: u32,
    pub from_height: u64,
    pub through_height: u64,
    pub files: Vec<FileEntry>,
    pub conflicts: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub batch_size: u64,
    pub compression: Compression,
    #[serde(default)]
    pub tip_height_at_extraction: Option<u64>,
    /// Free-form build parameters recorded by the caller.
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub dedup: Vec<DedupGeneration>,
    #[serde(skip)]
    pub root: PathBuf,
}

impl Manifest {
    pub(crate) fn empty(layout: &BatchLayout) -> Self {
        Manifest {
            format_version: FORMAT_VERSION,
            batch_size: layout.batch_size,
            compression: layout.compression,
            tip_height_at_extraction: None,
            params: BTreeMap::new(),
            segments: Vec::new(),
            dedup: Vec::new(),
            root: layout.out_dir.clone(),
        }
    }

    pub fn layout(&self) -> BatchLayout {
        BatchLayout {
            out_dir: self.root.clone(),
            batch_size: self.batch_size,
            compression: self.compression,
        }
    }

    pub fn min_height(&self) -> Option<u64> {
        self.segments.first().map(|s| s.start)
    }

    pub fn max_height(&self) -> Option<u64> {
        self.segments.last().map(|s| s.end)
    }

    pub fn deduped_through(&self) -> Option<u64> {
        self.dedup.last().map(|g| g.through_height)
    }

    pub fn path(&self) -> PathBuf {
        self.root.join(MANIFEST_FILE)
    }

    /// Loads `dir/manifest.json`, or the file itself if a path to it is given.
    pub fn load(path: &Path) -> Result<Manifest, TsvError> {
        let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_owned() };
        let bytes = fs::read(&file).map_err(TsvError::io(&file))?;
        let mut m: Manifest = serde_json::from_slice(&bytes).map_err(|e| TsvError::Manifest {
            path: file.clone(),
            reason: e.to_string(),
        })?;
        if m.format_version != FORMAT_VERSION {
            return Err(TsvError::Manifest {
                path: file,
                reason: format!("unsupported format version {}", m.format_version),
            });
        }
        m.root = file.parent().map(Path::to_owned).unwrap_or_default();
        Ok(m)
    }

    /// Atomically replaces the manifest file.
    pub fn save(&self) -> Result<(), TsvError> {
        fs::create_dir_all(&self.root).map_err(TsvError::io(&self.root))?;
        let tmp = self.root.join(format!("{MANIFEST_FILE}.tmp"));
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(&tmp, text).map_err(TsvError::io(&tmp))?;
        fs::rename(&tmp, self.path()).map_err(TsvError::io(self.path()))
    }
}
