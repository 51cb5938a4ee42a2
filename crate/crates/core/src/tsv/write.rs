use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::PathBuf;

use super::dedup::dedup_nodes;
use super::format::{edge_row, node_header, node_row, EDGE_HEADER};
use super::io::RowWriter;
use super::manifest::{FileEntry, FileKind, Manifest, Segment};
use super::{BatchLayout, TsvError};
use crate::model::BlockGraph;

/// Failure while serializing a graph stream: either the stream itself
/// yielded an error or writing failed.
#[derive(Debug)]
pub enum WriteError<E> {
    Source(E),
    Tsv(TsvError),
}

impl<E: fmt::Display> fmt::Display for WriteError<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WriteError::Source(e) => e.fmt(f),
            WriteError::Tsv(e) => e.fmt(f),
        }
    }
}

impl<E: std::error::Error + 'static> std::error::Error for WriteError<E> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            WriteError::Source(e) => Some(e),
            WriteError::Tsv(e) => Some(e),
        }
    }
}

impl<E> From<TsvError> for WriteError<E> {
    fn from(e: TsvError) -> Self {
        WriteError::Tsv(e)
    }
}

struct OpenSegment {
    batch: u64,
    start: u64,
    end: u64,
    writers: BTreeMap<(FileKind, String), (PathBuf, RowWriter)>,
}

impl OpenSegment {
    fn writer(
        &mut self,
        layout: &BatchLayout,
        kind: FileKind,
        label: &str,
        header: &str,
    ) -> Result<&mut RowWriter, TsvError> {
        let key = (kind, label.to_owned());
        if !self.writers.contains_key(&key) {
            let dir = if kind == FileKind::Node { "nodes" } else { "edges" };
            let tmp = layout.out_dir.join(dir).join(format!("{label}_{}.partial", self.start));
            let w = RowWriter::create(&tmp, header, layout.compression)?;
            self.writers.insert(key.clone(), (tmp, w));
        }
        Ok(&mut self.writers.get_mut(&key).expect("inserted above").1)
    }

    fn add(&mut self, layout: &BatchLayout, g: &BlockGraph) -> Result<(), TsvError> {
        for n in &g.nodes {
            let kind = n.kind();
            self.writer(layout, FileKind::Node, kind.as_str(), node_header(kind))?
                .write_row(&node_row(n, g.height))?;
        }
        for e in &g.edges {
            let t = e.edge_type.as_str();
            self.writer(layout, FileKind::Edge, t, EDGE_HEADER)?
                .write_row(&edge_row(e))?;
        }
        self.end = g.height;
        Ok(())
    }

    fn finish(self, layout: &BatchLayout) -> Result<Segment, TsvError> {
        let mut files = Vec::with_capacity(self.writers.len());
        for ((kind, label), (tmp, w)) in self.writers {
            let (rows, sha256) = w.finish()?;
            let dir = if kind == FileKind::Node { "nodes" } else { "edges" };
            let rel = format!("{dir}/{label}_{}_{}.{}", self.start, self.end, layout.compression.extension());
            let dest = layout.out_dir.join(&rel);
            fs::rename(&tmp, &dest).map_err(TsvError::io(&dest))?;
            files.push(FileEntry {
                kind,
                label,
                path: rel,
                rows,
                sha256,
            });
        }
        Ok(Segment {
            batch: self.batch,
            start: self.start,
            end: self.end,
            files,
        })
    }

    fn discard(self) {
        for (_, (tmp, w)) in self.writers {
            drop(w);
            let _ = fs::remove_file(tmp);
        }
    }
}

fn extend<E>(
    manifest: &mut Manifest,
    graphs: impl IntoIterator<Item = Result<BlockGraph, E>>,
    mut expected: Option<u64>,
) -> Result<(), WriteError<E>> {
    let layout = manifest.layout();
    let mut open: Option<OpenSegment> = None;
    let mut last: Option<u64> = manifest.max_height();
    let result = (|| {
        for g in graphs {
            let g = g.map_err(WriteError::Source)?;
            if let Some(e) = expected.take() {
                if g.height != e {
                    return Err(TsvError::Sequencing { expected: e, found: g.height }.into());
                }
            } else if let Some(prev) = last {
                if g.height <= prev {
                    return Err(TsvError::Sequencing { expected: prev + 1, found: g.height }.into());
                }
            }
            last = Some(g.height);
            let batch = layout.batch_of(g.height);
            if open.as_ref().is_some_and(|s| s.batch != batch) {
                let seg = open.take().expect("checked").finish(&layout)?;
                manifest.segments.push(seg);
            }
            let seg = open.get_or_insert_with(|| OpenSegment {
                batch,
                start: g.height,
                end: g.height,
                writers: BTreeMap::new(),
            });
            seg.add(&layout, &g)?;
        }
        if let Some(seg) = open.take() {
            manifest.segments.push(seg.finish(&layout)?);
        }
        Ok(())
    })();
    if let Some(seg) = open.take() {
        seg.discard();
    }
    result
}

/// Serializes an ascending stream of block graphs into `layout.out_dir`.
///
/// On failure the incomplete segment is removed and the manifest lists the
/// completed segments, so the run can be continued with
/// [`append_incremental`].
pub fn write_batches<E>(
    graphs: impl IntoIterator<Item = Result<BlockGraph, E>>,
    layout: &BatchLayout,
) -> Result<Manifest, WriteError<E>> {
    layout.validate()?;
    let _ = fs::remove_file(layout.out_dir.join(super::MANIFEST_FILE));
    let mut m = Manifest::empty(layout);
    let res = extend(&mut m, graphs, None);
    m.save()?;
    res.map(|_| m)
}

/// Appends graphs starting right after `manifest.max_height()`. When the
/// manifest was deduplicated, the new segments are deduplicated against the
/// existing generations.
pub fn append_incremental<E>(
    manifest: &Manifest,
    graphs: impl IntoIterator<Item = Result<BlockGraph, E>>,
    dedup_budget: usize,
) -> Result<Manifest, WriteError<E>> {
    let mut m = manifest.clone();
    let before = m.segments.len();
    let expected = m.max_height().map(|h| h + 1);
    let res = extend(&mut m, graphs, expected);
    if m.segments.len() == before {
        return res.map(|_| m);
    }
    m.save()?;
    res?;
    if !m.dedup.is_empty() {
        m = dedup_nodes(&m, dedup_budget)?;
    }
    Ok(m)
}
