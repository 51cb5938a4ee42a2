use super::format::{parse_edge_row, parse_node_row, NodeRow};
use super::io::read_verified;
use super::manifest::{FileKind, Manifest, Segment};
use super::TsvError;
use crate::model::EdgeRecord;

/// Rows of one segment, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SegmentData {
    pub start: u64,
    pub end: u64,
    pub nodes: Vec<NodeRow>,
    pub edges: Vec<EdgeRecord>,
}

fn read_segment(m: &Manifest, seg: &Segment) -> Result<SegmentData, TsvError> {
    let mut data = SegmentData {
        start: seg.start,
        end: seg.end,
        ..Default::default()
    };
    for f in &seg.files {
        let path = m.root.join(&f.path);
        let row_err = |line: usize, reason: String| TsvError::Row {
            path: path.clone(),
            line,
            reason,
        };
        match f.kind {
            FileKind::Node => read_verified(&m.root, f, |line, row| {
                data.nodes.push(parse_node_row(row).map_err(|r| row_err(line, r))?);
                Ok(())
            })?,
            FileKind::Edge => read_verified(&m.root, f, |line, row| {
                data.edges.push(parse_edge_row(row).map_err(|r| row_err(line, r))?);
                Ok(())
            })?,
            FileKind::Conflicts => {}
        }
    }
    Ok(data)
}

/// Streams segments back in height order, verifying every file's digest and
/// row count against the manifest.
pub fn read_batches(m: &Manifest) -> impl Iterator<Item = Result<SegmentData, TsvError>> + '_ {
    m.segments.iter().map(move |s| read_segment(m, s))
}

/// All deduplicated node rows across generations.
pub fn read_dedup_nodes(m: &Manifest) -> Result<Vec<NodeRow>, TsvError> {
    let mut out = Vec::new();
    for g in &m.dedup {
        for f in g.files.iter().filter(|f| f.kind == FileKind::Node) {
            let path = m.root.join(&f.path);
            read_verified(&m.root, f, |line, row| {
                out.push(parse_node_row(row).map_err(|reason| TsvError::Row {
                    path: path.clone(),
                    line,
                    reason,
                })?);
                Ok(())
            })?;
        }
    }
    Ok(out)
}
