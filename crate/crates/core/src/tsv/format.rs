//! Row layout of node and edge files.
//!
//! Headers follow the `neo4j-admin database import` dialect. All node files
//! share one ID space and put the first-seen height in the third column,
//! which the dedup pass relies on.

use std::borrow::Cow;

use crate::amount::Amount;
use crate::model::{BlockProps, EdgeRecord, EdgeType, Node, NodeKind, NodeRef, TxProps};
use crate::script::{ScriptId, ScriptType};

pub const EDGE_HEADER: &str =
    ":START_ID\t:END_ID\t:TYPE\tvalue_sat:long\theight:long\tstart_label:IGNORE\tend_label:IGNORE";

pub fn node_header(kind: NodeKind) -> &'static str {
    match kind {
        NodeKind::Coinbase => "id:ID\t:LABEL\theight:long",
        NodeKind::Script => "id:ID\t:LABEL\theight:long\tscript_type",
        NodeKind::Tx => {
            "id:ID\t:LABEL\theight:long\tsize:long\tvsize:long\tweight:long\tversion\tlock_time:long"
        }
        NodeKind::Block => {
            "id:ID\t:LABEL\theight:long\tmedian_time:long\tdifficulty:double\tn_tx:long\tsize:long\tstripped_size:long\tweight:long"
        }
    }
}

/// Column holding the first-seen height in every node file.
pub const HEIGHT_COLUMN: usize = 2;

fn needs_escape(b: u8) -> bool {
    b < 0x20 || b == 0x7f || b == b'%'
}

/// Percent-encodes control characters and `%`.
pub fn escape(s: &str) -> Cow<'_, str> {
    if !s.bytes().any(needs_escape) {
        return Cow::Borrowed(s);
    }
    let mut out = String::with_capacity(s.len() + 8);
    for c in s.chars() {
        if c.is_ascii() && needs_escape(c as u8) {
            out.push_str(&format!("%{:02X}", c as u8));
        } else {
            out.push(c);
        }
    }
    Cow::Owned(out)
}

pub fn unescape(s: &str) -> Result<Cow<'_, str>, String> {
    if !s.contains('%') {
        return Ok(Cow::Borrowed(s));
    }
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = s.get(i + 1..i + 3).ok_or_else(|| format!("truncated escape in {s:?}"))?;
            out.push(u8::from_str_radix(hex, 16).map_err(|_| format!("bad escape in {s:?}"))?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).map(Cow::Owned).map_err(|_| format!("escape yields invalid utf-8 in {s:?}"))
}

pub fn node_row(node: &Node, first_seen: u64) -> String {
    match node {
        Node::Coinbase => format!("{}\tCoinbase\t{first_seen}", crate::model::COINBASE_ID),
        Node::Script { id, script_type } => {
            format!("{}\tScript\t{first_seen}\t{}", escape(id.as_str()), script_type.as_str())
        }
        Node::Tx(p) => format!(
            "{}\tTx\t{first_seen}\t{}\t{}\t{}\t{}\t{}",
            escape(&p.txid),
            p.size,
            p.vsize,
            p.weight,
            escape(&p.version),
            p.lock_time
        ),
        Node::Block(p) => format!(
            "{}\tBlock\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            p.height, p.height, p.median_time, p.difficulty, p.n_tx, p.size, p.stripped_size, p.weight
        ),
    }
}

pub fn edge_row(e: &EdgeRecord) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}",
        escape(&e.src.id()),
        escape(&e.dst.id()),
        e.edge_type,
        e.value.to_sat(),
        e.height,
        e.src.kind(),
        e.dst.kind()
    )
}

fn field<T: std::str::FromStr>(cols: &[&str], i: usize, what: &str) -> Result<T, String> {
    cols.get(i)
        .ok_or_else(|| format!("missing {what} column"))?
        .parse()
        .map_err(|_| format!("bad {what} value {:?}", cols[i]))
}

/// A node row: the node plus the height it was first seen at.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRow {
    pub node: Node,
    pub height: u64,
}

pub fn parse_node_row(line: &str) -> Result<NodeRow, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    let kind: NodeKind = field(&cols, 1, "label")?;
    let expected = node_header(kind).split('\t').count();
    if cols.len() != expected {
        return Err(format!("{kind} row has {} columns, expected {expected}", cols.len()));
    }
    let id = unescape(cols[0])?;
    let height = field(&cols, HEIGHT_COLUMN, "height")?;
    let node = match kind {
        NodeKind::Coinbase => match NodeRef::from_parts(kind, &id)? {
            NodeRef::Coinbase => Node::Coinbase,
            _ => unreachable!(),
        },
        NodeKind::Script => Node::Script {
            id: ScriptId::parse(&id),
            script_type: field::<ScriptType>(&cols, 3, "script_type")?,
        },
        NodeKind::Tx => Node::Tx(TxProps {
            txid: id.into_owned(),
            size: field(&cols, 3, "size")?,
            vsize: field(&cols, 4, "vsize")?,
            weight: field(&cols, 5, "weight")?,
            version: unescape(cols[6])?.into_owned(),
            lock_time: field(&cols, 7, "lock_time")?,
        }),
        NodeKind::Block => Node::Block(BlockProps {
            height: field(&cols, 0, "id")?,
            median_time: field(&cols, 3, "median_time")?,
            difficulty: field(&cols, 4, "difficulty")?,
            n_tx: field(&cols, 5, "n_tx")?,
            size: field(&cols, 6, "size")?,
            stripped_size: field(&cols, 7, "stripped_size")?,
            weight: field(&cols, 8, "weight")?,
        }),
    };
    Ok(NodeRow { node, height })
}

pub fn parse_edge_row(line: &str) -> Result<EdgeRecord, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 7 {
        return Err(format!("edge row has {} columns, expected 7", cols.len()));
    }
    let src_kind: NodeKind = field(&cols, 5, "start_label")?;
    let dst_kind: NodeKind = field(&cols, 6, "end_label")?;
    let edge_type: EdgeType = field(&cols, 2, "type")?;
    Ok(EdgeRecord {
        src: NodeRef::from_parts(src_kind, &unescape(cols[0])?)?,
        dst: NodeRef::from_parts(dst_kind, &unescape(cols[1])?)?,
        edge_type,
        value: Amount::from_sat(field(&cols, 3, "value_sat")?),
        height: field(&cols, 4, "height")?,
    })
}

/// ID and first-seen height of a node row.
pub(crate) fn node_key(line: &str) -> (&str, u64) {
    let mut cols = line.split('\t');
    let id = cols.next().unwrap_or("");
    let height = cols.nth(1).and_then(|h| h.parse().ok()).unwrap_or(u64::MAX);
    (id, height)
}

/// Whether two rows of one node agree on everything but the height column.
pub(crate) fn same_properties(a: &str, b: &str) -> bool {
    a.split('\t')
        .zip(b.split('\t'))
        .enumerate()
        .all(|(i, (x, y))| i == HEIGHT_COLUMN || x == y)
        && a.split('\t').count() == b.split('\t').count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escape_round_trip() {
        for s in ["1AbHNF", "a\tb", "100%", "x\ny\u{7f}", "ünï"] {
            let e = escape(s);
            assert!(!e.contains('\t') && !e.contains('\n'));
            assert_eq!(unescape(&e).unwrap(), s);
        }
        assert_eq!(escape("a\tb"), "a%09b");
        assert!(unescape("%4").is_err());
    }

    #[test]
    fn headers_match_column_counts() {
        let tx = Node::Tx(TxProps {
            txid: "ab".into(),
            size: 1,
            vsize: 2,
            weight: 3,
            version: "1".into(),
            lock_time: 0,
        });
        let row = node_row(&tx, 7);
        assert_eq!(row.split('\t').count(), node_header(NodeKind::Tx).split('\t').count());
        assert_eq!(parse_node_row(&row).unwrap(), NodeRow { node: tx, height: 7 });
        assert_eq!(EDGE_HEADER.split('\t').count(), 7);
    }

    #[test]
    fn edge_round_trip() {
        let e = EdgeRecord::new(
            NodeRef::Script(ScriptId::parse("0-e95")),
            EdgeType::Redeems,
            NodeRef::Block(2817),
            Amount::from_sat(5),
            2817,
        );
        assert_eq!(parse_edge_row(&edge_row(&e)).unwrap(), e);
    }
}
