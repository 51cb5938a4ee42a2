//! Node and edge vocabulary of the graph, and the per-block container.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::amount::Amount;
use crate::script::{ScriptId, ScriptType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub enum NodeKind {
    Coinbase,
    Script,
    Tx,
    Block,
}

impl NodeKind {
    pub const ALL: [NodeKind; 4] = [NodeKind::Coinbase, NodeKind::Script, NodeKind::Tx, NodeKind::Block];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Coinbase => "Coinbase",
            NodeKind::Script => "Script",
            NodeKind::Tx => "Tx",
            NodeKind::Block => "Block",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown node label {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeRef {
    /// The single minting origin.
    Coinbase,
    Script(ScriptId),
    Tx(String),
    Block(u64),
}

/// Serialized identity of the Coinbase node.
pub const COINBASE_ID: &str = "Coinbase";

impl NodeRef {
    pub fn kind(&self) -> NodeKind {
        match self {
            NodeRef::Coinbase => NodeKind::Coinbase,
            NodeRef::Script(_) => NodeKind::Script,
            NodeRef::Tx(_) => NodeKind::Tx,
            NodeRef::Block(_) => NodeKind::Block,
        }
    }

    /// The node's identity string within its kind.
    pub fn id(&self) -> String {
        match self {
            NodeRef::Coinbase => COINBASE_ID.to_owned(),
            NodeRef::Script(s) => s.as_str().to_owned(),
            NodeRef::Tx(t) => t.clone(),
            NodeRef::Block(h) => h.to_string(),
        }
    }

    pub fn from_parts(kind: NodeKind, id: &str) -> Result<NodeRef, String> {
        Ok(match kind {
            NodeKind::Coinbase if id == COINBASE_ID => NodeRef::Coinbase,
            NodeKind::Coinbase => return Err(format!("bad coinbase id {id:?}")),
            NodeKind::Script => NodeRef::Script(ScriptId::parse(id)),
            NodeKind::Tx => NodeRef::Tx(id.to_owned()),
            NodeKind::Block => NodeRef::Block(id.parse().map_err(|_| format!("bad block id {id:?}"))?),
        })
    }
}

/// Parses the `Kind:id` form produced by `Display`.
impl FromStr for NodeRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, id) = s.split_once(':').ok_or_else(|| format!("expected Kind:id, got {s:?}"))?;
        NodeRef::from_parts(kind.parse()?, id)
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind(), self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeType {
    Mints,
    Transfers,
    Fee,
    Redeems,
    Confirms,
    Credits,
}

impl EdgeType {
    pub const ALL: [EdgeType; 6] = [
        EdgeType::Mints,
        EdgeType::Transfers,
        EdgeType::Fee,
        EdgeType::Redeems,
        EdgeType::Confirms,
        EdgeType::Credits,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeType::Mints => "Mints",
            EdgeType::Transfers => "Transfers",
            EdgeType::Fee => "Fee",
            EdgeType::Redeems => "Redeems",
            EdgeType::Confirms => "Confirms",
            EdgeType::Credits => "Credits",
        }
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EdgeType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EdgeType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown edge type {s:?}"))
    }
}

/// The ten permitted `(source kind, edge type, target kind)` patterns.
pub const PERMITTED_PATTERNS: [(NodeKind, EdgeType, NodeKind); 10] = [
    (NodeKind::Coinbase, EdgeType::Mints, NodeKind::Script),
    (NodeKind::Coinbase, EdgeType::Mints, NodeKind::Tx),
    (NodeKind::Script, EdgeType::Transfers, NodeKind::Script),
    (NodeKind::Tx, EdgeType::Transfers, NodeKind::Tx),
    (NodeKind::Script, EdgeType::Fee, NodeKind::Script),
    (NodeKind::Tx, EdgeType::Fee, NodeKind::Tx),
    (NodeKind::Script, EdgeType::Redeems, NodeKind::Block),
    (NodeKind::Tx, EdgeType::Redeems, NodeKind::Block),
    (NodeKind::Block, EdgeType::Credits, NodeKind::Script),
    (NodeKind::Block, EdgeType::Confirms, NodeKind::Tx),
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeRecord {
    pub src: NodeRef,
    pub dst: NodeRef,
    pub edge_type: EdgeType,
    pub value: Amount,
    pub height: u64,
}

impl EdgeRecord {
    pub fn new(src: NodeRef, edge_type: EdgeType, dst: NodeRef, value: Amount, height: u64) -> Self {
        EdgeRecord {
            src,
            dst,
            edge_type,
            value,
            height,
        }
    }
}

/// True iff the edge's `(src, type, dst)` is one of the schema patterns.
pub fn check_pattern(e: &EdgeRecord) -> bool {
    PERMITTED_PATTERNS.contains(&(e.src.kind(), e.edge_type, e.dst.kind()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TxProps {
    pub txid: String,
    pub size: u64,
    pub vsize: u64,
    pub weight: u64,
    pub version: String,
    pub lock_time: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockProps {
    pub height: u64,
    pub median_time: i64,
    pub difficulty: f64,
    pub n_tx: u64,
    pub size: u64,
    pub stripped_size: u64,
    pub weight: u64,
}

/// A node together with its properties.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Coinbase,
    Script { id: ScriptId, script_type: ScriptType },
    Tx(TxProps),
    Block(BlockProps),
}

impl Node {
    pub fn node_ref(&self) -> NodeRef {
        match self {
            Node::Coinbase => NodeRef::Coinbase,
            Node::Script { id, .. } => NodeRef::Script(id.clone()),
            Node::Tx(p) => NodeRef::Tx(p.txid.clone()),
            Node::Block(p) => NodeRef::Block(p.height),
        }
    }

    pub fn kind(&self) -> NodeKind {
        match self {
            Node::Coinbase => NodeKind::Coinbase,
            Node::Script { .. } => NodeKind::Script,
            Node::Tx(_) => NodeKind::Tx,
            Node::Block(_) => NodeKind::Block,
        }
    }
}

/// One block modelled as an independent graph.
///
/// `edges` is a multiset in construction order: parallel edges stay
/// separate. Tx nodes confirmed in earlier blocks are referenced by id only
/// and listed in `external_txs`; their property rows live with their own block.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlockGraph {
    pub height: u64,
    pub nodes: Vec<Node>,
    pub edges: Vec<EdgeRecord>,
    pub external_txs: Vec<String>,
}

impl BlockGraph {
    pub fn nodes_of(&self, kind: NodeKind) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(move |n| n.kind() == kind)
    }

    pub fn edges_of(&self, t: EdgeType) -> impl Iterator<Item = &EdgeRecord> {
        self.edges.iter().filter(move |e| e.edge_type == t)
    }

    /// Endpoints not covered by `nodes` or `external_txs`.
    pub fn dangling_endpoints(&self) -> Vec<NodeRef> {
        let mut known: HashSet<NodeRef> = self.nodes.iter().map(Node::node_ref).collect();
        known.extend(self.external_txs.iter().cloned().map(NodeRef::Tx));
        let mut out = Vec::new();
        for e in &self.edges {
            for n in [&e.src, &e.dst] {
                if !known.contains(n) {
                    out.push(n.clone());
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn script(s: &str) -> NodeRef {
        NodeRef::Script(ScriptId::address(s))
    }

    #[test]
    fn permitted_patterns() {
        let mint = EdgeRecord::new(NodeRef::Coinbase, EdgeType::Mints, script("miner"), Amount::ZERO, 2817);
        assert!(check_pattern(&mint));
        let bad = EdgeRecord::new(script("a"), EdgeType::Confirms, NodeRef::Block(2817), Amount::ZERO, 2817);
        assert!(!check_pattern(&bad));
        let credit = EdgeRecord::new(NodeRef::Block(2817), EdgeType::Credits, script("v"), Amount::ZERO, 2817);
        assert!(check_pattern(&credit));
    }

    #[test]
    fn exhaustive_pattern_count() {
        let kinds = NodeKind::ALL;
        let mut allowed = 0;
        for s in kinds {
            for t in EdgeType::ALL {
                for d in kinds {
                    let src = match s {
                        NodeKind::Coinbase => NodeRef::Coinbase,
                        NodeKind::Script => script("x"),
                        NodeKind::Tx => NodeRef::Tx("t".into()),
                        NodeKind::Block => NodeRef::Block(1),
                    };
                    let dst = match d {
                        NodeKind::Coinbase => NodeRef::Coinbase,
                        NodeKind::Script => script("y"),
                        NodeKind::Tx => NodeRef::Tx("u".into()),
                        NodeKind::Block => NodeRef::Block(1),
                    };
                    if check_pattern(&EdgeRecord::new(src, t, dst, Amount::ZERO, 1)) {
                        allowed += 1;
                        assert_ne!(d, NodeKind::Coinbase, "coinbase must have no incoming edges");
                    }
                }
            }
        }
        assert_eq!(allowed, 10);
    }

    #[test]
    fn node_ref_round_trip() {
        for n in [NodeRef::Coinbase, script("1AbH"), NodeRef::Tx("ab".into()), NodeRef::Block(7)] {
            assert_eq!(NodeRef::from_parts(n.kind(), &n.id()).unwrap(), n);
        }
    }
}
