use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TypeFilter;
use crate::model::{EdgeRecord, Node, NodeKind, NodeRef};
use crate::script::ScriptType;
use crate::tsv::{format::parse_edge_row, read_batches, Manifest, TsvError};

/// Read-only in-memory adjacency over a serialized graph.
#[derive(Debug, Default, Clone)]
pub struct GraphStore {
    pub(crate) nodes: Vec<NodeRef>,
    pub(crate) script_types: Vec<Option<ScriptType>>,
    pub(crate) index: HashMap<NodeRef, u32>,
    pub(crate) edges: Vec<EdgeRecord>,
    pub(crate) out_adj: Vec<Vec<u32>>,
    pub(crate) in_adj: Vec<Vec<u32>>,
}

impl GraphStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn intern(&mut self, r: &NodeRef) -> u32 {
        if let Some(&i) = self.index.get(r) {
            return i;
        }
        let i = self.nodes.len() as u32;
        self.nodes.push(r.clone());
        self.script_types.push(None);
        self.out_adj.push(Vec::new());
        self.in_adj.push(Vec::new());
        self.index.insert(r.clone(), i);
        i
    }

    pub fn add_node(&mut self, node: &Node) {
        let i = self.intern(&node.node_ref()) as usize;
        if let Node::Script { script_type, .. } = node {
            self.script_types[i].get_or_insert(*script_type);
        }
    }

    pub fn add_edge(&mut self, e: EdgeRecord) {
        let s = self.intern(&e.src);
        let d = self.intern(&e.dst);
        let id = self.edges.len() as u32;
        self.edges.push(e);
        self.out_adj[s as usize].push(id);
        self.in_adj[d as usize].push(id);
    }

    pub fn from_manifest(m: &Manifest) -> Result<GraphStore, TsvError> {
        let mut g = GraphStore::new();
        for seg in read_batches(m) {
            let seg = seg?;
            for n in &seg.nodes {
                g.add_node(&n.node);
            }
            for e in seg.edges {
                g.add_edge(e);
            }
        }
        Ok(g)
    }

    /// Loads a file of edge rows in the serialized edge layout; a header line is optional.
    pub fn from_edge_list(path: &Path) -> Result<GraphStore, TsvError> {
        let file = File::open(path).map_err(TsvError::io(path))?;
        let mut g = GraphStore::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(TsvError::io(path))?;
            if line.is_empty() || (i == 0 && line.starts_with(":START_ID")) {
                continue;
            }
            let e = parse_edge_row(&line).map_err(|reason| TsvError::Row {
                path: path.to_owned(),
                line: i + 1,
                reason,
            })?;
            g.add_edge(e);
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[NodeRef] {
        &self.nodes
    }

    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    pub fn contains(&self, r: &NodeRef) -> bool {
        self.index.contains_key(r)
    }

    pub fn script_type(&self, r: &NodeRef) -> Option<ScriptType> {
        self.index.get(r).and_then(|&i| self.script_types[i as usize])
    }

    /// `count` distinct roots drawn uniformly from nodes passing `filter`,
    /// in draw order. Returns all such nodes if there are fewer.
    pub fn pick_roots(&self, count: usize, seed: u64, filter: &TypeFilter<NodeKind>) -> Vec<NodeRef> {
        let eligible: Vec<&NodeRef> = self.nodes.iter().filter(|n| filter.allows(&n.kind())).collect();
        let k = count.min(eligible.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, eligible.len(), k)
            .into_iter()
            .map(|i| eligible[i].clone())
            .collect()
    }
}
