//! Subgraph sampling: BFS, DFS and decay-factor Forest Fire.

mod features;
mod store;
mod traverse;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{EdgeRecord, EdgeType, NodeKind, NodeRef};
use crate::script::ScriptType;

pub use features::{
    edge_features, encode_features, node_features, write_subgraph, EncodedSubgraph, LabelsWriter,
    EDGE_WIDTH, FEATURE_SCHEMA, NODE_WIDTH,
};
pub use store::GraphStore;
pub use traverse::{sample, sample_bfs, sample_dfs, sample_forest_fire, HopTrace};

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("root {0} not in store")]
    RootNotFound(NodeRef),
    #[error("root {0} is excluded by the node type filter")]
    RootFiltered(NodeRef),
    #[error("sample too small: {nodes} nodes, {edges} edges (minimum {min_nodes} nodes, {min_edges} edges)")]
    TooSmall {
        nodes: usize,
        edges: usize,
        min_nodes: usize,
        min_edges: usize,
    },
    #[error("invalid sampler config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeFilter<T: std::hash::Hash + Eq> {
    Whitelist(HashSet<T>),
    Blacklist(HashSet<T>),
}

impl<T: std::hash::Hash + Eq> Default for TypeFilter<T> {
    fn default() -> Self {
        TypeFilter::Blacklist(HashSet::new())
    }
}

impl<T: std::hash::Hash + Eq> TypeFilter<T> {
    pub fn allows(&self, t: &T) -> bool {
        match self {
            TypeFilter::Whitelist(s) => s.contains(t),
            TypeFilter::Blacklist(s) => !s.contains(t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    Out,
    In,
    #[default]
    Both,
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "out" => Ok(Direction::Out),
            "in" => Ok(Direction::In),
            "both" => Ok(Direction::Both),
            _ => Err(format!("unknown direction {s:?} (out | in | both)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    Bfs,
    Dfs,
    #[default]
    ForestFire,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bfs" => Ok(Method::Bfs),
            "dfs" => Ok(Method::Dfs),
            "forest-fire" | "ff" => Ok(Method::ForestFire),
            _ => Err(format!("unknown method {s:?} (bfs | dfs | forest-fire)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplerConfig {
    pub h_max: usize,
    /// Forest Fire neighbor budget at the first hop.
    pub n: usize,
    /// Per-hop budget change; the budget at hop `h` is `max(n - h * delta, 0)`.
    pub delta: i64,
    pub node_type_filter: TypeFilter<NodeKind>,
    pub edge_type_filter: TypeFilter<EdgeType>,
    pub stop_on_nodes: HashSet<NodeKind>,
    pub stop_on_edges: HashSet<EdgeType>,
    pub direction: Direction,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub min_edges: usize,
    pub max_edges: usize,
    pub rng_seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            h_max: 3,
            n: 10,
            delta: 0,
            node_type_filter: TypeFilter::default(),
            edge_type_filter: TypeFilter::default(),
            stop_on_nodes: HashSet::new(),
            stop_on_edges: HashSet::new(),
            direction: Direction::Both,
            min_nodes: 1,
            max_nodes: usize::MAX,
            min_edges: 0,
            max_edges: usize::MAX,
            rng_seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SampleError> {
        if self.n == 0 {
            return Err(SampleError::Config("n must be at least 1".into()));
        }
        if self.max_nodes < self.min_nodes || self.max_edges < self.min_edges {
            return Err(SampleError::Config("max_* must not be below min_*".into()));
        }
        if self.max_nodes == 0 {
            return Err(SampleError::Config("max_nodes must be at least 1".into()));
        }
        Ok(())
    }

    /// Neighbor budget at hop `h`.
    pub fn hop_budget(&self, h: usize) -> usize {
        let b = self.n as i128 - h as i128 * self.delta as i128;
        b.clamp(0, usize::MAX as i128) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnectivityLabel {
    ConnectedGraph,
    Forest,
}

impl fmt::Display for ConnectivityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConnectivityLabel::ConnectedGraph => "ConnectedGraph",
            ConnectivityLabel::Forest => "Forest",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledNode {
    pub node: NodeRef,
    pub script_type: Option<ScriptType>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subgraph {
    pub root: NodeRef,
    /// In order of addition; the root comes first.
    pub nodes: Vec<SampledNode>,
    pub edges: Vec<EdgeRecord>,
    pub label: ConnectivityLabel,
    /// Forest Fire only: one entry per neighbor-sampling call.
    pub trace: Vec<HopTrace>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Weak connectivity of the sampled node and edge sets.
pub fn label_connectivity(nodes: &[NodeRef], edges: &[EdgeRecord]) -> ConnectivityLabel {
    let index: std::collections::HashMap<&NodeRef, usize> =
        nodes.iter().enumerate().map(|(i, n)| (n, i)).collect();
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    let mut components = nodes.len();
    for e in edges {
        let (Some(&a), Some(&b)) = (index.get(&e.src), index.get(&e.dst)) else {
            continue;
        };
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            components -= 1;
        }
    }
    if components <= 1 {
        ConnectivityLabel::ConnectedGraph
    } else {
        ConnectivityLabel::Forest
    }
}
