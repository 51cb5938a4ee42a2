use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::ProfileError;
use crate::model::{EdgeRecord, NodeKind};
use crate::tsv::{read_batches, read_dedup_nodes, Manifest};

pub const DEGREE_BIN: u64 = 10;

/// Lower bound of the width-10 bin holding `d`.
pub fn degree_bin(d: u64) -> u64 {
    d / DEGREE_BIN * DEGREE_BIN
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntropyMode {
    /// Probabilities are frequencies of distinct degree values.
    #[default]
    DistinctValues,
    /// Probabilities are each node's share of the degree total.
    PerNode,
}

impl std::str::FromStr for EntropyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "distinct-values" => Ok(EntropyMode::DistinctValues),
            "per-node" => Ok(EntropyMode::PerNode),
            _ => Err(format!("unknown entropy mode {s:?} (distinct-values | per-node)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub distinct_values: usize,
    pub entropy: f64,
    pub max_entropy: f64,
    pub normalized_entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeSummary {
    pub node_class: NodeKind,
    pub entropy_mode: EntropyMode,
    pub nodes: u64,
    pub edges: u64,
    /// `None` when fewer than two nodes.
    pub density: Option<f64>,
    pub indegree: DirectionStats,
    pub outdegree: DirectionStats,
    pub total: DirectionStats,
    /// `(in bin, out bin) -> node count`.
    #[serde(skip)]
    pub histogram: BTreeMap<(u64, u64), u64>,
}

fn entropy_parts(probs: impl Iterator<Item = f64>, m: usize) -> (f64, f64, f64) {
    let h: f64 = -probs.filter(|&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>();
    let h = h.max(0.0);
    let h_max = if m > 1 { (m as f64).ln() } else { 0.0 };
    let hn = if h_max > 0.0 { (h / h_max).min(1.0) } else { 0.0 };
    (h, h_max, hn)
}

pub fn direction_stats(degrees: &[u64], mode: EntropyMode) -> DirectionStats {
    let n = degrees.len();
    if n == 0 {
        return DirectionStats {
            mean: 0.0,
            std: 0.0,
            distinct_values: 0,
            entropy: 0.0,
            max_entropy: 0.0,
            normalized_entropy: 0.0,
        };
    }
    let mean = degrees.iter().map(|&d| d as f64).sum::<f64>() / n as f64;
    let var = degrees.iter().map(|&d| (d as f64 - mean).powi(2)).sum::<f64>() / n as f64;
    let mut freq: BTreeMap<u64, u64> = BTreeMap::new();
    for &d in degrees {
        *freq.entry(d).or_default() += 1;
    }
    let m = freq.len();
    let (entropy, max_entropy, normalized_entropy) = match mode {
        EntropyMode::DistinctValues => {
            entropy_parts(freq.values().map(|&c| c as f64 / n as f64), m)
        }
        EntropyMode::PerNode => {
            let total: u64 = degrees.iter().sum();
            let nonzero = degrees.iter().filter(|&&d| d > 0).count();
            if total == 0 {
                (0.0, 0.0, 0.0)
            } else {
                entropy_parts(degrees.iter().map(|&d| d as f64 / total as f64), nonzero)
            }
        }
    };
    DirectionStats {
        mean,
        std: var.sqrt(),
        distinct_values: m,
        entropy,
        max_entropy,
        normalized_entropy,
    }
}

/// Summary over `(in, out)` degree pairs of one node class; `edges` is the
/// sum of in-degrees.
pub fn summarize_degrees(class: NodeKind, degrees: &[(u64, u64)], mode: EntropyMode) -> DegreeSummary {
    let ins: Vec<u64> = degrees.iter().map(|d| d.0).collect();
    let outs: Vec<u64> = degrees.iter().map(|d| d.1).collect();
    let totals: Vec<u64> = degrees.iter().map(|d| d.0 + d.1).collect();
    let n = degrees.len() as u64;
    let e: u64 = ins.iter().sum();
    let density = (n >= 2).then(|| e as f64 / (n as f64 * (n - 1) as f64));
    let mut histogram = BTreeMap::new();
    for &(i, o) in degrees {
        *histogram.entry((degree_bin(i), degree_bin(o))).or_default() += 1;
    }
    DegreeSummary {
        node_class: class,
        entropy_mode: mode,
        nodes: n,
        edges: e,
        density,
        indegree: direction_stats(&ins, mode),
        outdegree: direction_stats(&outs, mode),
        total: direction_stats(&totals, mode),
        histogram,
    }
}

struct DegreeCounter {
    class: NodeKind,
    index: HashMap<String, usize>,
    deg: Vec<(u64, u64)>,
}

impl DegreeCounter {
    fn new(class: NodeKind, nodes: impl IntoIterator<Item = String>) -> Self {
        let mut index: HashMap<String, usize> = HashMap::new();
        for id in nodes {
            let next = index.len();
            index.entry(id).or_insert(next);
        }
        let deg = vec![(0, 0); index.len()];
        DegreeCounter { class, index, deg }
    }

    fn add(&mut self, e: &EdgeRecord) {
        if e.src.kind() == self.class {
            if let Some(&i) = self.index.get(&e.src.id()) {
                self.deg[i].1 += 1;
            }
        }
        if e.dst.kind() == self.class {
            if let Some(&i) = self.index.get(&e.dst.id()) {
                self.deg[i].0 += 1;
            }
        }
    }
}

/// `(in, out)` degrees of `nodes` counting every edge of any type. Edges
/// whose endpoint is not listed are ignored at that end.
pub fn degrees_of<'a>(
    nodes: impl IntoIterator<Item = String>,
    edges: impl IntoIterator<Item = &'a EdgeRecord>,
    class: NodeKind,
) -> Vec<(u64, u64)> {
    let mut c = DegreeCounter::new(class, nodes);
    for e in edges {
        c.add(e);
    }
    c.deg
}

/// Degree summary of a serialized graph. Nodes come from the dedup
/// generations if present, otherwise from the segment node files; edges
/// are streamed in a second pass.
pub fn degree_summary(m: &Manifest, class: NodeKind, mode: EntropyMode) -> Result<DegreeSummary, ProfileError> {
    let mut ids: Vec<String> = Vec::new();
    if m.dedup.is_empty() {
        for seg in read_batches(m) {
            let seg = seg?;
            ids.extend(seg.nodes.iter().filter(|r| r.node.kind() == class).map(|r| r.node.node_ref().id()));
        }
    } else {
        for row in read_dedup_nodes(m)? {
            if row.node.kind() == class {
                ids.push(row.node.node_ref().id());
            }
        }
    }
    let mut counter = DegreeCounter::new(class, ids);
    for seg in read_batches(m) {
        for e in &seg?.edges {
            counter.add(e);
        }
    }
    Ok(summarize_degrees(class, &counter.deg, mode))
}

/// Histogram rows `in_bin, out_bin, count`.
pub fn histogram_tsv(s: &DegreeSummary) -> String {
    let mut out = String::from("indegree_bin\toutdegree_bin\tnodes\n");
    for ((i, o), c) in &s.histogram {
        out.push_str(&format!("{i}\t{o}\t{c}\n"));
    }
    out
}
