use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::Subgraph;
use crate::model::{EdgeRecord, EdgeType, NodeKind, NodeRef};
use crate::script::ScriptType;

/// First line of every feature file; bump when a column changes.
pub const FEATURE_SCHEMA: &str = "# txgraph-features v1";

pub const NODE_WIDTH: usize = NodeKind::ALL.len() + ScriptType::ALL.len() + 2;
pub const EDGE_WIDTH: usize = 2 + EdgeType::ALL.len() + 2;

/// Node type one-hot, script type one-hot (zero for non-script nodes), then
/// in- and out-degree inside the sample.
pub fn node_features(kind: NodeKind, script_type: Option<ScriptType>, in_deg: u64, out_deg: u64) -> [u64; NODE_WIDTH] {
    let mut v = [0u64; NODE_WIDTH];
    v[kind.index()] = 1;
    if let Some(t) = script_type {
        v[NodeKind::ALL.len() + t.index()] = 1;
    }
    v[NODE_WIDTH - 2] = in_deg;
    v[NODE_WIDTH - 1] = out_deg;
    v
}

/// Source and destination row index, edge type one-hot, value and height.
pub fn edge_features(src: usize, dst: usize, e: &EdgeRecord) -> [u64; EDGE_WIDTH] {
    let mut v = [0u64; EDGE_WIDTH];
    v[0] = src as u64;
    v[1] = dst as u64;
    v[2 + e.edge_type.index()] = 1;
    v[EDGE_WIDTH - 2] = e.value.to_sat();
    v[EDGE_WIDTH - 1] = e.height;
    v
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSubgraph {
    pub nodes: Vec<[u64; NODE_WIDTH]>,
    pub edges: Vec<[u64; EDGE_WIDTH]>,
}

pub fn encode_features(sg: &Subgraph) -> EncodedSubgraph {
    let index: HashMap<&NodeRef, usize> = sg.nodes.iter().enumerate().map(|(i, n)| (&n.node, i)).collect();
    let mut in_deg = vec![0u64; sg.nodes.len()];
    let mut out_deg = vec![0u64; sg.nodes.len()];
    let mut edges = Vec::with_capacity(sg.edges.len());
    for e in &sg.edges {
        let (s, d) = (index[&e.src], index[&e.dst]);
        out_deg[s] += 1;
        in_deg[d] += 1;
        edges.push(edge_features(s, d, e));
    }
    let nodes = sg
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| node_features(n.node.kind(), n.script_type, in_deg[i], out_deg[i]))
        .collect();
    EncodedSubgraph { nodes, edges }
}

fn node_columns() -> String {
    let mut cols = vec!["index".to_owned()];
    cols.extend(NodeKind::ALL.iter().map(|k| format!("is_{k}")));
    cols.extend(ScriptType::ALL.iter().map(|t| format!("script_{t}")));
    cols.push("in_degree".into());
    cols.push("out_degree".into());
    cols.join("\t")
}

fn edge_columns() -> String {
    let mut cols = vec!["src".to_owned(), "dst".to_owned()];
    cols.extend(EdgeType::ALL.iter().map(|t| format!("is_{t}")));
    cols.push("value_sat".into());
    cols.push("height".into());
    cols.join("\t")
}

fn write_rows<const W: usize>(path: &Path, header: &str, rows: &[[u64; W]], indexed: bool) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{FEATURE_SCHEMA}")?;
    writeln!(w, "{header}")?;
    for (i, r) in rows.iter().enumerate() {
        if indexed {
            write!(w, "{i}\t")?;
        }
        let line: Vec<String> = r.iter().map(u64::to_string).collect();
        writeln!(w, "{}", line.join("\t"))?;
    }
    w.flush()
}

/// Writes `dir/<id>/{nodes.tsv, edges.tsv, label.txt}`.
pub fn write_subgraph(dir: &Path, id: &str, sg: &Subgraph) -> io::Result<PathBuf> {
    let out = dir.join(id);
    fs::create_dir_all(&out)?;
    let enc = encode_features(sg);
    write_rows(&out.join("nodes.tsv"), &node_columns(), &enc.nodes, true)?;
    write_rows(&out.join("edges.tsv"), &edge_columns(), &enc.edges, false)?;
    fs::write(out.join("label.txt"), format!("{}\n", sg.label))?;
    Ok(out)
}

/// Dataset-level `labels.tsv`, one row per written subgraph.
pub struct LabelsWriter {
    w: BufWriter<File>,
    rows: usize,
}

impl LabelsWriter {
    pub fn create(dir: &Path) -> io::Result<LabelsWriter> {
        fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(File::create(dir.join("labels.tsv"))?);
        writeln!(w, "sample_id\troot\tlabel\tnodes\tedges")?;
        Ok(LabelsWriter { w, rows: 0 })
    }

    pub fn push(&mut self, id: &str, sg: &Subgraph) -> io::Result<()> {
        self.rows += 1;
        writeln!(self.w, "{id}\t{}\t{}\t{}\t{}", sg.root, sg.label, sg.nodes.len(), sg.edges.len())
    }

    pub fn finish(mut self) -> io::Result<usize> {
        self.w.flush()?;
        Ok(self.rows)
    }
}
