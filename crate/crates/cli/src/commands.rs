use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use txgraph::ingest::{iter_blocks, BlockRecord, IngestError, RestClient, SourceConfig};
use txgraph::model::{NodeKind, NodeRef};
use txgraph::pipeline::build_graphs;
use txgraph::profile::{
    degree_summary, histogram_tsv, profile_blocks, rolling_mean, script_type_share, stats_header,
    stats_row, AddrIndex, BlockStats, ProfileError, ScriptShare,
};
use txgraph::sampler::{sample, write_subgraph, GraphStore, LabelsWriter};
use txgraph::script::ScriptType;
use txgraph::tsv::{append_incremental, dedup_nodes, write_batches, Manifest};

use crate::config::Settings;
use crate::error::{io_err, CliError};

fn tip_height(source: &SourceConfig) -> Result<Option<u64>, CliError> {
    match source {
        SourceConfig::Rest(cfg) => Ok(Some(RestClient::new(cfg).get_tip_height()?)),
        SourceConfig::Fixtures(_) => Ok(None),
    }
}

pub fn build(s: &Settings) -> Result<(), CliError> {
    let source = s.source()?;
    let (from, to) = (s.parse("from")?, s.to_height()?);
    let layout = s.layout()?;
    let tip = tip_height(&source)?;
    let blocks = iter_blocks(from, to, &source)?;
    let graphs = build_graphs(blocks, s.split_config()?, s.parse("chunk")?);
    let mut m = write_batches(graphs, &layout)?;
    m.tip_height_at_extraction = tip;
    m.params = s.build_params();
    m.save()?;
    if s.bool("dedup")? {
        m = dedup_nodes(&m, s.parse("memory_budget")?)?;
    }
    println!("{}", m.path().display());
    Ok(())
}

pub fn append(s: &Settings) -> Result<(), CliError> {
    let m = Manifest::load(&s.path("out"))?;
    let source = s.source()?;
    let from = if s.is_explicit("from") {
        s.parse("from")?
    } else {
        m.max_height().map_or(0, |h| h + 1)
    };
    let to = s.to_height()?;
    let tip = tip_height(&source)?;
    let blocks = iter_blocks(from, to, &source)?;
    let graphs = build_graphs(blocks, s.split_config()?, s.parse("chunk")?);
    let mut m = append_incremental(&m, graphs, s.parse("memory_budget")?)?;
    if tip.is_some() {
        m.tip_height_at_extraction = tip;
        m.save()?;
    }
    if s.bool("dedup")? && m.dedup.is_empty() {
        m = dedup_nodes(&m, s.parse("memory_budget")?)?;
    }
    println!("{}", m.path().display());
    Ok(())
}

pub fn sample_cmd(s: &Settings) -> Result<(), CliError> {
    let (method, cfg) = s.sampler()?;
    let edge_list = s.get("sample.edge_list");
    let store = if edge_list.is_empty() {
        GraphStore::from_manifest(&Manifest::load(&s.path("out"))?)?
    } else {
        GraphStore::from_edge_list(Path::new(edge_list))?
    };
    let roots: Vec<String> = if s.get("sample.roots").is_empty() {
        let count = s.parse("sample.count")?;
        store
            .pick_roots(count, cfg.rng_seed, &cfg.node_type_filter)
            .iter()
            .map(NodeRef::to_string)
            .collect()
    } else {
        s.get("sample.roots").split(',').map(|r| r.trim().to_owned()).filter(|r| !r.is_empty()).collect()
    };
    let results: Vec<_> = roots
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let root: NodeRef = r.parse().map_err(|e: String| e)?;
            let c = txgraph::sampler::SamplerConfig {
                rng_seed: cfg.rng_seed.wrapping_add(i as u64),
                ..cfg.clone()
            };
            sample(&store, &root, method, &c).map_err(|e| e.to_string())
        })
        .collect();
    let out = s.path("sample.out");
    let mut labels = LabelsWriter::create(&out).map_err(io_err(out.display().to_string()))?;
    let report_path = out.join("report.tsv");
    let mut report = BufWriter::new(File::create(&report_path).map_err(io_err(report_path.display().to_string()))?);
    let ctx = |e| io_err(out.display().to_string())(e);
    writeln!(report, "sample_id\troot\tstatus\tdetail").map_err(ctx)?;
    let mut failed = 0;
    for (i, (root, res)) in roots.iter().zip(results).enumerate() {
        let id = format!("s{i:06}");
        match res {
            Ok(sg) => {
                write_subgraph(&out, &id, &sg).map_err(ctx)?;
                labels.push(&id, &sg).map_err(ctx)?;
                writeln!(report, "{id}\t{root}\tok\t{} nodes {} edges", sg.nodes.len(), sg.edges.len()).map_err(ctx)?;
            }
            Err(e) => {
                failed += 1;
                log::warn!("sample {id} from {root}: {e}");
                writeln!(report, "{id}\t{root}\terror\t{e}").map_err(ctx)?;
            }
        }
    }
    report.flush().map_err(ctx)?;
    let written = labels.finish().map_err(ctx)?;
    println!("{written} samples written to {}, {failed} failed", out.display());
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(io_err(path.display().to_string()))
}

fn share_header() -> String {
    let mut cols = vec!["height".to_owned()];
    for variant in ["out", "inout"] {
        cols.extend(ScriptType::ALL.iter().map(|t| format!("{variant}_{t}")));
    }
    cols.join("\t")
}

fn share_row(s: &ScriptShare) -> String {
    let mut cols = vec![s.height.to_string()];
    for m in [&s.outputs, &s.inputs_and_outputs] {
        cols.extend(ScriptType::ALL.iter().map(|t| m.get(t).copied().unwrap_or(0.0).to_string()));
    }
    cols.join("\t")
}

pub fn profile(s: &Settings) -> Result<(), CliError> {
    let out = s.path("profile.out");
    fs::create_dir_all(&out).map_err(io_err(out.display().to_string()))?;
    let from: u64 = s.parse("from")?;
    let to = s.to_height()?;
    let index_dir = match s.get("profile.addr_index") {
        "" => out.join("addr_index"),
        p => p.into(),
    };
    if !s.bool("profile.resume")? && index_dir.exists() {
        fs::remove_dir_all(&index_dir).map_err(io_err(index_dir.display().to_string()))?;
    }
    let mut index = AddrIndex::open(&index_dir, from)?;
    let blocks: Box<dyn Iterator<Item = Result<BlockRecord, IngestError>>> = if from > to {
        Box::new(std::iter::empty())
    } else {
        Box::new(iter_blocks(from, to, &s.source()?)?)
    };
    let mut shares = Vec::new();
    let blocks = blocks.inspect(|b| {
        if let Ok(b) = b {
            shares.push(script_type_share(b));
        }
    });
    let stats_path = out.join("block_stats.tsv");
    let ctx = |e| io_err(stats_path.display().to_string())(e);
    let mut w = BufWriter::new(File::create(&stats_path).map_err(ctx)?);
    writeln!(w, "{}", stats_header()).map_err(ctx)?;
    let mut rows: Vec<BlockStats> = Vec::new();
    let summary = profile_blocks(blocks, &mut index, s.parse("chunk")?, |st| {
        writeln!(w, "{}", stats_row(st)).map_err(ProfileError::io(&stats_path))?;
        rows.push(st.clone());
        Ok(())
    })?;
    w.flush().map_err(ctx)?;

    let mut text = share_header() + "\n";
    for sh in &shares {
        text.push_str(&share_row(sh));
        text.push('\n');
    }
    write_file(&out.join("script_shares.tsv"), &text)?;

    let window = s.parse("profile.window")?;
    let series = |f: &dyn Fn(&BlockStats) -> f64| rolling_mean(&rows.iter().map(f).collect::<Vec<_>>(), window);
    let cols = [
        series(&|r| r.tx_count as f64),
        series(&|r| r.fee_total.to_sat() as f64),
        series(&|r| r.addr_new as f64),
        series(&|r| r.dormancy.all.map_or(0.0, |d| d.avg)),
    ];
    let mut text = String::from("height\ttx_count\tfee_total_sat\taddr_new\tdormancy_avg\n");
    for (i, r) in rows.iter().enumerate() {
        text.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", r.height, cols[0][i], cols[1][i], cols[2][i], cols[3][i]));
    }
    write_file(&out.join("rolling.tsv"), &text)?;

    let mut degrees = Vec::new();
    let graph = s.path("out");
    if s.bool("profile.degrees")? && graph.join(txgraph::tsv::MANIFEST_FILE).exists() {
        let m = Manifest::load(&graph)?;
        let mode = s.entropy_mode()?;
        for class in [NodeKind::Block, NodeKind::Tx, NodeKind::Script] {
            let d = degree_summary(&m, class, mode)?;
            write_file(&out.join(format!("degrees_{class}.tsv")), &histogram_tsv(&d))?;
            degrees.push(d);
        }
    }
    let json = serde_json::json!({ "blocks": summary, "degrees": degrees });
    let mut text = serde_json::to_string_pretty(&json).expect("summary serializes");
    text.push('\n');
    write_file(&out.join("summary.json"), &text)?;
    println!("{}", stats_path.display());
    Ok(())
}
