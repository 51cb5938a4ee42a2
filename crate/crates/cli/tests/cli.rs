use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use txgraph::synth::{synth_chain, write_fixture_dir, SynthParams};
use txgraph::amount::Amount;
use txgraph::model::{EdgeRecord, EdgeType, NodeRef};
use txgraph::tsv::format::edge_row;
use txgraph::tsv::{Manifest, EDGE_HEADER};

struct Env {
    dir: TempDir,
}

impl Env {
    fn new(blocks: usize) -> Env {
        let dir = tempfile::tempdir().unwrap();
        write_fixture_dir(&dir.path().join("fixtures"), &synth_chain(SynthParams::default(), blocks)).unwrap();
        Env { dir }
    }

    fn path(&self, p: &str) -> PathBuf {
        self.dir.path().join(p)
    }

    fn run(&self, args: &[&str]) -> Output {
        let fixtures = self.path("fixtures");
        Command::new(env!("CARGO_BIN_EXE_txgraph"))
            .current_dir(self.dir.path())
            .env("TXGRAPH_SOURCE", &fixtures)
            .args(args)
            .output()
            .unwrap()
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn ok(o: Output) -> Output {
    assert_eq!(code(&o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
    o
}

/// Relative path to contents for every file under `root`.
fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn build_covers_range_and_is_reproducible() {
    let env = Env::new(101);
    ok(env.run(&["build", "--to", "100", "--out", "g1", "--batch-size", "40"]));
    ok(env.run(&["build", "--to", "100", "--out", "g2", "--batch-size", "40"]));
    let m = Manifest::load(&env.path("g1")).unwrap();
    let heights: Vec<u64> = m.segments.iter().flat_map(|s| s.start..=s.end).collect();
    assert_eq!(heights, (0..=100).collect::<Vec<_>>());
    assert_eq!(m.segments.len(), 3);
    assert!(!m.dedup.is_empty());
    assert_eq!(snapshot(&env.path("g1")), snapshot(&env.path("g2")));
}

#[test]
fn append_extends_and_rejects_gaps() {
    let env = Env::new(120);
    ok(env.run(&["build", "--to", "99", "--out", "g"]));
    ok(env.run(&["append", "--to", "109", "--out", "g"]));
    let m = Manifest::load(&env.path("g")).unwrap();
    assert_eq!(m.max_height(), Some(109));

    let gap = env.run(&["append", "--from", "112", "--to", "115", "--out", "g"]);
    assert_eq!(code(&gap), 3, "{}", String::from_utf8_lossy(&gap.stderr));
    assert_eq!(Manifest::load(&env.path("g")).unwrap().max_height(), Some(109));
}

#[test]
fn append_matches_single_build_rows() {
    let env = Env::new(60);
    ok(env.run(&["build", "--to", "59", "--out", "full", "--dedup", "false"]));
    ok(env.run(&["build", "--to", "29", "--out", "inc", "--dedup", "false"]));
    ok(env.run(&["append", "--to", "59", "--out", "inc", "--dedup", "false"]));
    let rows = |d: &str| {
        let m = Manifest::load(&env.path(d)).unwrap();
        let mut v: Vec<String> = txgraph::tsv::read_batches(&m)
            .flat_map(|b| b.unwrap().edges.into_iter().map(|e| format!("{e:?}")))
            .collect();
        v.sort();
        v
    };
    assert_eq!(rows("full"), rows("inc"));
}

#[test]
fn unreachable_endpoint_exits_2() {
    let env = Env::new(1);
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let url = format!("http://127.0.0.1:{port}");
    let o = env.run(&["build", "--to", "5", "--source", &url, "--rest-retries", "0"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_fixture_and_bad_flags_exit_2() {
    let env = Env::new(5);
    assert_eq!(code(&env.run(&["build", "--to", "9"])), 2);
    assert_eq!(code(&env.run(&["build", "--to", "abc"])), 2);
    assert_eq!(code(&env.run(&["build", "--no-such-flag"])), 2);
    assert_eq!(code(&env.run(&["build", "--to", "3", "--compression", "zip"])), 2);
}

#[test]
fn sampling_writes_triplets_and_is_deterministic() {
    let env = Env::new(101);
    ok(env.run(&["build", "--to", "100", "--out", "g"]));
    let args = |out: &str| {
        ["sample", "--out", "g", "--sample-count", "100", "--sample-seed", "7", "--sample-out", out]
            .map(String::from)
            .to_vec()
    };
    let a: Vec<String> = args("s1");
    ok(env.run(&a.iter().map(String::as_str).collect::<Vec<_>>()));
    let b: Vec<String> = args("s2");
    ok(env.run(&b.iter().map(String::as_str).collect::<Vec<_>>()));

    let labels = fs::read_to_string(env.path("s1/labels.tsv")).unwrap();
    assert_eq!(labels.lines().count(), 101);
    for i in 0..100 {
        let d = env.path(&format!("s1/s{i:06}"));
        for f in ["nodes.tsv", "edges.tsv", "label.txt"] {
            assert!(d.join(f).is_file(), "{}", d.join(f).display());
        }
    }
    assert_eq!(snapshot(&env.path("s1")), snapshot(&env.path("s2")));
}

#[test]
fn bad_roots_are_reported_not_fatal() {
    let env = Env::new(10);
    ok(env.run(&["build", "--to", "9", "--out", "g"]));
    let roots = "Block:0,Tx:nope,Block:3";
    ok(env.run(&["sample", "--out", "g", "--sample-roots", roots, "--sample-method", "bfs"]));
    let report = fs::read_to_string(env.path("samples/report.tsv")).unwrap();
    let status: Vec<&str> = report.lines().skip(1).map(|l| l.split('\t').nth(2).unwrap()).collect();
    assert_eq!(status, ["ok", "error", "ok"]);
    assert_eq!(fs::read_to_string(env.path("samples/labels.tsv")).unwrap().lines().count(), 3);
}

#[test]
fn sampling_from_edge_list() {
    let env = Env::new(1);
    let tx = |t: &str| NodeRef::Tx(t.repeat(64));
    let mut text = format!("{EDGE_HEADER}\n");
    for (a, b) in [("a", "b"), ("b", "c"), ("c", "d")] {
        let e = EdgeRecord::new(tx(a), EdgeType::Transfers, tx(b), Amount::from_sat(5), 1);
        text.push_str(&edge_row(&e));
        text.push('\n');
    }
    fs::write(env.path("edges.tsv"), text).unwrap();
    let root = format!("Tx:{}", "a".repeat(64));
    ok(env.run(&[
        "sample", "--sample-edge-list", "edges.tsv", "--sample-roots", &root, "--sample-method", "dfs",
        "--sample-h-max", "2",
    ]));
    let label = fs::read_to_string(env.path("samples/s000000/label.txt")).unwrap();
    assert_eq!(label.trim(), "ConnectedGraph");
    let edges = fs::read_to_string(env.path("samples/s000000/edges.tsv")).unwrap();
    // schema comment and column header, then a chain of two hops
    assert_eq!(edges.lines().count(), 2 + 2);
}

fn tsv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split('\t').collect();
    lines
        .map(|l| header.iter().map(|h| h.to_string()).zip(l.split('\t').map(String::from)).collect())
        .collect()
}

#[test]
fn profile_rows_and_summaries() {
    let env = Env::new(50);
    ok(env.run(&["build", "--to", "49", "--out", "g"]));
    ok(env.run(&["profile", "--to", "49", "--out", "g", "--profile-window", "10"]));
    let rows = tsv(&env.path("profile/block_stats.tsv"));
    assert_eq!(rows.len(), 50);
    let heights: Vec<u64> = rows.iter().map(|r| r["height"].parse().unwrap()).collect();
    assert_eq!(heights, (0..50).collect::<Vec<_>>());
    assert_eq!(tsv(&env.path("profile/rolling.tsv")).len(), 50);
    assert_eq!(tsv(&env.path("profile/script_shares.tsv")).len(), 50);
    for class in ["Block", "Tx", "Script"] {
        assert!(env.path(&format!("profile/degrees_{class}.tsv")).is_file());
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(env.path("profile/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["degrees"].as_array().unwrap().len(), 3);

    // a fresh run rebuilds the index, so first-seen counts repeat
    ok(env.run(&["profile", "--to", "49", "--out", "g", "--profile-window", "10"]));
    assert_eq!(tsv(&env.path("profile/block_stats.tsv")), rows);
}

#[test]
fn profile_golden_block_fee() {
    let env = Env::new(1);
    let src = env.path("golden");
    fs::create_dir_all(&src).unwrap();
    fs::copy(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/2817.json"),
        src.join("2817.json"),
    )
    .unwrap();
    let s = src.to_str().unwrap();
    ok(env.run(&["profile", "--source", s, "--from", "2817", "--to", "2817"]));
    let rows = tsv(&env.path("profile/block_stats.tsv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["fee_total_sat"], "201000000");
    assert_eq!(rows[0]["minted_sat"], "5000000000");
}

#[test]
fn profile_empty_range_writes_header_only() {
    let env = Env::new(5);
    ok(env.run(&["profile", "--from", "4", "--to", "3"]));
    let text = fs::read_to_string(env.path("profile/block_stats.tsv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("height\t"));
}

#[test]
fn profile_resume_requires_next_height() {
    let env = Env::new(20);
    ok(env.run(&["profile", "--to", "9"]));
    ok(env.run(&["profile", "--from", "10", "--to", "19", "--profile-resume", "true"]));
    let o = env.run(&["profile", "--from", "5", "--to", "19", "--profile-resume", "true"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_layers_and_dump() {
    let env = Env::new(1);
    fs::write(env.path("txgraph.conf"), "# local\nbatch_size = 77\nsample.n = 4\n").unwrap();
    let o = ok(Command::new(env!("CARGO_BIN_EXE_txgraph"))
        .current_dir(env.dir.path())
        .env("TXGRAPH_SAMPLE_N", "5")
        .env("TXGRAPH_CHUNK", "8")
        .args(["config", "dump", "--config", "txgraph.conf", "--chunk", "9"])
        .output()
        .unwrap());
    let text = String::from_utf8(o.stdout).unwrap();
    let get = |k: &str| {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{k} = ")))
            .unwrap_or_else(|| panic!("{k} missing"))
            .to_owned()
    };
    assert_eq!(get("batch_size"), "77");
    assert_eq!(get("sample.n"), "5");
    assert_eq!(get("chunk"), "9");
    assert_eq!(get("compression"), "none");
}
