use std::path::PathBuf;

use txgraph::amount::Amount;
use txgraph::build::{build_block_graph, residual, ValueSplitConfig};
use txgraph::ingest::{iter_blocks, parse_block_json, validate_block, SourceConfig};
use txgraph::model::{EdgeType, NodeKind, NodeRef};
use txgraph::script::{derive_script_id, ScriptId};

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn load() -> txgraph::ingest::BlockRecord {
    let bytes = std::fs::read(fixture_dir().join("2817.json")).unwrap();
    parse_block_json(&bytes).unwrap()
}

fn sat(btc: &str) -> u64 {
    // independent of Amount parsing: split on the decimal point by hand
    let (i, f) = btc.split_once('.').unwrap_or((btc, ""));
    let frac = format!("{f:0<8}");
    i.parse::<u64>().unwrap() * 100_000_000 + frac.parse::<u64>().unwrap()
}

fn prefix(r: &NodeRef) -> String {
    match r {
        NodeRef::Tx(t) => t[..3].to_owned(),
        other => other.to_string(),
    }
}

#[test]
fn parses_record() {
    let b = load();
    assert_eq!(b.n_tx, 4);
    assert_eq!(b.txs[0].vout[0].value.to_sat(), 5_201_000_000);
    assert_eq!(b.txs[1].vin[0].prevout().unwrap().value.to_sat(), 3_493_000_000);
    assert!(validate_block(&b).is_valid());
}

#[test]
fn fixture_stream_yields_one_block() {
    let v: Vec<_> = iter_blocks(2817, 2817, &SourceConfig::Fixtures(fixture_dir()))
        .unwrap()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].height, 2817);
}

#[test]
fn golden_graph_values() {
    let b = load();
    let g = build_block_graph(&b, &ValueSplitConfig::default()).unwrap();

    let mints_tx: Vec<_> = g
        .edges_of(EdgeType::Mints)
        .filter(|e| e.dst.kind() == NodeKind::Tx)
        .collect();
    assert_eq!(mints_tx.len(), 1);
    assert_eq!(prefix(&mints_tx[0].dst), "e95");
    assert_eq!(mints_tx[0].value.to_sat(), 5_000_000_000);

    let mut tx_fees: Vec<u64> = g
        .edges_of(EdgeType::Fee)
        .filter(|e| e.src.kind() == NodeKind::Tx)
        .map(|e| e.value.to_sat())
        .collect();
    tx_fees.sort_unstable();
    assert_eq!(tx_fees, vec![sat("0.01"), sat("1.0"), sat("1.0")]);

    // script level fee edges against the miner's single output
    let script_fees: Vec<u64> = g
        .edges_of(EdgeType::Fee)
        .filter(|e| e.src.kind() == NodeKind::Script)
        .map(|e| e.value.to_sat())
        .collect();
    // f8b: one input -> one edge of 1.0; 65f: inputs 1.0 and 32.93 of 33.93;
    // 5b6: inputs 1.0 and 31.93 of 32.93
    let f = |fee: u64, u: u64, tot: u64| -> u64 {
        let (n, d) = (fee as u128 * u as u128, tot as u128);
        ((2 * n + d) / (2 * d)) as u64
    };
    let expect = vec![
        sat("1.0"),
        f(sat("1.0"), sat("1.0"), sat("33.93")),
        f(sat("1.0"), sat("32.93"), sat("33.93")),
        f(sat("0.01"), sat("1.0"), sat("32.93")),
        f(sat("0.01"), sat("31.93"), sat("32.93")),
    ];
    assert_eq!(script_fees, expect);
    assert_eq!(script_fees[0], sat("1.0"));
    assert_eq!(script_fees[1] + script_fees[2], sat("1.0"));
    assert_eq!(script_fees[3] + script_fees[4], sat("0.01"));

    let tx_transfers: Vec<(String, String, u64)> = g
        .edges_of(EdgeType::Transfers)
        .filter(|e| e.src.kind() == NodeKind::Tx)
        .map(|e| (prefix(&e.src), prefix(&e.dst), e.value.to_sat()))
        .collect();
    assert_eq!(
        tx_transfers,
        vec![
            ("a87".into(), "f8b".into(), sat("34.93")),
            ("f8b".into(), "65f".into(), sat("1.0")),
            ("f8b".into(), "65f".into(), sat("32.93")),
            ("65f".into(), "5b6".into(), sat("1.0")),
            ("65f".into(), "5b6".into(), sat("31.93")),
        ]
    );

    for tx in &b.txs[1..] {
        assert_eq!(residual(tx).unwrap(), Amount::ZERO);
    }
    assert_eq!(g.nodes_of(NodeKind::Tx).count(), 4);
    assert_eq!(g.nodes_of(NodeKind::Block).count(), 1);
    assert_eq!(g.nodes_of(NodeKind::Coinbase).count(), 1);
    assert_eq!(g.external_txs.len(), 1);
    assert!(g.external_txs[0].starts_with("a87"));
    assert!(g.dangling_endpoints().is_empty());
}

#[test]
fn address_keying_collapses_reused_scripts() {
    let b = load();
    let g = build_block_graph(&b, &ValueSplitConfig::default()).unwrap();
    let keyed = g.nodes_of(NodeKind::Script).count();
    let mut per_output = std::collections::HashSet::new();
    for tx in &b.txs {
        for o in &tx.vout {
            per_output.insert(ScriptId::synthetic(o.index_n, &tx.txid));
        }
        for p in tx.spends() {
            per_output.insert(ScriptId::synthetic(p.vout, &p.txid));
        }
    }
    // coinbase P2PK plus one reused P2PKH address
    assert_eq!(keyed, 2);
    assert_eq!(per_output.len(), 8);
    assert!(keyed < per_output.len());
    let miner = derive_script_id(&b.txs[0].vout[0].script, 0, &b.txs[0].txid);
    assert!(!miner.is_address());
}
