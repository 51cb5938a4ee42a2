mod common;

use std::collections::HashMap;

use common::*;
use proptest::prelude::*;
use txgraph::amount::Amount;
use txgraph::build::{build_block_graph, BuildError, DenominatorMode, ValueSplitConfig};
use txgraph::model::{check_pattern, BlockGraph, EdgeRecord, EdgeType, NodeKind, NodeRef};
use txgraph::synth::{synth_chain, SynthParams};

fn conserving() -> ValueSplitConfig {
    ValueSplitConfig {
        transfer_denominator_mode: DenominatorMode::Conserving,
        ..Default::default()
    }
}

fn script_edges(g: &BlockGraph, t: EdgeType) -> Vec<&EdgeRecord> {
    g.edges_of(t).filter(|e| e.src.kind() == NodeKind::Script).collect()
}

/// Multiset equality between originators and their Block context mirrors.
pub fn mirrors_match(g: &BlockGraph) -> bool {
    let block = NodeRef::Block(g.height);
    let mut out_side: HashMap<(NodeRef, Amount), i64> = HashMap::new();
    let mut in_side: HashMap<(NodeRef, EdgeType, Amount), i64> = HashMap::new();
    for e in &g.edges {
        match e.edge_type {
            EdgeType::Fee | EdgeType::Transfers => {
                *out_side.entry((e.src.clone(), e.value)).or_default() += 1;
                let t = if e.dst.kind() == NodeKind::Script { EdgeType::Credits } else { EdgeType::Confirms };
                *in_side.entry((e.dst.clone(), t, e.value)).or_default() += 1;
            }
            EdgeType::Redeems => {
                assert_eq!(e.dst, block);
                *out_side.entry((e.src.clone(), e.value)).or_default() -= 1;
            }
            EdgeType::Credits | EdgeType::Confirms => {
                assert_eq!(e.src, block);
                *in_side.entry((e.dst.clone(), e.edge_type, e.value)).or_default() -= 1;
            }
            EdgeType::Mints => {}
        }
    }
    out_side.values().all(|&c| c == 0) && in_side.values().all(|&c| c == 0)
}

#[test]
fn empty_block_has_only_mints() {
    let b = claimed_block(5, 2, vec![]);
    let g = build_block_graph(&b, &ValueSplitConfig::default()).unwrap();
    assert_eq!(g.edges_of(EdgeType::Mints).filter(|e| e.dst.kind() == NodeKind::Tx).count(), 1);
    assert_eq!(g.edges_of(EdgeType::Mints).filter(|e| e.dst.kind() == NodeKind::Script).count(), 2);
    assert_eq!(g.edges_of(EdgeType::Transfers).count(), 0);
    assert_eq!(g.edges_of(EdgeType::Fee).count(), 0);
}

#[test]
fn zero_claim_block_emits_zero_mint_and_no_fee_edges() {
    let t = simple_tx("t", &[1000], &[900], 100);
    let b = block_with(501_726, &[0], vec![t]);
    let g = build_block_graph(&b, &ValueSplitConfig::default()).unwrap();
    let mints: Vec<_> = g.edges_of(EdgeType::Mints).collect();
    assert_eq!(mints.len(), 1);
    assert_eq!(mints[0].dst.kind(), NodeKind::Tx);
    assert_eq!(mints[0].value, Amount::ZERO);
    assert_eq!(g.edges_of(EdgeType::Fee).count(), 0);
    assert_eq!(script_edges(&g, EdgeType::Transfers).len(), 1);
}

#[test]
fn exclusion_threshold_requires_both_sides() {
    let cfg = ValueSplitConfig::default();
    let shape = |j: usize, k: usize| {
        let t = simple_tx("wide", &vec![1000; j], &vec![900; k], (1000 * j - 900 * k) as u64);
        build_block_graph(&claimed_block(10, 1, vec![t]), &cfg).unwrap()
    };
    let g = shape(21, 21);
    assert_eq!(g.nodes_of(NodeKind::Tx).count(), 1, "only the coinbase");
    assert_eq!(g.edges.len(), 2, "two Mints edges only");
    for (j, k) in [(20, 21), (21, 20)] {
        let g = shape(j, k);
        assert_eq!(script_edges(&g, EdgeType::Transfers).len(), j * k);
        assert_eq!(script_edges(&g, EdgeType::Fee).len(), j);
    }
}

#[test]
fn all_zero_outputs_are_skipped_when_configured() {
    let t = simple_tx("z", &[500], &[0, 0], 400);
    let b = claimed_block(10, 1, vec![t]);
    let g = build_block_graph(&b, &ValueSplitConfig::default()).unwrap();
    assert_eq!(g.nodes_of(NodeKind::Tx).count(), 1);
    let keep = ValueSplitConfig {
        skip_zero_value: false,
        ..Default::default()
    };
    let g = build_block_graph(&b, &keep).unwrap();
    assert_eq!(script_edges(&g, EdgeType::Transfers).len(), 2);
}

#[test]
fn aggregation_merges_same_source_inputs() {
    let vin = vec![spend("src", 0, 100, 1, 1), spend("src", 1, 200, 1, 2), spend("other", 0, 50, 1, 3)];
    let t = tx("agg", vin, outputs(&[340], 10), Some(10));
    let b = claimed_block(10, 1, vec![t]);
    let parallel = build_block_graph(&b, &ValueSplitConfig::default()).unwrap();
    let tx_values = |g: &BlockGraph| -> Vec<u64> {
        g.edges_of(EdgeType::Transfers)
            .filter(|e| e.src.kind() == NodeKind::Tx)
            .map(|e| e.value.to_sat())
            .collect()
    };
    assert_eq!(tx_values(&parallel), vec![100, 200, 50]);
    let agg = ValueSplitConfig {
        aggregate_tx_inputs: true,
        ..Default::default()
    };
    let merged = build_block_graph(&b, &agg).unwrap();
    assert_eq!(tx_values(&merged), vec![300, 50]);
    assert_eq!(script_edges(&merged, EdgeType::Transfers).len(), 3);
}

#[test]
fn invalid_block_is_rejected_with_context() {
    let mut b = claimed_block(10, 1, vec![simple_tx("x", &[100], &[90], 10)]);
    b.txs.swap(0, 1);
    match build_block_graph(&b, &ValueSplitConfig::default()) {
        Err(BuildError::InvalidBlock { height: 10, .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn synthetic_chain_graphs_are_well_formed() {
    for b in synth_chain(SynthParams { seed: 9, ..Default::default() }, 300) {
        let g = build_block_graph(&b, &ValueSplitConfig::default()).unwrap();
        assert!(g.edges.iter().all(check_pattern));
        assert!(g.dangling_endpoints().is_empty());
        assert!(mirrors_match(&g));
        assert!(g.edges.iter().all(|e| e.height == b.height));
    }
}

fn tx_shape() -> impl Strategy<Value = (Vec<u64>, Vec<u64>, u64, Vec<u64>)> {
    (
        prop::collection::vec(1u64..5_000_000_000, 1..6),
        prop::collection::vec(0u64..1000, 1..6),
        0u64..1000,
        prop::collection::vec(1u64..1000, 1..4),
    )
        .prop_map(|(ins, weights, fee_permille, miner_w)| {
            let total: u64 = ins.iter().sum();
            let fee = total / 1000 * fee_permille / 1000;
            let spendable = total - fee;
            let wsum: u64 = weights.iter().sum::<u64>().max(1);
            let mut outs: Vec<u64> = weights.iter().map(|w| spendable / wsum * w).collect();
            let used: u64 = outs.iter().sum();
            outs[0] += spendable - used;
            (ins, outs, fee, miner_w)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn value_conservation((ins, outs, fee, miner_w) in tx_shape()) {
        let t = simple_tx("p", &ins, &outs, fee);
        let claimed = 5_000_000_000 + fee;
        let wsum: u64 = miner_w.iter().sum();
        let mut miner: Vec<u64> = miner_w.iter().map(|w| claimed / wsum * w).collect();
        let used: u64 = miner.iter().sum();
        miner[0] += claimed - used;
        let b = block_with(100, &miner, vec![t.clone()]);
        let g = build_block_graph(&b, &conserving()).unwrap();

        let fees = script_edges(&g, EdgeType::Fee);
        if fee > 0 {
            prop_assert_eq!(fees.len(), ins.len() * miner.len());
            let s: i128 = fees.iter().map(|e| e.value.to_sat() as i128).sum();
            prop_assert!((s - fee as i128).unsigned_abs() <= fees.len() as u128);
        } else {
            prop_assert!(fees.is_empty());
        }

        let transfers = script_edges(&g, EdgeType::Transfers);
        prop_assert_eq!(transfers.len(), ins.len() * outs.len());
        let s: i128 = transfers.iter().map(|e| e.value.to_sat() as i128).sum();
        let out_total: u64 = outs.iter().sum();
        prop_assert!((s - out_total as i128).unsigned_abs() <= transfers.len() as u128);

        let inflow: u64 = g.edges_of(EdgeType::Transfers)
            .filter(|e| e.src.kind() == NodeKind::Tx)
            .map(|e| e.value.to_sat())
            .sum();
        prop_assert_eq!(inflow, ins.iter().sum::<u64>());
        prop_assert!(mirrors_match(&g));
    }

    #[test]
    fn as_printed_discrepancy((ins, outs, fee, _m) in tx_shape()) {
        let total: u64 = ins.iter().sum();
        prop_assume!(total > fee);
        let t = simple_tx("q", &ins, &outs, fee);
        let b = claimed_block(100, 1, vec![t]);
        let g = build_block_graph(&b, &ValueSplitConfig::default()).unwrap();
        let transfers = script_edges(&g, EdgeType::Transfers);
        let s: f64 = transfers.iter().map(|e| e.value.to_sat() as f64).sum();
        let out_total: u64 = outs.iter().sum();
        let expected = out_total as f64 * fee as f64 / (total - fee) as f64;
        prop_assert!((s - out_total as f64 - expected).abs() <= transfers.len() as f64 + 1e-6 * s.max(1.0));
    }

    #[test]
    fn deterministic(seed in 0u64..1000) {
        let b = synth_chain(SynthParams { seed, mean_txs: 3, ..Default::default() }, 3).pop().unwrap();
        let a = build_block_graph(&b, &ValueSplitConfig::default()).unwrap();
        let c = build_block_graph(&b.clone(), &ValueSplitConfig::default()).unwrap();
        prop_assert_eq!(a, c);
    }
}
