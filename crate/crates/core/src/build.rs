//! BlockRecord to BlockGraph transformation.
//!
//! Value splits are evaluated as exact rationals over satoshi integers and
//! rounded once per edge, half away from zero:
//!
//! * `Coinbase -Mints-> Script`: `minted * paid_to_script / mining_reward`
//! * `Script_u -Fee-> Script_v`:
//!   `fee * u / max(total_in, 1) * v / total_paid_to_miner`
//! * `Script_u -Transfers-> Script_v`: `v * u / (total_in - fee)`, or
//!   `v * u / total_in` in conserving mode.
//!
//! Every Script or Tx level `Fee`/`Transfers` edge is mirrored by a
//! `Redeems` edge from its source to the Block node and a `Credits`
//! (Script) or `Confirms` (Tx) edge from the Block node to its target, with
//! the same value.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::amount::{mul_div_round, Amount};
use crate::ingest::{validate_block, BlockRecord, PrevOut, TxRecord, Violation};
use crate::model::{BlockGraph, BlockProps, EdgeRecord, EdgeType, Node, NodeRef, TxProps};
use crate::script::{classify_script, ScriptId, ScriptPubKey, ScriptType};

pub const INITIAL_SUBSIDY: Amount = Amount::from_sat(50 * crate::amount::COIN);
pub const HALVING_INTERVAL: u64 = 210_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("mining reward is zero")]
    ZeroMiningReward,
    #[error("total paid to miner is zero")]
    ZeroMinerTotal,
    #[error("degenerate transaction: inputs {sum_inputs} do not exceed fee {fee}")]
    DegenerateTransfer { sum_inputs: Amount, fee: Amount },
    #[error("tx {txid} spends {inputs} but pays {outputs} plus fee {fee}")]
    NegativeResidual {
        txid: String,
        inputs: Amount,
        outputs: Amount,
        fee: Amount,
    },
    #[error("value overflow")]
    Overflow,
    #[error("block {height} fails validation: {}", join(.violations))]
    InvalidBlock {
        height: u64,
        violations: Vec<Violation>,
    },
    #[error("block {height} tx {txid}: {source}")]
    Context {
        height: u64,
        txid: String,
        #[source]
        source: Box<BuildError>,
    },
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl BuildError {
    fn at(self, height: u64, txid: &str) -> BuildError {
        BuildError::Context {
            height,
            txid: txid.to_owned(),
            source: Box::new(self),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DenominatorMode {
    /// `Σ inputs - fee`, as tabulated. Single-input edges can exceed their output.
    #[default]
    AsPrinted,
    /// `Σ inputs`; edge values sum to the outputs.
    Conserving,
}

impl fmt::Display for DenominatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DenominatorMode::AsPrinted => "as-printed",
            DenominatorMode::Conserving => "conserving",
        })
    }
}

impl FromStr for DenominatorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "as-printed" => Ok(DenominatorMode::AsPrinted),
            "conserving" => Ok(DenominatorMode::Conserving),
            _ => Err(format!("unknown denominator mode {s:?} (as-printed | conserving)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueSplitConfig {
    pub transfer_denominator_mode: DenominatorMode,
    /// A tx is dropped when it has more than this many inputs *and* outputs.
    pub max_inout_threshold: usize,
    /// Drop transactions whose outputs are all zero-valued.
    pub skip_zero_value: bool,
    /// Merge inputs spending the same producing tx into one Tx-level edge.
    pub aggregate_tx_inputs: bool,
}

impl Default for ValueSplitConfig {
    fn default() -> Self {
        ValueSplitConfig {
            transfer_denominator_mode: DenominatorMode::AsPrinted,
            max_inout_threshold: 20,
            skip_zero_value: true,
            aggregate_tx_inputs: false,
        }
    }
}

impl ValueSplitConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_inout_threshold < 1 {
            return Err("max_inout_threshold must be at least 1".into());
        }
        Ok(())
    }

    /// Whether `tx` is dropped from the graph entirely.
    pub fn excludes(&self, tx: &TxRecord) -> bool {
        if tx.vin.len() > self.max_inout_threshold && tx.vout.len() > self.max_inout_threshold {
            return true;
        }
        self.skip_zero_value && tx.vout.iter().all(|o| o.value == Amount::ZERO)
    }
}

/// Protocol subsidy at `height`: 50 BTC halved every 210 000 blocks.
pub fn block_subsidy(height: u64) -> Amount {
    let halvings = height / HALVING_INTERVAL;
    if halvings >= 64 {
        return Amount::ZERO;
    }
    Amount::from_sat(INITIAL_SUBSIDY.to_sat() >> halvings)
}

/// Coins actually minted by the block: the claimed reward minus fees,
/// capped at the subsidy and floored at zero.
pub fn minted_coins(b: &BlockRecord) -> Amount {
    let claimed_minted = b.claimed_reward().saturating_sub(b.fee_total());
    claimed_minted.min(block_subsidy(b.height))
}

pub fn mint_edge_value(
    minted: Amount,
    paid_to_script: Amount,
    mining_reward: Amount,
) -> Result<Amount, BuildError> {
    if mining_reward == Amount::ZERO {
        return Err(BuildError::ZeroMiningReward);
    }
    mul_div_round(
        &[minted.to_sat(), paid_to_script.to_sat()],
        &[mining_reward.to_sat()],
    )
    .map(Amount::from_sat)
    .ok_or(BuildError::Overflow)
}

pub fn fee_edge_value(
    tx_fee: Amount,
    u_value: Amount,
    total_tx_input: Amount,
    v_value: Amount,
    total_paid_to_miner: Amount,
) -> Result<Amount, BuildError> {
    if total_paid_to_miner == Amount::ZERO {
        return Err(BuildError::ZeroMinerTotal);
    }
    let input_den = total_tx_input.to_sat().max(1);
    mul_div_round(
        &[tx_fee.to_sat(), u_value.to_sat(), v_value.to_sat()],
        &[input_den, total_paid_to_miner.to_sat()],
    )
    .map(Amount::from_sat)
    .ok_or(BuildError::Overflow)
}

pub fn transfer_edge_value(
    v_out_value: Amount,
    u_in_value: Amount,
    sum_inputs: Amount,
    fee: Amount,
    cfg: &ValueSplitConfig,
) -> Result<Amount, BuildError> {
    let denom = match cfg.transfer_denominator_mode {
        DenominatorMode::AsPrinted => sum_inputs.to_sat() as i128 - fee.to_sat() as i128,
        DenominatorMode::Conserving => sum_inputs.to_sat() as i128,
    };
    if denom <= 0 {
        return Err(BuildError::DegenerateTransfer { sum_inputs, fee });
    }
    mul_div_round(&[v_out_value.to_sat(), u_in_value.to_sat()], &[denom as u64])
        .map(Amount::from_sat)
        .ok_or(BuildError::Overflow)
}

/// `Σ prevout values - Σ outputs - fee`; non-coinbase only.
pub fn residual(tx: &TxRecord) -> Result<Amount, BuildError> {
    let inputs = tx.input_total();
    let outputs = tx.output_total();
    let fee = tx.fee.unwrap_or_default();
    inputs
        .checked_sub(outputs)
        .and_then(|r| r.checked_sub(fee))
        .ok_or_else(|| BuildError::NegativeResidual {
            txid: tx.txid.clone(),
            inputs,
            outputs,
            fee,
        })
}

struct GraphBuilder {
    height: u64,
    nodes: Vec<Node>,
    index: HashMap<NodeRef, usize>,
    edges: Vec<EdgeRecord>,
    block_txids: HashSet<String>,
    external: Vec<String>,
    external_seen: HashSet<String>,
}

impl GraphBuilder {
    fn add_node(&mut self, node: Node) {
        let r = node.node_ref();
        match self.index.get(&r) {
            // duplicate txids: last writer wins on properties
            Some(&i) if matches!(node, Node::Tx(_)) => self.nodes[i] = node,
            Some(_) => {}
            None => {
                self.index.insert(r, self.nodes.len());
                self.nodes.push(node);
            }
        }
    }

    fn add_script(&mut self, id: &ScriptId, script: &ScriptPubKey) {
        if self.index.contains_key(&NodeRef::Script(id.clone())) {
            return;
        }
        let script_type = classify_script(script).unwrap_or(ScriptType::NonStandard);
        self.add_node(Node::Script {
            id: id.clone(),
            script_type,
        });
    }

    fn note_tx_ref(&mut self, txid: &str) {
        if !self.block_txids.contains(txid) && self.external_seen.insert(txid.to_owned()) {
            self.external.push(txid.to_owned());
        }
    }

    fn edge(&mut self, src: NodeRef, t: EdgeType, dst: NodeRef, value: Amount) {
        self.edges.push(EdgeRecord::new(src, t, dst, value, self.height));
    }

    /// An originator edge plus its two Block-context mirrors.
    fn mirrored(&mut self, src: NodeRef, t: EdgeType, dst: NodeRef, value: Amount) {
        let block = NodeRef::Block(self.height);
        let incoming = match dst {
            NodeRef::Script(_) => EdgeType::Credits,
            _ => EdgeType::Confirms,
        };
        self.edge(src.clone(), t, dst.clone(), value);
        self.edge(src, EdgeType::Redeems, block.clone(), value);
        self.edge(block, incoming, dst, value);
    }
}

fn tx_props(tx: &TxRecord) -> TxProps {
    TxProps {
        txid: tx.txid.clone(),
        size: tx.size_bytes,
        vsize: tx.vsize,
        weight: tx.weight_units,
        version: tx.version.clone(),
        lock_time: tx.lock_time,
    }
}

/// Builds the graph of one block.
pub fn build_block_graph(b: &BlockRecord, cfg: &ValueSplitConfig) -> Result<BlockGraph, BuildError> {
    let report = validate_block(b);
    if !report.is_valid() {
        return Err(BuildError::InvalidBlock {
            height: b.height,
            violations: report.violations,
        });
    }
    let height = b.height;
    let mut g = GraphBuilder {
        height,
        nodes: Vec::new(),
        index: HashMap::new(),
        edges: Vec::new(),
        block_txids: b.txs.iter().map(|t| t.txid.clone()).collect(),
        external: Vec::new(),
        external_seen: HashSet::new(),
    };
    g.add_node(Node::Coinbase);
    g.add_node(Node::Block(BlockProps {
        height,
        median_time: b.median_time,
        difficulty: b.difficulty,
        n_tx: b.n_tx as u64,
        size: b.size_bytes,
        stripped_size: b.stripped_size_bytes,
        weight: b.weight_units,
    }));

    let coinbase = &b.txs[0];
    let coinbase_ref = NodeRef::Tx(coinbase.txid.clone());
    let claimed = coinbase.output_total();
    let minted = minted_coins(b);
    g.add_node(Node::Tx(tx_props(coinbase)));
    g.edge(NodeRef::Coinbase, EdgeType::Mints, coinbase_ref.clone(), minted);

    let miner_outputs: Vec<(ScriptId, Amount)> = coinbase
        .vout
        .iter()
        .map(|o| (o.script_id(&coinbase.txid), o.value))
        .collect();
    if claimed > Amount::ZERO {
        for (out, (id, value)) in coinbase.vout.iter().zip(&miner_outputs) {
            g.add_script(id, &out.script);
            let v = mint_edge_value(minted, *value, claimed).map_err(|e| e.at(height, &coinbase.txid))?;
            g.edge(NodeRef::Coinbase, EdgeType::Mints, NodeRef::Script(id.clone()), v);
        }
    }

    for tx in &b.txs[1..] {
        if cfg.excludes(tx) {
            log::debug!("block {height}: excluding tx {}", tx.txid);
            continue;
        }
        add_transaction(&mut g, tx, cfg, &coinbase_ref, &miner_outputs, claimed)
            .map_err(|e| e.at(height, &tx.txid))?;
    }

    Ok(BlockGraph {
        height,
        nodes: g.nodes,
        edges: g.edges,
        external_txs: g.external,
    })
}

fn add_transaction(
    g: &mut GraphBuilder,
    tx: &TxRecord,
    cfg: &ValueSplitConfig,
    coinbase_ref: &NodeRef,
    miner_outputs: &[(ScriptId, Amount)],
    claimed: Amount,
) -> Result<(), BuildError> {
    residual(tx)?;
    let fee = tx.fee.unwrap_or_default();
    let sum_inputs = tx.input_total();
    let this = NodeRef::Tx(tx.txid.clone());
    g.add_node(Node::Tx(tx_props(tx)));

    let spends: Vec<&PrevOut> = tx.spends().collect();
    let inputs: Vec<ScriptId> = spends.iter().map(|p| p.script_id()).collect();
    let outputs: Vec<ScriptId> = tx.vout.iter().map(|o| o.script_id(&tx.txid)).collect();
    for (id, p) in inputs.iter().zip(&spends) {
        g.add_script(id, &p.script);
    }
    for (id, o) in outputs.iter().zip(&tx.vout) {
        g.add_script(id, &o.script);
    }

    // Tx level transfers from each producing tx
    let mut tx_inflows: Vec<(&str, Amount)> = Vec::with_capacity(spends.len());
    for p in &spends {
        match tx_inflows.iter_mut().find(|(t, _)| cfg.aggregate_tx_inputs && *t == p.txid) {
            Some((_, v)) => *v = v.checked_add(p.value).ok_or(BuildError::Overflow)?,
            None => tx_inflows.push((&p.txid, p.value)),
        }
    }
    for (src, value) in tx_inflows {
        g.note_tx_ref(src);
        g.mirrored(NodeRef::Tx(src.to_owned()), EdgeType::Transfers, this.clone(), value);
    }

    // Script level complete bipartite transfers
    for (u, p) in inputs.iter().zip(&spends) {
        for (v, o) in outputs.iter().zip(&tx.vout) {
            match transfer_edge_value(o.value, p.value, sum_inputs, fee, cfg) {
                Ok(value) => g.mirrored(
                    NodeRef::Script(u.clone()),
                    EdgeType::Transfers,
                    NodeRef::Script(v.clone()),
                    value,
                ),
                Err(e @ BuildError::DegenerateTransfer { .. }) => {
                    log::warn!("tx {}: skipping transfer edge: {e}", tx.txid);
                }
                Err(e) => return Err(e),
            }
        }
    }

    if fee == Amount::ZERO || claimed == Amount::ZERO {
        return Ok(());
    }
    g.mirrored(this, EdgeType::Fee, coinbase_ref.clone(), fee);
    for (u, p) in inputs.iter().zip(&spends) {
        for (v, miner_value) in miner_outputs {
            let value = fee_edge_value(fee, p.value, sum_inputs, *miner_value, claimed)?;
            g.mirrored(
                NodeRef::Script(u.clone()),
                EdgeType::Fee,
                NodeRef::Script(v.clone()),
                value,
            );
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amount::COIN;

    fn btc(s: &str) -> Amount {
        Amount::from_btc_str(s).unwrap()
    }

    #[test]
    fn subsidy_schedule() {
        assert_eq!(block_subsidy(0), btc("50"));
        assert_eq!(block_subsidy(209_999), btc("50"));
        assert_eq!(block_subsidy(210_000), btc("25"));
        assert_eq!(block_subsidy(840_000), btc("3.125"));
        assert_eq!(block_subsidy(64 * HALVING_INTERVAL), Amount::ZERO);
        assert_eq!(block_subsidy(33 * HALVING_INTERVAL), Amount::ZERO);
        assert_eq!(block_subsidy(32 * HALVING_INTERVAL), Amount::from_sat(1));
    }

    #[test]
    fn mint_values() {
        assert_eq!(mint_edge_value(btc("50"), btc("52.01"), btc("52.01")).unwrap(), btc("50"));
        assert_eq!(mint_edge_value(btc("50"), btc("26.005"), btc("52.01")).unwrap(), btc("25"));
        assert_eq!(mint_edge_value(btc("7"), btc("3"), btc("3")).unwrap(), btc("7"));
        assert_eq!(mint_edge_value(btc("50"), Amount::ZERO, Amount::ZERO), Err(BuildError::ZeroMiningReward));
    }

    #[test]
    fn fee_values() {
        let v = fee_edge_value(btc("1.0"), btc("34.93"), btc("34.93"), btc("52.01"), btc("52.01")).unwrap();
        assert_eq!(v, Amount::from_sat(COIN));
        let a = fee_edge_value(btc("0.01"), btc("1.0"), btc("32.93"), btc("52.01"), btc("52.01")).unwrap();
        let b = fee_edge_value(btc("0.01"), btc("31.93"), btc("32.93"), btc("52.01"), btc("52.01")).unwrap();
        // 10^6 * 10^8 / 3 293 000 000 = 30367.45; 10^6 * 3 193 000 000 / 3 293 000 000 = 969632.55
        assert_eq!(a.to_sat(), 30_367);
        assert_eq!(b.to_sat(), 969_633);
        assert_eq!(a.to_sat() + b.to_sat(), 1_000_000);
        assert_eq!(
            fee_edge_value(btc("1"), btc("1"), btc("1"), btc("1"), Amount::ZERO),
            Err(BuildError::ZeroMinerTotal)
        );
    }

    #[test]
    fn fee_rounding_residue_three_sats() {
        // fee 3 sat over two equal inputs and one miner output: 1.5 -> 2 each
        let f = |u| fee_edge_value(Amount::from_sat(3), Amount::from_sat(u), Amount::from_sat(10), Amount::from_sat(7), Amount::from_sat(7)).unwrap();
        assert_eq!(f(5).to_sat(), 2);
        assert_eq!(2 * f(5).to_sat() - 3, 1);
    }

    #[test]
    fn transfer_values() {
        let printed = ValueSplitConfig::default();
        let conserving = ValueSplitConfig {
            transfer_denominator_mode: DenominatorMode::Conserving,
            ..Default::default()
        };
        // 10^8 * 3 493 000 000 / 3 393 000 000 = 102 947 244.326...
        assert_eq!(
            transfer_edge_value(btc("1.0"), btc("34.93"), btc("34.93"), btc("1.0"), &printed).unwrap(),
            Amount::from_sat(102_947_244)
        );
        assert_eq!(
            transfer_edge_value(btc("1.0"), btc("34.93"), btc("34.93"), btc("1.0"), &conserving).unwrap(),
            btc("1.0")
        );
        assert_eq!(
            transfer_edge_value(Amount::ZERO, btc("34.93"), btc("34.93"), btc("1.0"), &printed).unwrap(),
            Amount::ZERO
        );
        assert!(matches!(
            transfer_edge_value(btc("0"), btc("1"), btc("1"), btc("1"), &printed),
            Err(BuildError::DegenerateTransfer { .. })
        ));
    }

    #[test]
    fn config_parsing() {
        assert_eq!("conserving".parse::<DenominatorMode>().unwrap(), DenominatorMode::Conserving);
        assert!("sideways".parse::<DenominatorMode>().is_err());
        let bad = ValueSplitConfig {
            max_inout_threshold: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
