#![allow(dead_code)]

use sha2::{Digest, Sha256};
use txgraph::amount::Amount;
use txgraph::build::block_subsidy;
use txgraph::ingest::{BlockRecord, PrevOut, TxInRecord, TxOutRecord, TxRecord};
use txgraph::script::ScriptPubKey;

pub fn txid(tag: &str) -> String {
    hex::encode(Sha256::digest(tag.as_bytes()))
}

/// P2PKH script for key `k`, no node-provided address.
pub fn p2pkh(k: u64) -> ScriptPubKey {
    let h = hex::encode(&Sha256::digest(k.to_le_bytes())[..20]);
    ScriptPubKey::from_hex(format!("76a914{h}88ac"))
}

pub fn spend(prev: &str, vout: u32, value: u64, height: u64, key: u64) -> TxInRecord {
    TxInRecord::Spend(PrevOut {
        txid: txid(prev),
        vout,
        value: Amount::from_sat(value),
        height,
        generated: false,
        script: p2pkh(key),
    })
}

pub fn outputs(values: &[u64], key_base: u64) -> Vec<TxOutRecord> {
    values
        .iter()
        .enumerate()
        .map(|(n, &v)| TxOutRecord {
            value: Amount::from_sat(v),
            index_n: n as u32,
            script: p2pkh(key_base + n as u64),
        })
        .collect()
}

pub fn tx(tag: &str, vin: Vec<TxInRecord>, vout: Vec<TxOutRecord>, fee: Option<u64>) -> TxRecord {
    TxRecord {
        txid: txid(tag),
        size_bytes: 200,
        vsize: 200,
        weight_units: 800,
        version: "1".into(),
        lock_time: 0,
        vin,
        vout,
        fee: fee.map(Amount::from_sat),
    }
}

/// A non-coinbase tx spending `inputs` from an earlier block into `outs`.
pub fn simple_tx(tag: &str, inputs: &[u64], outs: &[u64], fee: u64) -> TxRecord {
    let vin = inputs
        .iter()
        .enumerate()
        .map(|(i, &v)| spend(&format!("{tag}-prev{i}"), i as u32, v, 1, 1000 + i as u64))
        .collect();
    tx(tag, vin, outputs(outs, 2000), Some(fee))
}

/// Wraps `txs` into a block whose coinbase pays `miner` outputs.
pub fn block_with(height: u64, miner: &[u64], txs: Vec<TxRecord>) -> BlockRecord {
    let coinbase = tx(
        &format!("coinbase-{height}"),
        vec![TxInRecord::Coinbase],
        outputs(miner, 9000),
        None,
    );
    let mut all = vec![coinbase];
    all.extend(txs);
    BlockRecord {
        height,
        hash: txid(&format!("block-{height}")),
        time: 0,
        median_time: 0,
        difficulty: 1.0,
        n_tx: all.len(),
        size_bytes: 1000,
        stripped_size_bytes: 1000,
        weight_units: 4000,
        txs: all,
    }
}

/// Block whose coinbase claims exactly subsidy plus fees, split over `miner_parts` outputs.
pub fn claimed_block(height: u64, miner_parts: usize, txs: Vec<TxRecord>) -> BlockRecord {
    let fees: u64 = txs.iter().map(|t| t.fee.unwrap().to_sat()).sum();
    let total = block_subsidy(height).to_sat() + fees;
    let parts = miner_parts.max(1) as u64;
    let mut miner: Vec<u64> = (0..parts).map(|_| total / parts).collect();
    miner[0] += total % parts;
    block_with(height, &miner, txs)
}
