//! Seeded synthetic chain generator.
//!
//! Produces structurally valid BlockRecords (fully claimed coinbases,
//! prevouts resolved, address reuse through a finite key pool) and can render
//! them back into the node's block JSON for fixture directories.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::amount::Amount;
use crate::build::block_subsidy;
use crate::ingest::{BlockRecord, PrevOut, TxInRecord, TxOutRecord, TxRecord};
use crate::script::{derive_address, ScriptPubKey};

pub const GENESIS_TIME: i64 = 1_231_006_505;

#[derive(Debug, Clone)]
pub struct SynthParams {
    pub seed: u64,
    /// Non-coinbase transactions per block are drawn from `0..=2 * mean`.
    pub mean_txs: usize,
    pub max_inputs: usize,
    pub max_outputs: usize,
    /// Number of distinct keys scripts are drawn from.
    pub key_pool: usize,
    /// Probability that a transaction leaves an unaccounted residual.
    pub residual_rate: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 1,
            mean_txs: 2,
            max_inputs: 3,
            max_outputs: 3,
            key_pool: 64,
            residual_rate: 0.0,
        }
    }
}

/// A residual planted by the generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InjectedResidual {
    pub height: u64,
    pub txid: String,
    pub value: Amount,
}

#[derive(Debug, Clone)]
struct Utxo {
    txid: String,
    vout: u32,
    value: Amount,
    height: u64,
    generated: bool,
    script: ScriptPubKey,
}

pub struct SynthChain {
    params: SynthParams,
    rng: ChaCha8Rng,
    height: u64,
    utxos: Vec<Utxo>,
    times: Vec<i64>,
    pub injected: Vec<InjectedResidual>,
}

fn hash_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    hex::encode(h.finalize())
}

impl SynthChain {
    pub fn new(params: SynthParams) -> Self {
        Self::starting_at(params, 0)
    }

    pub fn starting_at(params: SynthParams, height: u64) -> Self {
        SynthChain {
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            params,
            height,
            utxos: Vec::new(),
            times: Vec::new(),
            injected: Vec::new(),
        }
    }

    fn script(&mut self) -> ScriptPubKey {
        let key = self.rng.random_range(0..self.params.key_pool.max(1)) as u64;
        let digest = hash_hex(&[b"key", &key.to_le_bytes(), &self.params.seed.to_le_bytes()]);
        let (hex, node_type) = match key % 4 {
            0 => (format!("41{}{}ac", "04", digest.repeat(2)), "pubkey"),
            1 | 2 => (format!("76a914{}88ac", &digest[..40]), "pubkeyhash"),
            _ => (format!("0014{}", &digest[..40]), "witness_v0_keyhash"),
        };
        let mut s = ScriptPubKey::from_hex(&hex);
        s.node_type = Some(node_type.into());
        s.address = s.bytes().ok().and_then(|b| derive_address(&b));
        s
    }

    fn split(&mut self, total: u64, parts: usize) -> Vec<u64> {
        let mut cuts: Vec<u64> = (1..parts).map(|_| self.rng.random_range(0..=total)).collect();
        cuts.sort_unstable();
        let mut out = Vec::with_capacity(parts);
        let mut prev = 0;
        for c in cuts {
            out.push(c - prev);
            prev = c;
        }
        out.push(total - prev);
        if out.iter().all(|&v| v == 0) {
            out[0] = total;
        }
        out
    }

    fn next_tx(&mut self, height: u64, index: usize) -> Option<TxRecord> {
        if self.utxos.is_empty() {
            return None;
        }
        let txid = hash_hex(&[b"tx", &self.params.seed.to_le_bytes(), &height.to_le_bytes(), &index.to_le_bytes()]);
        let n_in = self.rng.random_range(1..=self.params.max_inputs.max(1)).min(self.utxos.len());
        let mut vin = Vec::with_capacity(n_in);
        let mut total_in = 0u64;
        for _ in 0..n_in {
            let i = self.rng.random_range(0..self.utxos.len());
            let u = self.utxos.swap_remove(i);
            total_in += u.value.to_sat();
            vin.push(TxInRecord::Spend(PrevOut {
                txid: u.txid,
                vout: u.vout,
                value: u.value,
                height: u.height,
                generated: u.generated,
                script: u.script,
            }));
        }
        let fee = if total_in > 1 {
            self.rng.random_range(0..=total_in / 100)
        } else {
            0
        };
        let residual = if total_in - fee > 1 && self.rng.random_bool(self.params.residual_rate) {
            self.rng.random_range(1..=(total_in - fee) / 2)
        } else {
            0
        };
        if residual > 0 {
            self.injected.push(InjectedResidual {
                height,
                txid: txid.clone(),
                value: Amount::from_sat(residual),
            });
        }
        let n_out = self.rng.random_range(1..=self.params.max_outputs.max(1));
        let values = self.split(total_in - fee - residual, n_out);
        let mut vout = Vec::with_capacity(n_out);
        for (n, v) in values.into_iter().enumerate() {
            let script = self.script();
            vout.push(TxOutRecord {
                value: Amount::from_sat(v),
                index_n: n as u32,
                script,
            });
        }
        Some(TxRecord {
            txid,
            size_bytes: 150 + 40 * (n_in + n_out) as u64,
            vsize: 150 + 40 * (n_in + n_out) as u64,
            weight_units: 4 * (150 + 40 * (n_in + n_out) as u64),
            version: "2".into(),
            lock_time: 0,
            vin,
            vout,
            fee: Some(Amount::from_sat(fee)),
        })
    }

    pub fn next_block(&mut self) -> BlockRecord {
        let height = self.height;
        self.height += 1;
        let n = self.rng.random_range(0..=2 * self.params.mean_txs);
        let mut txs = Vec::with_capacity(n + 1);
        let mut fees = 0u64;
        for i in 1..=n {
            let Some(tx) = self.next_tx(height, i) else {
                break;
            };
            fees += tx.fee.unwrap_or_default().to_sat();
            for o in &tx.vout {
                self.utxos.push(Utxo {
                    txid: tx.txid.clone(),
                    vout: o.index_n,
                    value: o.value,
                    height,
                    generated: false,
                    script: o.script.clone(),
                });
            }
            txs.push(tx);
        }
        let coinbase_id = hash_hex(&[b"cb", &self.params.seed.to_le_bytes(), &height.to_le_bytes()]);
        let reward = block_subsidy(height).to_sat() + fees;
        let n_out = self.rng.random_range(1..=2);
        let values = self.split(reward, n_out);
        let mut vout = Vec::new();
        for (n, v) in values.into_iter().enumerate() {
            let script = self.script();
            self.utxos.push(Utxo {
                txid: coinbase_id.clone(),
                vout: n as u32,
                value: Amount::from_sat(v),
                height,
                generated: true,
                script: script.clone(),
            });
            vout.push(TxOutRecord {
                value: Amount::from_sat(v),
                index_n: n as u32,
                script,
            });
        }
        txs.insert(
            0,
            TxRecord {
                txid: coinbase_id,
                size_bytes: 134,
                vsize: 134,
                weight_units: 536,
                version: "1".into(),
                lock_time: 0,
                vin: vec![TxInRecord::Coinbase],
                vout,
                fee: None,
            },
        );
        let time = GENESIS_TIME + 600 * height as i64 + self.rng.random_range(-300..=300);
        self.times.push(time);
        if self.times.len() > 11 {
            self.times.remove(0);
        }
        let mut window = self.times.clone();
        window.sort_unstable();
        let size = txs.iter().map(|t| t.size_bytes).sum::<u64>() + 80;
        BlockRecord {
            height,
            hash: hash_hex(&[b"block", &self.params.seed.to_le_bytes(), &height.to_le_bytes()]),
            time,
            median_time: window[window.len() / 2],
            difficulty: 1.0,
            n_tx: txs.len(),
            size_bytes: size,
            stripped_size_bytes: size,
            weight_units: 4 * size,
            txs,
        }
    }
}

impl Iterator for SynthChain {
    type Item = BlockRecord;

    fn next(&mut self) -> Option<BlockRecord> {
        Some(self.next_block())
    }
}

/// Blocks `0..count` of a seeded chain.
pub fn synth_chain(params: SynthParams, count: usize) -> Vec<BlockRecord> {
    SynthChain::new(params).take(count).collect()
}

fn script_json(out: &mut String, s: &ScriptPubKey) {
    out.push_str("{\"hex\":");
    out.push_str(&serde_json::to_string(&s.hex).expect("string"));
    if let Some(a) = &s.address {
        out.push_str(",\"address\":");
        out.push_str(&serde_json::to_string(a).expect("string"));
    }
    if let Some(t) = &s.node_type {
        out.push_str(",\"type\":");
        out.push_str(&serde_json::to_string(t).expect("string"));
    }
    out.push('}');
}

/// Renders a block in the `rest/block/<hash>.json` schema.
pub fn block_to_json(b: &BlockRecord) -> String {
    let mut o = String::new();
    let _ = write!(
        o,
        "{{\"hash\":\"{}\",\"height\":{},\"time\":{},\"mediantime\":{},\"difficulty\":{:?},\"nTx\":{},\
         \"size\":{},\"strippedsize\":{},\"weight\":{},\"tx\":[",
        b.hash, b.height, b.time, b.median_time, b.difficulty, b.n_tx, b.size_bytes, b.stripped_size_bytes, b.weight_units
    );
    for (i, t) in b.txs.iter().enumerate() {
        if i > 0 {
            o.push(',');
        }
        let _ = write!(
            o,
            "{{\"txid\":\"{}\",\"hash\":\"{}\",\"version\":{},\"size\":{},\"vsize\":{},\"weight\":{},\"locktime\":{},\"vin\":[",
            t.txid, t.txid, t.version, t.size_bytes, t.vsize, t.weight_units, t.lock_time
        );
        for (j, input) in t.vin.iter().enumerate() {
            if j > 0 {
                o.push(',');
            }
            match input {
                TxInRecord::Coinbase => o.push_str("{\"coinbase\":\"04ffff001d0104\",\"sequence\":4294967295}"),
                TxInRecord::Spend(p) => {
                    let _ = write!(
                        o,
                        "{{\"txid\":\"{}\",\"vout\":{},\"prevout\":{{\"generated\":{},\"height\":{},\"value\":{},\"scriptPubKey\":",
                        p.txid,
                        p.vout,
                        p.generated,
                        p.height,
                        p.value.to_btc_string()
                    );
                    script_json(&mut o, &p.script);
                    o.push_str("},\"sequence\":4294967295}");
                }
            }
        }
        o.push_str("],\"vout\":[");
        for (j, out) in t.vout.iter().enumerate() {
            if j > 0 {
                o.push(',');
            }
            let _ = write!(o, "{{\"value\":{},\"n\":{},\"scriptPubKey\":", out.value.to_btc_string(), out.index_n);
            script_json(&mut o, &out.script);
            o.push('}');
        }
        o.push(']');
        if let Some(f) = t.fee {
            let _ = write!(o, ",\"fee\":{}", f.to_btc_string());
        }
        o.push('}');
    }
    o.push_str("]}\n");
    o
}

/// Writes `{dir}/{height}.json` for each block.
pub fn write_fixture_dir(dir: &Path, blocks: &[BlockRecord]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for b in blocks {
        fs::write(dir.join(format!("{}.json", b.height)), block_to_json(b))?;
    }
    Ok(())
}
