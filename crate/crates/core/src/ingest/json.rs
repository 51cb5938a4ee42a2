use serde::Deserialize;
use serde_json::value::RawValue;

use super::{is_hash_hex, BlockRecord, IngestError, PrevOut, TxInRecord, TxOutRecord, TxRecord};
use crate::amount::Amount;
use crate::script::ScriptPubKey;

// Mirrors of the node's block JSON. Monetary fields are captured as raw
// number text so they never pass through f64. Witness and scriptSig data
// are not modelled and get dropped by serde.

#[derive(Deserialize)]
struct RawBlock<'a> {
    hash: String,
    height: u64,
    #[serde(default)]
    time: i64,
    #[serde(default)]
    mediantime: i64,
    #[serde(default)]
    difficulty: f64,
    #[serde(rename = "nTx")]
    n_tx: usize,
    #[serde(default)]
    size: u64,
    #[serde(default)]
    strippedsize: Option<u64>,
    #[serde(default)]
    weight: u64,
    #[serde(borrow)]
    tx: Vec<RawTx<'a>>,
}

#[derive(Deserialize)]
struct RawTx<'a> {
    txid: String,
    #[serde(default)]
    size: u64,
    #[serde(default)]
    vsize: u64,
    #[serde(default)]
    weight: u64,
    #[serde(borrow)]
    version: &'a RawValue,
    #[serde(default)]
    locktime: u64,
    #[serde(borrow)]
    vin: Vec<RawTxIn<'a>>,
    #[serde(borrow)]
    vout: Vec<RawTxOut<'a>>,
    #[serde(default, borrow)]
    fee: Option<&'a RawValue>,
}

#[derive(Deserialize)]
struct RawTxIn<'a> {
    #[serde(default)]
    coinbase: Option<String>,
    #[serde(default)]
    txid: Option<String>,
    #[serde(default)]
    vout: Option<u32>,
    #[serde(default, borrow)]
    prevout: Option<RawPrevOut<'a>>,
}

#[derive(Deserialize)]
struct RawPrevOut<'a> {
    #[serde(default)]
    generated: bool,
    height: u64,
    #[serde(borrow)]
    value: &'a RawValue,
    #[serde(rename = "scriptPubKey")]
    script_pub_key: RawScript,
}

#[derive(Deserialize)]
struct RawTxOut<'a> {
    #[serde(borrow)]
    value: &'a RawValue,
    n: u32,
    #[serde(rename = "scriptPubKey")]
    script_pub_key: RawScript,
}

#[derive(Deserialize)]
struct RawScript {
    #[serde(default)]
    hex: String,
    #[serde(default)]
    address: Option<String>,
    // pre-v22 nodes
    #[serde(default)]
    addresses: Option<Vec<String>>,
    #[serde(rename = "type", default)]
    node_type: Option<String>,
}

impl From<RawScript> for ScriptPubKey {
    fn from(r: RawScript) -> Self {
        let address = r.address.or_else(|| match r.addresses {
            Some(mut v) if v.len() == 1 => v.pop(),
            _ => None,
        });
        ScriptPubKey {
            hex: r.hex,
            address,
            node_type: r.node_type,
        }
    }
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    // serde_json reports 1-based line and column
    let line_start = if line <= 1 {
        0
    } else {
        bytes
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == b'\n')
            .nth(line - 2)
            .map_or(bytes.len(), |(i, _)| i + 1)
    };
    (line_start + column.saturating_sub(1)).min(bytes.len())
}

fn amount(raw: &RawValue, context: impl FnOnce() -> String) -> Result<Amount, IngestError> {
    Amount::from_btc_str(raw.get().trim()).map_err(|source| IngestError::Value {
        context: context(),
        source,
    })
}

/// Parses one block in Bitcoin Core's `rest/block/<hash>.json` schema.
pub fn parse_block_json(bytes: &[u8]) -> Result<BlockRecord, IngestError> {
    let raw: RawBlock<'_> = serde_json::from_slice(bytes).map_err(|e| IngestError::Json {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    if !is_hash_hex(&raw.hash) {
        return Err(IngestError::Schema(format!(
            "block hash {:?} is not 64 lowercase hex characters",
            raw.hash
        )));
    }
    let height = raw.height;
    let txs = raw
        .tx
        .into_iter()
        .map(|t| convert_tx(t, height))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BlockRecord {
        height,
        hash: raw.hash,
        time: raw.time,
        median_time: raw.mediantime,
        difficulty: raw.difficulty,
        n_tx: raw.n_tx,
        size_bytes: raw.size,
        stripped_size_bytes: raw.strippedsize.unwrap_or(raw.size),
        weight_units: raw.weight,
        txs,
    })
}

fn convert_tx(t: RawTx<'_>, height: u64) -> Result<TxRecord, IngestError> {
    if !is_hash_hex(&t.txid) {
        return Err(IngestError::Schema(format!(
            "txid {:?} at height {height} is not 64 lowercase hex characters",
            t.txid
        )));
    }
    let txid = t.txid;
    let vin = t
        .vin
        .into_iter()
        .enumerate()
        .map(|(i, input)| convert_input(input, &txid, i))
        .collect::<Result<Vec<_>, _>>()?;
    let vout = t
        .vout
        .into_iter()
        .map(|o| {
            let value = amount(o.value, || format!("tx {txid} vout {}", o.n))?;
            Ok(TxOutRecord {
                value,
                index_n: o.n,
                script: o.script_pub_key.into(),
            })
        })
        .collect::<Result<Vec<_>, IngestError>>()?;
    let fee = t
        .fee
        .map(|f| amount(f, || format!("tx {txid} fee")))
        .transpose()?;
    Ok(TxRecord {
        size_bytes: t.size,
        vsize: t.vsize,
        weight_units: t.weight,
        version: t.version.get().trim().to_owned(),
        lock_time: t.locktime,
        vin,
        vout,
        fee,
        txid,
    })
}

fn convert_input(input: RawTxIn<'_>, txid: &str, index: usize) -> Result<TxInRecord, IngestError> {
    if input.coinbase.is_some() {
        if input.txid.is_some() || input.prevout.is_some() {
            return Err(IngestError::Schema(format!(
                "tx {txid} input {index} is a coinbase input but references a previous output"
            )));
        }
        return Ok(TxInRecord::Coinbase);
    }
    let (Some(prev_txid), Some(vout)) = (input.txid, input.vout) else {
        return Err(IngestError::Schema(format!(
            "tx {txid} input {index} has neither coinbase nor outpoint"
        )));
    };
    let Some(prevout) = input.prevout else {
        return Err(IngestError::Schema(format!(
            "tx {txid} input {index} lacks prevout (node must run with txindex=1)"
        )));
    };
    if !is_hash_hex(&prev_txid) {
        return Err(IngestError::Schema(format!(
            "tx {txid} input {index} spends malformed txid {prev_txid:?}"
        )));
    }
    let value = amount(prevout.value, || format!("tx {txid} vin {index} prevout"))?;
    Ok(TxInRecord::Spend(PrevOut {
        txid: prev_txid,
        vout,
        value,
        height: prevout.height,
        generated: prevout.generated,
        script: prevout.script_pub_key.into(),
    }))
}
