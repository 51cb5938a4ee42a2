//! Block ingestion from a Bitcoin Core REST endpoint or JSON fixtures.

mod json;
mod rest;
mod stream;
mod validate;

use std::path::PathBuf;
use std::time::Duration;

use thiserror::Error;

use crate::amount::{Amount, AmountError};
use crate::script::{derive_script_id, ScriptId, ScriptPubKey};

pub use json::parse_block_json;
pub use rest::RestClient;
pub use stream::{iter_blocks, BlockStream};
pub use validate::{validate_block, ValidationReport, Violation};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("transport error for {url}: {message}")]
    Transport { url: String, message: String },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("HTTP {status} from {url}")]
    Http { url: String, status: u16 },
    #[error("malformed block JSON at byte {offset}: {message}")]
    Json { offset: usize, message: String },
    #[error("value error in {context}: {source}")]
    Value {
        context: String,
        #[source]
        source: AmountError,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("empty height range [{lo}, {hi}]")]
    EmptyRange { lo: u64, hi: u64 },
    #[error("missing block for height {0}")]
    MissingBlock(u64),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IngestError {
    /// Transport failures can be retried; everything else is final.
    pub fn is_retriable(&self) -> bool {
        matches!(self, IngestError::Transport { .. })
    }
}

#[derive(Debug, Clone)]
pub struct RestConfig {
    /// Base URL, e.g. `http://127.0.0.1:8332`.
    pub endpoint: String,
    pub timeout: Duration,
    /// Number of heights fetched ahead of the consumer.
    pub prefetch: usize,
    /// Extra attempts after a transport failure.
    pub retries: u32,
}

impl RestConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RestConfig {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(30),
            prefetch: 4,
            retries: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub enum SourceConfig {
    Rest(RestConfig),
    /// Directory holding `{height}.json` files in the node's block schema.
    Fixtures(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockRecord {
    pub height: u64,
    pub hash: String,
    /// Header timestamp (`time`).
    pub time: i64,
    /// Median time-past as reported by the node (`mediantime`).
    pub median_time: i64,
    pub difficulty: f64,
    pub n_tx: usize,
    pub size_bytes: u64,
    pub stripped_size_bytes: u64,
    pub weight_units: u64,
    pub txs: Vec<TxRecord>,
}

impl BlockRecord {
    pub fn coinbase(&self) -> Option<&TxRecord> {
        self.txs.first().filter(|t| t.is_coinbase())
    }

    /// Total value of the coinbase outputs, i.e. what the miner claimed.
    pub fn claimed_reward(&self) -> Amount {
        self.coinbase().map(TxRecord::output_total).unwrap_or_default()
    }

    /// Sum of node reported fees over all non-coinbase transactions.
    pub fn fee_total(&self) -> Amount {
        self.txs
            .iter()
            .filter(|t| !t.is_coinbase())
            .map(|t| t.fee.unwrap_or_default())
            .sum()
    }

    pub fn is_empty_block(&self) -> bool {
        self.txs.len() == 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TxRecord {
    pub txid: String,
    pub size_bytes: u64,
    pub vsize: u64,
    pub weight_units: u64,
    /// Raw version number as it appears in the JSON.
    pub version: String,
    pub lock_time: u64,
    pub vin: Vec<TxInRecord>,
    pub vout: Vec<TxOutRecord>,
    /// Absent for the coinbase.
    pub fee: Option<Amount>,
}

impl TxRecord {
    pub fn is_coinbase(&self) -> bool {
        self.vin.first().is_some_and(TxInRecord::is_coinbase)
    }

    pub fn output_total(&self) -> Amount {
        self.vout.iter().map(|o| o.value).sum()
    }

    pub fn input_total(&self) -> Amount {
        self.vin
            .iter()
            .filter_map(TxInRecord::prevout)
            .map(|p| p.value)
            .sum()
    }

    pub fn spends(&self) -> impl Iterator<Item = &PrevOut> {
        self.vin.iter().filter_map(TxInRecord::prevout)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TxInRecord {
    Coinbase,
    Spend(PrevOut),
}

impl TxInRecord {
    pub fn is_coinbase(&self) -> bool {
        matches!(self, TxInRecord::Coinbase)
    }

    pub fn prevout(&self) -> Option<&PrevOut> {
        match self {
            TxInRecord::Coinbase => None,
            TxInRecord::Spend(p) => Some(p),
        }
    }
}

/// The output an input spends, as resolved by a `txindex=1` node.
#[derive(Debug, Clone, PartialEq)]
pub struct PrevOut {
    pub txid: String,
    pub vout: u32,
    pub value: Amount,
    pub height: u64,
    /// Whether the spent output was created by a coinbase.
    pub generated: bool,
    pub script: ScriptPubKey,
}

impl PrevOut {
    pub fn script_id(&self) -> ScriptId {
        derive_script_id(&self.script, self.vout, &self.txid)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TxOutRecord {
    pub value: Amount,
    pub index_n: u32,
    pub script: ScriptPubKey,
}

impl TxOutRecord {
    pub fn script_id(&self, txid: &str) -> ScriptId {
        derive_script_id(&self.script, self.index_n, txid)
    }
}

pub(crate) fn is_hash_hex(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}
