use std::fmt;

use super::{is_hash_hex, BlockRecord};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    TxCountMismatch { n_tx: usize, actual: usize },
    NoTransactions,
    CoinbaseNotFirst,
    CoinbaseNotUnique { index: usize },
    CoinbaseInputCount { inputs: usize },
    MixedCoinbaseInput { txid: String },
    EmptyInputs { txid: String },
    EmptyOutputs { txid: String },
    OutputIndex { txid: String, position: usize, n: u32 },
    MissingFee { txid: String },
    NegativeResidual { txid: String },
    BadHash { value: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TxCountMismatch { n_tx, actual } => {
                write!(f, "nTx is {n_tx} but block holds {actual} transactions")
            }
            Violation::NoTransactions => f.write_str("block has no transactions"),
            Violation::CoinbaseNotFirst => f.write_str("coinbase not first"),
            Violation::CoinbaseNotUnique { index } => {
                write!(f, "coinbase input in transaction {index}")
            }
            Violation::CoinbaseInputCount { inputs } => {
                write!(f, "coinbase has {inputs} inputs, expected exactly one")
            }
            Violation::MixedCoinbaseInput { txid } => {
                write!(f, "tx {txid} mixes coinbase and regular inputs")
            }
            Violation::EmptyInputs { txid } => write!(f, "tx {txid} has no inputs"),
            Violation::EmptyOutputs { txid } => write!(f, "tx {txid} has no outputs"),
            Violation::OutputIndex { txid, position, n } => {
                write!(f, "tx {txid} output at position {position} has n={n}")
            }
            Violation::MissingFee { txid } => write!(f, "tx {txid} has no fee field"),
            Violation::NegativeResidual { txid } => write!(f, "negative residual in tx {txid}"),
            Violation::BadHash { value } => write!(f, "malformed hash {value:?}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub height: u64,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the structural invariants of a parsed block. Violations are data.
pub fn validate_block(b: &BlockRecord) -> ValidationReport {
    let mut v = Vec::new();
    if !is_hash_hex(&b.hash) {
        v.push(Violation::BadHash {
            value: b.hash.clone(),
        });
    }
    if b.n_tx != b.txs.len() {
        v.push(Violation::TxCountMismatch {
            n_tx: b.n_tx,
            actual: b.txs.len(),
        });
    }
    if b.txs.is_empty() {
        v.push(Violation::NoTransactions);
    } else if !b.txs[0].is_coinbase() {
        v.push(Violation::CoinbaseNotFirst);
    }
    for (i, tx) in b.txs.iter().enumerate() {
        if !is_hash_hex(&tx.txid) {
            v.push(Violation::BadHash {
                value: tx.txid.clone(),
            });
        }
        if tx.vin.is_empty() {
            v.push(Violation::EmptyInputs {
                txid: tx.txid.clone(),
            });
        }
        if tx.vout.is_empty() {
            v.push(Violation::EmptyOutputs {
                txid: tx.txid.clone(),
            });
        }
        for (pos, out) in tx.vout.iter().enumerate() {
            if out.index_n as usize != pos {
                v.push(Violation::OutputIndex {
                    txid: tx.txid.clone(),
                    position: pos,
                    n: out.index_n,
                });
            }
        }
        let coinbase_inputs = tx.vin.iter().filter(|i| i.is_coinbase()).count();
        if coinbase_inputs > 0 {
            if i != 0 {
                v.push(Violation::CoinbaseNotUnique { index: i });
            }
            if coinbase_inputs != tx.vin.len() {
                v.push(Violation::MixedCoinbaseInput {
                    txid: tx.txid.clone(),
                });
            } else if i == 0 && tx.vin.len() != 1 {
                v.push(Violation::CoinbaseInputCount {
                    inputs: tx.vin.len(),
                });
            }
            continue;
        }
        let Some(fee) = tx.fee else {
            v.push(Violation::MissingFee {
                txid: tx.txid.clone(),
            });
            continue;
        };
        let spent = tx.input_total().to_sat() as i128;
        let paid = tx.output_total().to_sat() as i128 + fee.to_sat() as i128;
        if spent < paid {
            v.push(Violation::NegativeResidual {
                txid: tx.txid.clone(),
            });
        }
    }
    ValidationReport {
        height: b.height,
        violations: v,
    }
}
