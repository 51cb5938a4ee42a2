//! Locking-script classification and script node identity.
//!
//! The taxonomy is the ten-way split used throughout the graph: the nine
//! common standard types plus `NonStandard` as the total fallback. Node
//! provided `type` strings win when present; otherwise the raw bytes are
//! pattern matched the same way Bitcoin Core's solver does.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::address::{self, MAINNET_HRP, P2PKH_VERSION, P2SH_VERSION};

const OP_0: u8 = 0x00;
const OP_PUSHDATA1: u8 = 0x4c;
const OP_PUSHDATA2: u8 = 0x4d;
const OP_PUSHDATA4: u8 = 0x4e;
const OP_1NEGATE: u8 = 0x4f;
const OP_RESERVED: u8 = 0x50;
const OP_1: u8 = 0x51;
const OP_16: u8 = 0x60;
const OP_RETURN: u8 = 0x6a;
const OP_DUP: u8 = 0x76;
const OP_EQUAL: u8 = 0x87;
const OP_EQUALVERIFY: u8 = 0x88;
const OP_HASH160: u8 = 0xa9;
const OP_CHECKSIG: u8 = 0xac;
const OP_CHECKMULTISIG: u8 = 0xae;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScriptError {
    #[error("undecodable script hex {hex:?}: {reason}")]
    Hex { hex: String, reason: String },
}

/// A locking script as reported by the node: raw hex plus the optional
/// address and type tag Bitcoin Core attaches to `scriptPubKey`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScriptPubKey {
    pub hex: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub address: Option<String>,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub node_type: Option<String>,
}

impl ScriptPubKey {
    pub fn from_hex(hex: impl Into<String>) -> Self {
        ScriptPubKey {
            hex: hex.into(),
            address: None,
            node_type: None,
        }
    }

    pub fn bytes(&self) -> Result<Vec<u8>, ScriptError> {
        hex::decode(&self.hex).map_err(|e| ScriptError::Hex {
            hex: self.hex.clone(),
            reason: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScriptType {
    P2PK,
    P2PKH,
    P2SH,
    P2WPKH,
    P2WSH,
    P2TR,
    P2MS,
    NullData,
    WitnessUnknown,
    NonStandard,
}

impl ScriptType {
    pub const ALL: [ScriptType; 10] = [
        ScriptType::P2PK,
        ScriptType::P2PKH,
        ScriptType::P2SH,
        ScriptType::P2WPKH,
        ScriptType::P2WSH,
        ScriptType::P2TR,
        ScriptType::P2MS,
        ScriptType::NullData,
        ScriptType::WitnessUnknown,
        ScriptType::NonStandard,
    ];

    /// Position in [`ScriptType::ALL`]; used for one-hot encodings.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScriptType::P2PK => "P2PK",
            ScriptType::P2PKH => "P2PKH",
            ScriptType::P2SH => "P2SH",
            ScriptType::P2WPKH => "P2WPKH",
            ScriptType::P2WSH => "P2WSH",
            ScriptType::P2TR => "P2TR",
            ScriptType::P2MS => "P2MS",
            ScriptType::NullData => "NullData",
            ScriptType::WitnessUnknown => "WitnessUnknown",
            ScriptType::NonStandard => "NonStandard",
        }
    }

    /// Maps a Bitcoin Core `scriptPubKey.type` string onto the taxonomy.
    pub fn from_node_type(tag: &str) -> Option<ScriptType> {
        Some(match tag {
            "pubkey" => ScriptType::P2PK,
            "pubkeyhash" => ScriptType::P2PKH,
            "scripthash" => ScriptType::P2SH,
            "witness_v0_keyhash" => ScriptType::P2WPKH,
            "witness_v0_scripthash" => ScriptType::P2WSH,
            "witness_v1_taproot" => ScriptType::P2TR,
            "multisig" => ScriptType::P2MS,
            "nulldata" => ScriptType::NullData,
            "witness_unknown" | "anchor" => ScriptType::WitnessUnknown,
            "nonstandard" => ScriptType::NonStandard,
            _ => return None,
        })
    }
}

impl fmt::Display for ScriptType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScriptType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScriptType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown script type {s:?}"))
    }
}

/// Classifies a locking script. Total: every decodable byte string gets a tag.
pub fn classify_script(script: &ScriptPubKey) -> Result<ScriptType, ScriptError> {
    let bytes = script.bytes()?;
    if let Some(t) = script.node_type.as_deref().and_then(ScriptType::from_node_type) {
        return Ok(t);
    }
    Ok(classify_bytes(&bytes))
}

/// Pattern matches raw script bytes.
pub fn classify_bytes(s: &[u8]) -> ScriptType {
    if s.len() == 25
        && s[0] == OP_DUP
        && s[1] == OP_HASH160
        && s[2] == 20
        && s[23] == OP_EQUALVERIFY
        && s[24] == OP_CHECKSIG
    {
        return ScriptType::P2PKH;
    }
    if s.len() == 23 && s[0] == OP_HASH160 && s[1] == 20 && s[22] == OP_EQUAL {
        return ScriptType::P2SH;
    }
    if let Some((version, program)) = witness_program(s) {
        return match (version, program.len()) {
            (0, 20) => ScriptType::P2WPKH,
            (0, 32) => ScriptType::P2WSH,
            (1, 32) => ScriptType::P2TR,
            (0, _) => ScriptType::NonStandard,
            _ => ScriptType::WitnessUnknown,
        };
    }
    if is_pay_to_pubkey(s) {
        return ScriptType::P2PK;
    }
    if is_multisig(s) {
        return ScriptType::P2MS;
    }
    if !s.is_empty() && s[0] == OP_RETURN && is_push_only(&s[1..]) {
        return ScriptType::NullData;
    }
    ScriptType::NonStandard
}

/// `OP_n <2..40 byte push>`, returning `(n, program)`.
fn witness_program(s: &[u8]) -> Option<(u8, &[u8])> {
    if s.len() < 4 || s.len() > 42 {
        return None;
    }
    let version = match s[0] {
        OP_0 => 0,
        op @ OP_1..=OP_16 => op - OP_1 + 1,
        _ => return None,
    };
    if s[1] as usize + 2 == s.len() {
        Some((version, &s[2..]))
    } else {
        None
    }
}

fn is_pubkey(key: &[u8]) -> bool {
    match key.len() {
        33 => key[0] == 0x02 || key[0] == 0x03,
        65 => key[0] == 0x04 || key[0] == 0x06 || key[0] == 0x07,
        _ => false,
    }
}

fn is_pay_to_pubkey(s: &[u8]) -> bool {
    match s.len() {
        35 => s[0] == 33 && s[34] == OP_CHECKSIG && is_pubkey(&s[1..34]),
        67 => s[0] == 65 && s[66] == OP_CHECKSIG && is_pubkey(&s[1..66]),
        _ => false,
    }
}

fn small_int(op: u8) -> Option<u8> {
    (OP_1..=OP_16).contains(&op).then(|| op - OP_1 + 1)
}

fn is_multisig(s: &[u8]) -> bool {
    if s.len() < 3 || *s.last().unwrap() != OP_CHECKMULTISIG {
        return false;
    }
    let Some(required) = small_int(s[0]) else {
        return false;
    };
    let Some(total) = small_int(s[s.len() - 2]) else {
        return false;
    };
    let mut keys = 0u8;
    let mut rest = &s[1..s.len() - 2];
    while !rest.is_empty() {
        let len = rest[0] as usize;
        if (len != 33 && len != 65) || rest.len() < 1 + len || !is_pubkey(&rest[1..1 + len]) {
            return false;
        }
        keys += 1;
        rest = &rest[1 + len..];
    }
    keys == total && required <= total
}

/// True when every opcode is a data push (or a small-number push).
fn is_push_only(mut s: &[u8]) -> bool {
    while let Some(&op) = s.first() {
        s = &s[1..];
        let len = match op {
            0x01..=0x4b => op as usize,
            OP_PUSHDATA1 => {
                let Some(&l) = s.first() else { return false };
                s = &s[1..];
                l as usize
            }
            OP_PUSHDATA2 => {
                if s.len() < 2 {
                    return false;
                }
                let l = u16::from_le_bytes([s[0], s[1]]) as usize;
                s = &s[2..];
                l
            }
            OP_PUSHDATA4 => {
                if s.len() < 4 {
                    return false;
                }
                let l = u32::from_le_bytes([s[0], s[1], s[2], s[3]]) as usize;
                s = &s[4..];
                l
            }
            OP_0 | OP_1NEGATE | OP_RESERVED | OP_1..=OP_16 => 0,
            _ => return false,
        };
        if s.len() < len {
            return false;
        }
        s = &s[len..];
    }
    true
}

/// Derives the address of a standard script locally. Mainnet encodings only.
pub fn derive_address(bytes: &[u8]) -> Option<String> {
    match classify_bytes(bytes) {
        ScriptType::P2PKH => Some(address::base58check_encode(P2PKH_VERSION, &bytes[3..23])),
        ScriptType::P2SH => Some(address::base58check_encode(P2SH_VERSION, &bytes[2..22])),
        ScriptType::P2WPKH | ScriptType::P2WSH => {
            Some(address::segwit_encode(MAINNET_HRP, 0, &bytes[2..]))
        }
        ScriptType::P2TR => Some(address::segwit_encode(MAINNET_HRP, 1, &bytes[2..])),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScriptIdKind {
    Address,
    Synthetic,
}

/// Node identity of a script: its address when one exists, otherwise the
/// compound `"{out_index}-{txid}"` of the output that created it.
///
/// Equality and hashing use the canonical string only.
#[derive(Debug, Clone)]
pub struct ScriptId {
    kind: ScriptIdKind,
    canonical: String,
}

impl ScriptId {
    pub fn address(addr: impl Into<String>) -> Self {
        ScriptId {
            kind: ScriptIdKind::Address,
            canonical: normalize_address(addr.into()),
        }
    }

    pub fn synthetic(out_index: u32, txid: &str) -> Self {
        ScriptId {
            kind: ScriptIdKind::Synthetic,
            canonical: format!("{out_index}-{txid}"),
        }
    }

    /// Recovers a ScriptId from its canonical string. Strings of the form
    /// `<digits>-<64 hex>` are synthetic; anything else is an address.
    pub fn parse(canonical: &str) -> Self {
        let synthetic = canonical.split_once('-').is_some_and(|(idx, txid)| {
            !idx.is_empty()
                && idx.bytes().all(|b| b.is_ascii_digit())
                && txid.len() == 64
                && txid.bytes().all(|b| b.is_ascii_hexdigit())
        });
        ScriptId {
            kind: if synthetic {
                ScriptIdKind::Synthetic
            } else {
                ScriptIdKind::Address
            },
            canonical: canonical.to_owned(),
        }
    }

    pub fn kind(&self) -> ScriptIdKind {
        self.kind
    }

    pub fn is_address(&self) -> bool {
        self.kind == ScriptIdKind::Address
    }

    pub fn as_str(&self) -> &str {
        &self.canonical
    }
}

impl PartialEq for ScriptId {
    fn eq(&self, other: &Self) -> bool {
        self.canonical == other.canonical
    }
}

impl Eq for ScriptId {}

impl Hash for ScriptId {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.canonical.hash(state);
    }
}

impl PartialOrd for ScriptId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ScriptId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.canonical.cmp(&other.canonical)
    }
}

impl fmt::Display for ScriptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical)
    }
}

// bech32 is case-insensitive; base58 is not.
fn normalize_address(addr: String) -> String {
    let lower = addr.to_ascii_lowercase();
    if ["bc1", "tb1", "bcrt1"].iter().any(|p| lower.starts_with(p)) {
        lower
    } else {
        addr
    }
}

/// Identity of the script locking output `out_index` of `txid`.
///
/// Node supplied address first, then local derivation, then the synthetic
/// fallback. Undecodable hex falls through to the synthetic id.
pub fn derive_script_id(script: &ScriptPubKey, out_index: u32, txid: &str) -> ScriptId {
    if let Some(addr) = script.address.as_deref().filter(|a| !a.is_empty()) {
        return ScriptId::address(addr);
    }
    if let Some(addr) = script.bytes().ok().as_deref().and_then(derive_address) {
        return ScriptId::address(addr);
    }
    ScriptId::synthetic(out_index, txid)
}
