//! Per-block statistics and structural summaries.

mod addr_index;
mod degree;

use std::collections::{BTreeMap, HashSet};
use std::io::{self, Write};
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::amount::Amount;
use crate::build::{block_subsidy, minted_coins, residual, BuildError};
use crate::ingest::{BlockRecord, IngestError};
use crate::script::{classify_script, ScriptPubKey, ScriptType};
use crate::tsv::TsvError;

pub use addr_index::{AddrIndex, DEFAULT_MEM_KEYS};
pub use degree::{
    degree_bin, degree_summary, degrees_of, direction_stats, histogram_tsv, summarize_degrees,
    DegreeSummary, DirectionStats, EntropyMode, DEGREE_BIN,
};

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("address index expects height {expected}, got {found}")]
    Sequencing { expected: u64, found: u64 },
    #[error("block {height} claims {claimed} but only {available} is available")]
    Overclaim {
        height: u64,
        claimed: Amount,
        available: Amount,
    },
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Tsv(#[from] TsvError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("address index: {0}")]
    Index(String),
    #[error("empty input")]
    EmptyInput,
}

impl ProfileError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> ProfileError {
        let path = path.into();
        move |source| ProfileError::Io { path, source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountStats {
    pub min: u64,
    pub max: u64,
    pub avg: f64,
    pub sum: u64,
}

impl CountStats {
    pub fn of(values: &[u64]) -> Option<CountStats> {
        let (&min, &max) = (values.iter().min()?, values.iter().max()?);
        let sum: u64 = values.iter().sum();
        Some(CountStats {
            min,
            max,
            avg: sum as f64 / values.len() as f64,
            sum,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgeStats {
    pub count: u64,
    pub avg: f64,
    pub median: f64,
    pub min: u64,
    pub max: u64,
}

impl AgeStats {
    pub fn of(ages: &[u64]) -> Option<AgeStats> {
        if ages.is_empty() {
            return None;
        }
        let mut s = ages.to_vec();
        s.sort_unstable();
        let n = s.len();
        let median = if n % 2 == 1 {
            s[n / 2] as f64
        } else {
            (s[n / 2 - 1] as f64 + s[n / 2] as f64) / 2.0
        };
        Some(AgeStats {
            count: n as u64,
            avg: s.iter().sum::<u64>() as f64 / n as f64,
            median,
            min: s[0],
            max: s[n - 1],
        })
    }
}

/// Spend ages of a block's inputs, in blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Dormancy {
    pub all: Option<AgeStats>,
    /// Only inputs spending coinbase outputs.
    pub minted: Option<AgeStats>,
}

pub fn coin_dormancy(b: &BlockRecord) -> Dormancy {
    let mut all = Vec::new();
    let mut minted = Vec::new();
    for p in b.txs.iter().flat_map(|t| t.spends()) {
        let age = b.height.saturating_sub(p.height);
        all.push(age);
        if p.generated {
            minted.push(age);
        }
    }
    Dormancy {
        all: AgeStats::of(&all),
        minted: AgeStats::of(&minted),
    }
}

/// Subsidy plus fees not claimed by the coinbase.
pub fn unclaimed_reward(b: &BlockRecord) -> Result<Amount, ProfileError> {
    let available = block_subsidy(b.height)
        .checked_add(b.fee_total())
        .ok_or(BuildError::Overflow)?;
    let claimed = b.claimed_reward();
    available.checked_sub(claimed).ok_or(ProfileError::Overclaim {
        height: b.height,
        claimed,
        available,
    })
}

/// Median of the given block times; pass the last 11 (or all available).
pub fn median_time_past(times: &[i64]) -> Result<i64, ProfileError> {
    if times.is_empty() {
        return Err(ProfileError::EmptyInput);
    }
    let mut s = times.to_vec();
    s.sort_unstable();
    Ok(s[s.len() / 2])
}

/// Trailing-window mean; the first `window - 1` entries average the prefix.
pub fn rolling_mean(series: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for i in 0..series.len() {
        // Recompute periodically so subtraction drift stays bounded.
        if i % window == 0 && i >= window {
            sum = series[i + 1 - window..i].iter().sum();
        } else if i >= window {
            sum -= series[i - window];
        }
        sum += series[i];
        let n = (i + 1).min(window);
        out.push(sum / n as f64);
    }
    out
}

/// Pearson correlation via a single pass of co-moment updates.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, (&a, &b)) in x.iter().zip(y).enumerate() {
        let n = (i + 1) as f64;
        let dx = a - mx;
        let dy = b - my;
        mx += dx / n;
        my += dy / n;
        sxx += dx * (a - mx);
        syy += dy * (b - my);
        sxy += dx * (b - my);
    }
    let denom = (sxx * syy).sqrt();
    (denom > 0.0).then(|| sxy / denom)
}

fn script_type(s: &ScriptPubKey) -> ScriptType {
    classify_script(s).unwrap_or(ScriptType::NonStandard)
}

/// Per-block script type fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptShare {
    pub height: u64,
    /// Over output scripts only.
    pub outputs: BTreeMap<ScriptType, f64>,
    /// Over output scripts and the prevout scripts spent by inputs.
    pub inputs_and_outputs: BTreeMap<ScriptType, f64>,
}

fn normalize(counts: &BTreeMap<ScriptType, u64>) -> BTreeMap<ScriptType, f64> {
    let total: u64 = counts.values().sum();
    counts
        .iter()
        .map(|(&t, &c)| (t, if total == 0 { 0.0 } else { c as f64 / total as f64 }))
        .collect()
}

pub fn script_type_share(b: &BlockRecord) -> ScriptShare {
    let mut outs: BTreeMap<ScriptType, u64> = BTreeMap::new();
    for o in b.txs.iter().flat_map(|t| &t.vout) {
        *outs.entry(script_type(&o.script)).or_default() += 1;
    }
    let mut both = outs.clone();
    for p in b.txs.iter().flat_map(|t| t.spends()) {
        *both.entry(script_type(&p.script)).or_default() += 1;
    }
    ScriptShare {
        height: b.height,
        outputs: normalize(&outs),
        inputs_and_outputs: normalize(&both),
    }
}

/// Counts of positive per-transaction residuals by size.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ResidualBuckets {
    /// `0 < x <= 1e-8` BTC.
    pub up_to_one_sat: u64,
    /// `1e-8 < x <= 1` BTC.
    pub up_to_one_btc: u64,
    /// `x > 1` BTC.
    pub above_one_btc: u64,
}

impl ResidualBuckets {
    pub fn add(&mut self, x: Amount) {
        match x.to_sat() {
            0 => {}
            1 => self.up_to_one_sat += 1,
            v if v <= crate::amount::COIN => self.up_to_one_btc += 1,
            _ => self.above_one_btc += 1,
        }
    }

    fn merge(&mut self, o: &ResidualBuckets) {
        self.up_to_one_sat += o.up_to_one_sat;
        self.up_to_one_btc += o.up_to_one_btc;
        self.above_one_btc += o.above_one_btc;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockResidual {
    pub height: u64,
    pub total: Amount,
    /// Transactions with a positive residual.
    pub txs: Vec<(String, Amount)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResidualScan {
    /// Blocks with a positive residual total.
    pub flagged: Vec<BlockResidual>,
    pub total: Amount,
    pub buckets: ResidualBuckets,
}

pub fn block_residual(b: &BlockRecord) -> Result<BlockResidual, ProfileError> {
    let mut txs = Vec::new();
    let mut total = Amount::ZERO;
    for t in b.txs.iter().filter(|t| !t.is_coinbase()) {
        let r = residual(t)?;
        if r > Amount::ZERO {
            total = total.checked_add(r).ok_or(BuildError::Overflow)?;
            txs.push((t.txid.clone(), r));
        }
    }
    Ok(BlockResidual {
        height: b.height,
        total,
        txs,
    })
}

pub fn residual_scan<'a>(blocks: impl IntoIterator<Item = &'a BlockRecord>) -> Result<ResidualScan, ProfileError> {
    let mut scan = ResidualScan::default();
    for b in blocks {
        let r = block_residual(b)?;
        for (_, x) in &r.txs {
            scan.buckets.add(*x);
        }
        if r.total > Amount::ZERO {
            scan.total = scan.total.checked_add(r.total).ok_or(BuildError::Overflow)?;
            scan.flagged.push(r);
        }
    }
    Ok(scan)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockStats {
    pub height: u64,
    pub tx_count: u64,
    pub is_empty: bool,
    /// Over non-coinbase transactions; `None` for empty blocks.
    pub txin_count: Option<CountStats>,
    pub txout_count: Option<CountStats>,
    pub txin_value: Option<CountStats>,
    pub txout_value: Option<CountStats>,
    pub addr_total: u64,
    pub addr_unique: u64,
    pub addr_new: u64,
    /// Over output scripts and spent prevout scripts.
    pub script_type_counts: BTreeMap<ScriptType, u64>,
    pub fee_total: Amount,
    pub minted: Amount,
    pub unclaimed: Amount,
    pub residual_total: Amount,
    pub residual_buckets: ResidualBuckets,
    pub dormancy: Dormancy,
}

/// Stats with `addr_new` left at zero, plus the block's script identities.
fn partial_stats(b: &BlockRecord) -> Result<(BlockStats, Vec<String>), ProfileError> {
    let transfers: Vec<_> = b.txs.iter().filter(|t| !t.is_coinbase()).collect();
    let counts = |f: &dyn Fn(&crate::ingest::TxRecord) -> u64| -> Option<CountStats> {
        CountStats::of(&transfers.iter().map(|t| f(t)).collect::<Vec<_>>())
    };
    let mut keys = Vec::new();
    let mut script_type_counts = BTreeMap::new();
    for t in &b.txs {
        for o in &t.vout {
            keys.push(o.script_id(&t.txid).as_str().to_owned());
            *script_type_counts.entry(script_type(&o.script)).or_default() += 1;
        }
        for p in t.spends() {
            keys.push(p.script_id().as_str().to_owned());
            *script_type_counts.entry(script_type(&p.script)).or_default() += 1;
        }
    }
    let unique: HashSet<&str> = keys.iter().map(String::as_str).collect();
    let res = block_residual(b)?;
    let mut residual_buckets = ResidualBuckets::default();
    for (_, x) in &res.txs {
        residual_buckets.add(*x);
    }
    let stats = BlockStats {
        height: b.height,
        tx_count: b.txs.len() as u64,
        is_empty: b.txs.len() == 1,
        txin_count: counts(&|t| t.vin.len() as u64),
        txout_count: counts(&|t| t.vout.len() as u64),
        txin_value: counts(&|t| t.input_total().to_sat()),
        txout_value: counts(&|t| t.output_total().to_sat()),
        addr_total: keys.len() as u64,
        addr_unique: unique.len() as u64,
        addr_new: 0,
        script_type_counts,
        fee_total: b.fee_total(),
        minted: minted_coins(b),
        unclaimed: unclaimed_reward(b)?,
        residual_total: res.total,
        residual_buckets,
        dormancy: coin_dormancy(b),
    };
    Ok((stats, keys))
}

/// Stats of `b`; `index` must expect `b.height` and records the block's
/// script identities.
pub fn per_block_stats(b: &BlockRecord, index: &mut AddrIndex) -> Result<BlockStats, ProfileError> {
    if index.next_height() != b.height {
        return Err(ProfileError::Sequencing {
            expected: index.next_height(),
            found: b.height,
        });
    }
    let (mut s, keys) = partial_stats(b)?;
    s.addr_new = index.observe(b.height, keys.iter().map(String::as_str))?;
    Ok(s)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ProfileSummary {
    pub blocks: u64,
    pub first_height: Option<u64>,
    pub last_height: Option<u64>,
    pub empty_blocks: u64,
    pub tx_count: u64,
    pub fee_total_sat: u64,
    pub minted_sat: u64,
    pub unclaimed_sat: u64,
    pub residual_total_sat: u64,
    pub residual_blocks: u64,
    pub residual_buckets: ResidualBuckets,
    pub addr_new_total: u64,
}

impl ProfileSummary {
    fn add(&mut self, s: &BlockStats) {
        self.blocks += 1;
        self.first_height.get_or_insert(s.height);
        self.last_height = Some(s.height);
        self.empty_blocks += s.is_empty as u64;
        self.tx_count += s.tx_count;
        self.fee_total_sat += s.fee_total.to_sat();
        self.minted_sat += s.minted.to_sat();
        self.unclaimed_sat += s.unclaimed.to_sat();
        self.residual_total_sat += s.residual_total.to_sat();
        self.residual_blocks += (s.residual_total > Amount::ZERO) as u64;
        self.residual_buckets.merge(&s.residual_buckets);
        self.addr_new_total += s.addr_new;
    }
}

/// Profiles an ascending block stream. Per-block work runs in parallel over
/// chunks of `chunk` blocks; address novelty is then resolved in height
/// order. `sink` receives every row.
pub fn profile_blocks<E>(
    blocks: impl IntoIterator<Item = Result<BlockRecord, E>>,
    index: &mut AddrIndex,
    chunk: usize,
    mut sink: impl FnMut(&BlockStats) -> Result<(), ProfileError>,
) -> Result<ProfileSummary, ProfileError>
where
    ProfileError: From<E>,
{
    let mut summary = ProfileSummary::default();
    let mut it = blocks.into_iter();
    let chunk = chunk.max(1);
    loop {
        let mut buf = Vec::with_capacity(chunk);
        for b in it.by_ref().take(chunk) {
            buf.push(b?);
        }
        if buf.is_empty() {
            break;
        }
        let partial: Vec<_> = buf.par_iter().map(partial_stats).collect();
        for r in partial {
            let (mut s, keys) = r?;
            s.addr_new = index.observe(s.height, keys.iter().map(String::as_str))?;
            summary.add(&s);
            sink(&s)?;
        }
    }
    index.flush()?;
    Ok(summary)
}

pub fn stats_header() -> String {
    let mut cols: Vec<String> = ["height", "tx_count", "is_empty"].map(String::from).to_vec();
    for group in ["txin_count", "txout_count", "txin_value_sat", "txout_value_sat"] {
        for f in ["min", "max", "avg", "sum"] {
            cols.push(format!("{group}_{f}"));
        }
    }
    cols.extend(
        [
            "addr_total",
            "addr_unique",
            "addr_new",
            "fee_total_sat",
            "minted_sat",
            "unclaimed_sat",
            "residual_total_sat",
        ]
        .map(String::from),
    );
    for group in ["dormancy", "minted_dormancy"] {
        for f in ["avg", "median", "min", "max"] {
            cols.push(format!("{group}_{f}"));
        }
    }
    cols.extend(ScriptType::ALL.iter().map(|t| format!("scripts_{t}")));
    cols.join("\t")
}

fn count_cols(out: &mut Vec<String>, c: &Option<CountStats>) {
    match c {
        Some(c) => out.extend([c.min.to_string(), c.max.to_string(), c.avg.to_string(), c.sum.to_string()]),
        None => out.extend(std::iter::repeat_n(String::new(), 4)),
    }
}

fn age_cols(out: &mut Vec<String>, a: &Option<AgeStats>) {
    match a {
        Some(a) => out.extend([a.avg.to_string(), a.median.to_string(), a.min.to_string(), a.max.to_string()]),
        None => out.extend(std::iter::repeat_n(String::new(), 4)),
    }
}

/// One TSV row matching [`stats_header`]; empty fields mark undefined stats.
pub fn stats_row(s: &BlockStats) -> String {
    let mut c = vec![s.height.to_string(), s.tx_count.to_string(), s.is_empty.to_string()];
    for g in [&s.txin_count, &s.txout_count, &s.txin_value, &s.txout_value] {
        count_cols(&mut c, g);
    }
    c.extend([
        s.addr_total.to_string(),
        s.addr_unique.to_string(),
        s.addr_new.to_string(),
        s.fee_total.to_sat().to_string(),
        s.minted.to_sat().to_string(),
        s.unclaimed.to_sat().to_string(),
        s.residual_total.to_sat().to_string(),
    ]);
    age_cols(&mut c, &s.dormancy.all);
    age_cols(&mut c, &s.dormancy.minted);
    c.extend(ScriptType::ALL.iter().map(|t| s.script_type_counts.get(t).copied().unwrap_or(0).to_string()));
    c.join("\t")
}

pub fn write_stats_header(w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "{}", stats_header())
}
