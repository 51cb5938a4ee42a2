//! Flat key-value settings: defaults, then a config file, then
//! `TXGRAPH_*` environment variables, then command-line flags.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use txgraph::build::ValueSplitConfig;
use txgraph::ingest::{RestConfig, SourceConfig};
use txgraph::model::{EdgeType, NodeKind};
use txgraph::profile::EntropyMode;
use txgraph::sampler::{Method, SamplerConfig, TypeFilter};
use txgraph::tsv::BatchLayout;

use crate::error::CliError;

pub const ENV_PREFIX: &str = "TXGRAPH_";

pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default, help }
}

pub const KEYS: &[Key] = &[
    key("source", "", "fixture directory of {height}.json files, or an http(s) REST endpoint"),
    key("from", "0", "first height (append: defaults to the manifest tip + 1)"),
    key("to", "", "last height, inclusive"),
    key("out", "graph", "graph output directory holding manifest.json"),
    key("batch_size", "10000", "heights per batch"),
    key("compression", "none", "none | gzip"),
    key("dedup", "true", "deduplicate node files after build and append"),
    key("memory_budget", "268435456", "dedup memory budget in bytes"),
    key("parallelism", "0", "worker threads; 0 uses all logical cores"),
    key("chunk", "64", "blocks handed to the worker pool at a time"),
    key("transfer_denominator", "as-printed", "as-printed | conserving"),
    key("max_inout", "20", "exclude txs with more than this many inputs and outputs"),
    key("skip_zero_value", "true", "exclude txs whose outputs are all zero"),
    key("aggregate_inputs", "false", "merge repeated input scripts before splitting"),
    key("rest.timeout_secs", "30", "per-request timeout"),
    key("rest.prefetch", "4", "heights fetched ahead"),
    key("rest.retries", "2", "retries after a transport error"),
    key("sample.out", "samples", "subgraph output directory"),
    key("sample.edge_list", "", "sample from this edge file instead of the graph manifest"),
    key("sample.method", "forest-fire", "bfs | dfs | forest-fire"),
    key("sample.count", "100", "number of random roots when sample.roots is empty"),
    key("sample.roots", "", "comma-separated Kind:id roots"),
    key("sample.seed", "0", "root selection and sampling seed"),
    key("sample.h_max", "3", "hop limit"),
    key("sample.n", "10", "forest fire neighbor budget at hop 0"),
    key("sample.delta", "0", "forest fire budget decrease per hop"),
    key("sample.direction", "both", "out | in | both"),
    key("sample.min_nodes", "1", "reject smaller samples"),
    key("sample.max_nodes", "0", "node cap; 0 is unlimited"),
    key("sample.min_edges", "0", "reject samples with fewer edges"),
    key("sample.max_edges", "0", "edge cap; 0 is unlimited"),
    key("sample.node_whitelist", "", "comma-separated node labels to keep"),
    key("sample.node_blacklist", "", "comma-separated node labels to drop"),
    key("sample.edge_whitelist", "", "comma-separated edge types to keep"),
    key("sample.edge_blacklist", "", "comma-separated edge types to drop"),
    key("sample.stop_on_nodes", "", "stop sampling after adding a node of these labels"),
    key("sample.stop_on_edges", "", "stop sampling after adding an edge of these types"),
    key("profile.out", "profile", "profiler output directory"),
    key("profile.addr_index", "", "first-seen address index directory; default <profile.out>/addr_index"),
    key("profile.resume", "false", "keep an existing address index instead of starting fresh"),
    key("profile.window", "5000", "rolling mean window in blocks"),
    key("profile.entropy", "distinct-values", "distinct-values | per-node"),
    key("profile.degrees", "true", "summarize degrees of the graph in `out` if present"),
];

pub fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.to_ascii_uppercase().replace(['.', '-'], "_"))
}

pub fn flag_name(key: &str) -> String {
    key.replace(['.', '_'], "-")
}

#[derive(Debug, Clone)]
pub struct Settings {
    values: BTreeMap<String, String>,
    explicit: HashSet<String>,
}

fn known(k: &str) -> bool {
    KEYS.iter().any(|key| key.name == k)
}

impl Settings {
    pub fn defaults() -> Settings {
        Settings {
            values: KEYS.iter().map(|k| (k.name.to_owned(), k.default.to_owned())).collect(),
            explicit: HashSet::new(),
        }
    }

    pub fn set(&mut self, k: &str, v: &str) -> Result<(), CliError> {
        if !known(k) {
            return Err(CliError::Config(format!("unknown setting {k:?}")));
        }
        self.values.insert(k.to_owned(), v.trim().to_owned());
        self.explicit.insert(k.to_owned());
        Ok(())
    }

    /// `key = value` lines; `#` starts a comment line.
    pub fn merge_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{}:{}: expected key = value", path.display(), i + 1)))?;
            self.set(k.trim(), v)
                .map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), i + 1)))?;
        }
        Ok(())
    }

    pub fn merge_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), CliError> {
        let by_env: BTreeMap<String, &str> = KEYS.iter().map(|k| (env_name(k.name), k.name)).collect();
        for (name, v) in vars {
            if let Some(k) = by_env.get(&name) {
                self.set(k, &v)?;
            }
        }
        Ok(())
    }

    pub fn get(&self, k: &str) -> &str {
        self.values.get(k).map(String::as_str).unwrap_or_else(|| panic!("unregistered key {k}"))
    }

    pub fn is_explicit(&self, k: &str) -> bool {
        self.explicit.contains(k)
    }

    pub fn parse<T: FromStr>(&self, k: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.get(k);
        v.parse().map_err(|e| CliError::Config(format!("{k} = {v:?}: {e}")))
    }

    pub fn bool(&self, k: &str) -> Result<bool, CliError> {
        match self.get(k) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            v => Err(CliError::Config(format!("{k} = {v:?}: expected true or false"))),
        }
    }

    pub fn path(&self, k: &str) -> PathBuf {
        PathBuf::from(self.get(k))
    }

    pub fn required(&self, k: &str) -> Result<&str, CliError> {
        let v = self.get(k);
        if v.is_empty() {
            return Err(CliError::Config(format!("{k} is required")));
        }
        Ok(v)
    }

    fn list<T: FromStr<Err = String> + Ord>(&self, k: &str) -> Result<BTreeSet<T>, CliError> {
        self.get(k)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e: String| CliError::Config(format!("{k}: {e}"))))
            .collect()
    }

    pub fn dump(&self) -> String {
        let mut out = format!("# environment overrides use {ENV_PREFIX}<KEY>, dots as underscores\n");
        for k in KEYS {
            out.push_str(&format!("# {}\n{} = {}\n", k.help, k.name, self.get(k.name)));
        }
        out
    }

    pub fn source(&self) -> Result<SourceConfig, CliError> {
        let s = self.required("source")?;
        if s.starts_with("http://") || s.starts_with("https://") {
            Ok(SourceConfig::Rest(RestConfig {
                endpoint: s.to_owned(),
                timeout: Duration::from_secs(self.parse("rest.timeout_secs")?),
                prefetch: self.parse("rest.prefetch")?,
                retries: self.parse("rest.retries")?,
            }))
        } else {
            Ok(SourceConfig::Fixtures(PathBuf::from(s)))
        }
    }

    pub fn to_height(&self) -> Result<u64, CliError> {
        self.required("to")?;
        self.parse("to")
    }

    pub fn split_config(&self) -> Result<ValueSplitConfig, CliError> {
        let cfg = ValueSplitConfig {
            transfer_denominator_mode: self.parse("transfer_denominator")?,
            max_inout_threshold: self.parse("max_inout")?,
            skip_zero_value: self.bool("skip_zero_value")?,
            aggregate_tx_inputs: self.bool("aggregate_inputs")?,
        };
        cfg.validate().map_err(CliError::Config)?;
        Ok(cfg)
    }

    pub fn layout(&self) -> Result<BatchLayout, CliError> {
        Ok(BatchLayout {
            out_dir: self.path("out"),
            batch_size: self.parse("batch_size")?,
            compression: self.parse("compression")?,
        })
    }

    pub fn sampler(&self) -> Result<(Method, SamplerConfig), CliError> {
        let node_filter = filter(self.list::<NodeKind>("sample.node_whitelist")?, self.list("sample.node_blacklist")?)?;
        let edge_filter = filter(self.list::<EdgeType>("sample.edge_whitelist")?, self.list("sample.edge_blacklist")?)?;
        let cap = |k: &str| -> Result<usize, CliError> {
            let v: usize = self.parse(k)?;
            Ok(if v == 0 { usize::MAX } else { v })
        };
        let cfg = SamplerConfig {
            h_max: self.parse("sample.h_max")?,
            n: self.parse("sample.n")?,
            delta: self.parse("sample.delta")?,
            node_type_filter: node_filter,
            edge_type_filter: edge_filter,
            stop_on_nodes: self.list("sample.stop_on_nodes")?.into_iter().collect(),
            stop_on_edges: self.list("sample.stop_on_edges")?.into_iter().collect(),
            direction: self.parse("sample.direction")?,
            min_nodes: self.parse("sample.min_nodes")?,
            max_nodes: cap("sample.max_nodes")?,
            min_edges: self.parse("sample.min_edges")?,
            max_edges: cap("sample.max_edges")?,
            rng_seed: self.parse("sample.seed")?,
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok((self.parse("sample.method")?, cfg))
    }

    pub fn entropy_mode(&self) -> Result<EntropyMode, CliError> {
        self.parse("profile.entropy")
    }

    /// Settings that shape the graph files, recorded in the manifest.
    pub fn build_params(&self) -> BTreeMap<String, String> {
        [
            "source",
            "transfer_denominator",
            "max_inout",
            "skip_zero_value",
            "aggregate_inputs",
        ]
        .iter()
        .map(|k| (k.to_string(), self.get(k).to_owned()))
        .collect()
    }
}

fn filter<T: std::hash::Hash + Eq + Ord>(white: BTreeSet<T>, black: BTreeSet<T>) -> Result<TypeFilter<T>, CliError> {
    match (white.is_empty(), black.is_empty()) {
        (false, false) => Err(CliError::Config("give a whitelist or a blacklist, not both".into())),
        (false, true) => Ok(TypeFilter::Whitelist(white.into_iter().collect())),
        _ => Ok(TypeFilter::Blacklist(black.into_iter().collect())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layering() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("run.conf");
        std::fs::write(&f, "# comment\nbatch_size = 50\nsample.h_max=2\n").unwrap();
        let mut s = Settings::defaults();
        s.merge_file(&f).unwrap();
        assert_eq!(s.get("batch_size"), "50");
        s.merge_env([(env_name("batch_size"), "70".to_owned()), ("OTHER".into(), "x".into())]).unwrap();
        assert_eq!(s.get("batch_size"), "70");
        assert_eq!(env_name("sample.h_max"), "TXGRAPH_SAMPLE_H_MAX");
        s.set("batch_size", "90").unwrap();
        assert_eq!(s.parse::<u64>("batch_size").unwrap(), 90);
        assert_eq!(s.get("sample.h_max"), "2");
        assert!(s.set("nope", "1").is_err());
        std::fs::write(&f, "garbage\n").unwrap();
        assert!(Settings::defaults().merge_file(&f).is_err());
    }

    #[test]
    fn dump_lists_every_key() {
        let d = Settings::defaults().dump();
        for k in KEYS {
            assert!(d.contains(&format!("\n{} = {}\n", k.name, k.default)), "{}", k.name);
        }
    }

    #[test]
    fn sampler_filters() {
        let mut s = Settings::defaults();
        s.set("sample.node_blacklist", "Tx, Block").unwrap();
        let (_, c) = s.sampler().unwrap();
        assert!(!c.node_type_filter.allows(&NodeKind::Tx));
        assert!(c.node_type_filter.allows(&NodeKind::Script));
        assert_eq!(c.max_nodes, usize::MAX);
        s.set("sample.node_whitelist", "Script").unwrap();
        assert!(s.sampler().is_err());
    }
}
