use std::collections::VecDeque;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::sync::mpsc::{self, Receiver};
use std::thread;

use super::{parse_block_json, BlockRecord, IngestError, RestClient, SourceConfig};

enum Backend {
    Fixtures(PathBuf),
    Rest {
        client: RestClient,
        window: usize,
        pending: VecDeque<(u64, Receiver<Result<BlockRecord, IngestError>>)>,
        next_fetch: u64,
    },
}

/// Height-ordered stream of blocks over an inclusive range.
///
/// REST mode keeps up to `prefetch` requests in flight; records are still
/// yielded strictly in height order. The stream ends after the first error.
pub struct BlockStream {
    backend: Backend,
    next: u64,
    hi: u64,
    failed: bool,
}

/// Streams blocks `lo..=hi` from `source`.
pub fn iter_blocks(lo: u64, hi: u64, source: &SourceConfig) -> Result<BlockStream, IngestError> {
    if lo > hi {
        return Err(IngestError::EmptyRange { lo, hi });
    }
    let backend = match source {
        SourceConfig::Fixtures(dir) => Backend::Fixtures(dir.clone()),
        SourceConfig::Rest(cfg) => Backend::Rest {
            client: RestClient::new(cfg),
            window: cfg.prefetch.max(1),
            pending: VecDeque::new(),
            next_fetch: lo,
        },
    };
    Ok(BlockStream {
        backend,
        next: lo,
        hi,
        failed: false,
    })
}

pub(crate) fn read_fixture(dir: &Path, height: u64) -> Result<BlockRecord, IngestError> {
    let path = dir.join(format!("{height}.json"));
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == ErrorKind::NotFound => return Err(IngestError::MissingBlock(height)),
        Err(source) => return Err(IngestError::Io { path, source }),
    };
    let block = parse_block_json(&bytes)?;
    if block.height != height {
        return Err(IngestError::Schema(format!(
            "{} holds height {}",
            path.display(),
            block.height
        )));
    }
    Ok(block)
}

impl BlockStream {
    fn fetch_next(&mut self) -> Result<BlockRecord, IngestError> {
        let height = self.next;
        match &mut self.backend {
            Backend::Fixtures(dir) => read_fixture(dir, height),
            Backend::Rest {
                client,
                window,
                pending,
                next_fetch,
            } => {
                while pending.len() < *window && *next_fetch <= self.hi {
                    let (tx, rx) = mpsc::channel();
                    let c = client.clone();
                    let h = *next_fetch;
                    thread::spawn(move || {
                        let _ = tx.send(c.get_block_at(h));
                    });
                    pending.push_back((h, rx));
                    *next_fetch += 1;
                }
                let (h, rx) = pending.pop_front().expect("prefetch window never empty here");
                debug_assert_eq!(h, height);
                rx.recv().unwrap_or_else(|_| {
                    Err(IngestError::Transport {
                        url: format!("height {h}"),
                        message: "fetch worker exited".into(),
                    })
                })
            }
        }
    }
}

impl Iterator for BlockStream {
    type Item = Result<BlockRecord, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.next > self.hi {
            return None;
        }
        let item = self.fetch_next();
        match &item {
            Ok(_) => self.next += 1,
            Err(_) => self.failed = true,
        }
        Some(item)
    }
}
