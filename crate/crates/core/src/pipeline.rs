//! Parallel block-to-graph stage that keeps height order.

use rayon::prelude::*;
use thiserror::Error;

use crate::build::{build_block_graph, BuildError, ValueSplitConfig};
use crate::ingest::{BlockRecord, IngestError};
use crate::model::BlockGraph;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Build(#[from] BuildError),
}

/// Builds graphs for `blocks` on the rayon pool, `chunk` blocks at a time.
/// Output order follows input order; the first error ends the stream.
pub struct GraphStream<I> {
    blocks: I,
    cfg: ValueSplitConfig,
    chunk: usize,
    ready: std::vec::IntoIter<Result<BlockGraph, PipelineError>>,
    done: bool,
}

pub fn build_graphs<I>(blocks: I, cfg: ValueSplitConfig, chunk: usize) -> GraphStream<I::IntoIter>
where
    I: IntoIterator<Item = Result<BlockRecord, IngestError>>,
{
    GraphStream {
        blocks: blocks.into_iter(),
        cfg,
        chunk: chunk.max(1),
        ready: Vec::new().into_iter(),
        done: false,
    }
}

impl<I: Iterator<Item = Result<BlockRecord, IngestError>>> Iterator for GraphStream<I> {
    type Item = Result<BlockGraph, PipelineError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(item) = self.ready.next() {
                if item.is_err() {
                    self.done = true;
                    self.ready = Vec::new().into_iter();
                }
                return Some(item);
            }
            if self.done {
                return None;
            }
            let mut batch = Vec::with_capacity(self.chunk);
            let mut tail = None;
            for b in self.blocks.by_ref().take(self.chunk) {
                match b {
                    Ok(b) => batch.push(b),
                    Err(e) => {
                        tail = Some(Err(e.into()));
                        break;
                    }
                }
            }
            if batch.is_empty() && tail.is_none() {
                self.done = true;
                return None;
            }
            let cfg = &self.cfg;
            let mut built: Vec<_> = batch
                .par_iter()
                .map(|b| build_block_graph(b, cfg).map_err(PipelineError::from))
                .collect();
            built.extend(tail);
            self.ready = built.into_iter();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_chain, SynthParams};

    #[test]
    fn preserves_order_and_stops_at_error() {
        let blocks = synth_chain(SynthParams::default(), 30);
        let mut input: Vec<Result<BlockRecord, IngestError>> = blocks.into_iter().map(Ok).collect();
        input[25] = Err(IngestError::MissingBlock(25));
        let out: Vec<_> = build_graphs(input, ValueSplitConfig::default(), 4).collect();
        assert_eq!(out.len(), 26);
        for (h, g) in out[..25].iter().enumerate() {
            assert_eq!(g.as_ref().unwrap().height, h as u64);
        }
        assert!(matches!(out[25], Err(PipelineError::Ingest(IngestError::MissingBlock(25)))));
    }
}
