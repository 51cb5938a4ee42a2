//! External merge sort deduplication of node rows.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Lines, Write};
use std::iter::Peekable;
use std::path::{Path, PathBuf};

use super::format::{node_header, node_key, same_properties};
use super::io::{open_lines, read_verified, RowWriter};
use super::manifest::{DedupGeneration, FileEntry, FileKind, Manifest};
use super::TsvError;
use crate::model::NodeKind;

pub const DEFAULT_MEMORY_BUDGET: usize = 256 << 20;

const READ_BUF: usize = 64 * 1024;
// Bookkeeping per buffered row beyond its text: the String header in the
// Vec, growth slack and the merge-sort scratch buffer.
const ROW_OVERHEAD: usize = 64;

fn cmp_rows(a: &str, b: &str) -> Ordering {
    let (ia, ha) = node_key(a);
    let (ib, hb) = node_key(b);
    ia.cmp(ib).then(ha.cmp(&hb))
}

struct Runs {
    dir: PathBuf,
    files: Vec<PathBuf>,
    next_id: usize,
}

impl Runs {
    fn spill(&mut self, rows: &mut Vec<String>) -> Result<(), TsvError> {
        if rows.is_empty() {
            return Ok(());
        }
        rows.sort_by(|a, b| cmp_rows(a, b));
        let path = self.dir.join(format!("run{:06}", self.next_id));
        self.next_id += 1;
        let file = File::create(&path).map_err(TsvError::io(&path))?;
        let mut w = BufWriter::with_capacity(READ_BUF, file);
        for r in rows.drain(..) {
            w.write_all(r.as_bytes())
                .and_then(|_| w.write_all(b"\n"))
                .map_err(TsvError::io(&path))?;
        }
        w.flush().map_err(TsvError::io(&path))?;
        rows.shrink_to(0);
        self.files.push(path);
        Ok(())
    }
}

struct Head {
    line: String,
    run: usize,
}

impl PartialEq for Head {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Head {}
impl PartialOrd for Head {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Head {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_rows(&self.line, &other.line).then(self.run.cmp(&other.run))
    }
}

/// K-way merge over sorted run files; ties resolve to the earlier run.
struct Merge {
    readers: Vec<Lines<BufReader<File>>>,
    heap: BinaryHeap<Reverse<Head>>,
    failed: Option<TsvError>,
    paths: Vec<PathBuf>,
}

impl Merge {
    fn open(paths: &[PathBuf]) -> Result<Merge, TsvError> {
        let mut m = Merge {
            readers: Vec::with_capacity(paths.len()),
            heap: BinaryHeap::with_capacity(paths.len()),
            failed: None,
            paths: paths.to_vec(),
        };
        for (run, p) in paths.iter().enumerate() {
            let f = File::open(p).map_err(TsvError::io(p))?;
            m.readers.push(BufReader::with_capacity(READ_BUF, f).lines());
            m.refill(run);
        }
        Ok(m)
    }

    fn refill(&mut self, run: usize) {
        match self.readers[run].next() {
            Some(Ok(line)) => self.heap.push(Reverse(Head { line, run })),
            Some(Err(e)) => self.failed = Some(TsvError::Io { path: self.paths[run].clone(), source: e }),
            None => {}
        }
    }
}

impl Iterator for Merge {
    type Item = Result<String, TsvError>;

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(e) = self.failed.take() {
            return Some(Err(e));
        }
        let Reverse(head) = self.heap.pop()?;
        self.refill(head.run);
        Some(Ok(head.line))
    }
}

fn fan_in(budget: usize) -> usize {
    (budget / 2 / (2 * READ_BUF)).clamp(2, 256)
}

/// Sorted run files for every row of `inputs`, merged down to at most `fan_in` runs.
fn sorted_runs(
    root: &Path,
    inputs: &[&FileEntry],
    budget: usize,
    tmp: &Path,
) -> Result<Vec<PathBuf>, TsvError> {
    let mut runs = Runs {
        dir: tmp.to_owned(),
        files: Vec::new(),
        next_id: 0,
    };
    let chunk = (budget / 2).max(1 << 16);
    let mut buf: Vec<String> = Vec::new();
    let mut used = 0usize;
    for entry in inputs {
        read_verified(root, entry, |_, line| {
            used += line.len() + ROW_OVERHEAD;
            buf.push(line.to_owned());
            if used >= chunk {
                used = 0;
                runs.spill(&mut buf)?;
            }
            Ok(())
        })?;
    }
    runs.spill(&mut buf)?;
    drop(buf);
    let width = fan_in(budget);
    while runs.files.len() > width {
        let current = std::mem::take(&mut runs.files);
        for group in current.chunks(width) {
            let path = tmp.join(format!("run{:06}", runs.next_id));
            runs.next_id += 1;
            let file = File::create(&path).map_err(TsvError::io(&path))?;
            let mut w = BufWriter::with_capacity(READ_BUF, file);
            for line in Merge::open(group)? {
                let line = line?;
                w.write_all(line.as_bytes())
                    .and_then(|_| w.write_all(b"\n"))
                    .map_err(TsvError::io(&path))?;
            }
            w.flush().map_err(TsvError::io(&path))?;
            for p in group {
                let _ = fs::remove_file(p);
            }
            runs.files.push(path);
        }
    }
    Ok(runs.files)
}

type PriorLines = Peekable<Box<dyn Iterator<Item = std::io::Result<String>>>>;

/// Whether `id` already appears in one of the sorted prior generation files.
fn seen_before(prior: &mut [PriorLines], id: &str) -> bool {
    let mut hit = false;
    for cursor in prior.iter_mut() {
        loop {
            let ord = match cursor.peek() {
                Some(Ok(line)) => node_key(line).0.cmp(id),
                _ => break,
            };
            match ord {
                Ordering::Less => {
                    cursor.next();
                }
                Ordering::Equal => {
                    hit = true;
                    break;
                }
                Ordering::Greater => break,
            }
        }
    }
    hit
}

/// Deduplicates node rows of every segment not yet covered by a dedup
/// generation, keeping the lowest-height row per ID. IDs emitted by an
/// earlier generation are not repeated. Rows sharing an ID but differing in
/// properties are listed in a conflicts file. No-op when nothing is new.
pub fn dedup_nodes(manifest: &Manifest, memory_budget: usize) -> Result<Manifest, TsvError> {
    let from = manifest.deduped_through().map_or(0, |h| h + 1);
    let segments: Vec<_> = manifest.segments.iter().filter(|s| s.start >= from).collect();
    let Some(last) = segments.last() else {
        return Ok(manifest.clone());
    };
    let mut m = manifest.clone();
    let generation = m.dedup.len() as u32;
    let root = m.root.clone();
    let tmp = root.join("dedup").join(format!(".tmp-g{generation}"));
    fs::create_dir_all(&tmp).map_err(TsvError::io(&tmp))?;
    let ext = m.compression.extension();

    let mut files = Vec::new();
    let mut conflicts: Option<RowWriter> = None;
    let conflicts_rel = format!("dedup/conflicts_g{generation}.tsv");
    for kind in NodeKind::ALL {
        let inputs: Vec<&FileEntry> = segments
            .iter()
            .flat_map(|s| &s.files)
            .filter(|f| f.node_kind() == Some(kind))
            .collect();
        if inputs.is_empty() {
            continue;
        }
        let runs = sorted_runs(&root, &inputs, memory_budget, &tmp)?;
        let mut prior: Vec<PriorLines> = Vec::new();
        for g in &m.dedup {
            for f in g.files.iter().filter(|f| f.node_kind() == Some(kind)) {
                let lines: Box<dyn Iterator<Item = std::io::Result<String>>> =
                    Box::new(open_lines(&root.join(&f.path))?);
                prior.push(lines.peekable());
            }
        }
        let rel = format!("dedup/{}_g{generation}.{ext}", kind.as_str());
        let mut out = RowWriter::create(&root.join(&rel), node_header(kind), m.compression)?;
        let mut kept: Option<String> = None;
        for line in Merge::open(&runs)? {
            let line = line?;
            if let Some(k) = &kept {
                if node_key(k).0 == node_key(&line).0 {
                    if !same_properties(k, &line) {
                        let w = match &mut conflicts {
                            Some(w) => w,
                            None => conflicts.insert(RowWriter::create(
                                &root.join(&conflicts_rel),
                                "id\tlabel\tkept_height\tconflicting_height",
                                super::Compression::None,
                            )?),
                        };
                        let (id, kept_h) = node_key(k);
                        w.write_row(&format!("{id}\t{kind}\t{kept_h}\t{}", node_key(&line).1))?;
                    }
                    continue;
                }
                if !seen_before(&mut prior, node_key(k).0) {
                    out.write_row(k)?;
                }
            }
            kept = Some(line);
        }
        if let Some(k) = &kept {
            if !seen_before(&mut prior, node_key(k).0) {
                out.write_row(k)?;
            }
        }
        for r in runs {
            let _ = fs::remove_file(r);
        }
        let (rows, sha256) = out.finish()?;
        files.push(FileEntry {
            kind: FileKind::Node,
            label: kind.as_str().to_owned(),
            path: rel,
            rows,
            sha256,
        });
    }
    let mut conflict_rows = 0;
    if let Some(w) = conflicts {
        let (rows, sha256) = w.finish()?;
        conflict_rows = rows;
        files.push(FileEntry {
            kind: FileKind::Conflicts,
            label: "conflicts".into(),
            path: conflicts_rel,
            rows,
            sha256,
        });
    }
    let _ = fs::remove_dir_all(&tmp);
    m.dedup.push(DedupGeneration {
        generation,
        from_height: segments[0].start,
        through_height: last.end,
        files,
        conflicts: conflict_rows,
    });
    m.save()?;
    Ok(m)
}
