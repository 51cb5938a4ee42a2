//! Persistent first-seen set of script identities.
//!
//! Keys are hashed to 128 bits. New keys collect in memory and are flushed
//! as sorted run files; lookups binary-search each run through a sparse
//! in-memory fence index. Runs are merged once there are too many.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ProfileError;

const META: &str = "meta.json";
const KEY: usize = 16;
const FENCE: usize = 1024;
const MAX_RUNS: usize = 8;
pub const DEFAULT_MEM_KEYS: usize = 1 << 20;

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    next_height: u64,
    next_run: u64,
    runs: Vec<String>,
}

struct Run {
    name: String,
    file: File,
    len: usize,
    /// Every `FENCE`-th key.
    fences: Vec<u128>,
}

impl Run {
    fn open(path: &Path, name: String) -> Result<Run, ProfileError> {
        let file = File::open(path).map_err(ProfileError::io(path))?;
        let bytes = file.metadata().map_err(ProfileError::io(path))?.len() as usize;
        if !bytes.is_multiple_of(KEY) {
            return Err(ProfileError::Index(format!("{} has a partial key", path.display())));
        }
        let len = bytes / KEY;
        let mut fences = Vec::with_capacity(len / FENCE + 1);
        let mut buf = [0u8; KEY];
        for i in (0..len).step_by(FENCE) {
            file.read_exact_at(&mut buf, (i * KEY) as u64).map_err(ProfileError::io(path))?;
            fences.push(u128::from_be_bytes(buf));
        }
        Ok(Run { name, file, len, fences })
    }

    fn contains(&self, key: u128) -> std::io::Result<bool> {
        let block = match self.fences.binary_search(&key) {
            Ok(_) => return Ok(true),
            Err(0) => return Ok(false),
            Err(i) => i - 1,
        };
        let start = block * FENCE;
        let n = FENCE.min(self.len - start);
        let mut buf = vec![0u8; n * KEY];
        self.file.read_exact_at(&mut buf, (start * KEY) as u64)?;
        let keys: Vec<u128> = buf
            .chunks_exact(KEY)
            .map(|c| u128::from_be_bytes(c.try_into().expect("16 bytes")))
            .collect();
        Ok(keys.binary_search(&key).is_ok())
    }
}

pub struct AddrIndex {
    dir: PathBuf,
    mem: HashSet<u128>,
    mem_limit: usize,
    runs: Vec<Run>,
    next_height: u64,
    next_run: u64,
}

fn hash_key(key: &str) -> u128 {
    let d = Sha256::digest(key.as_bytes());
    u128::from_be_bytes(d[..KEY].try_into().expect("16 bytes"))
}

impl AddrIndex {
    /// Opens the index in `dir`, creating one that expects `start_height`
    /// next if none exists.
    pub fn open(dir: &Path, start_height: u64) -> Result<AddrIndex, ProfileError> {
        Self::open_with_limit(dir, start_height, DEFAULT_MEM_KEYS)
    }

    pub fn open_with_limit(dir: &Path, start_height: u64, mem_limit: usize) -> Result<AddrIndex, ProfileError> {
        fs::create_dir_all(dir).map_err(ProfileError::io(dir))?;
        let meta_path = dir.join(META);
        let meta = if meta_path.exists() {
            let text = fs::read(&meta_path).map_err(ProfileError::io(&meta_path))?;
            serde_json::from_slice(&text).map_err(|e| ProfileError::Index(format!("{}: {e}", meta_path.display())))?
        } else {
            Meta {
                next_height: start_height,
                next_run: 0,
                runs: Vec::new(),
            }
        };
        let mut runs = Vec::new();
        for name in &meta.runs {
            runs.push(Run::open(&dir.join(name), name.clone())?);
        }
        // Runs written after the last saved meta are unreferenced.
        for entry in fs::read_dir(dir).map_err(ProfileError::io(dir))? {
            let entry = entry.map_err(ProfileError::io(dir))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.ends_with(".run") && !meta.runs.contains(&name) {
                let _ = fs::remove_file(entry.path());
            }
        }
        Ok(AddrIndex {
            dir: dir.to_owned(),
            mem: HashSet::new(),
            mem_limit: mem_limit.max(1),
            runs,
            next_height: meta.next_height,
            next_run: meta.next_run,
        })
    }

    /// Height the index expects next.
    pub fn next_height(&self) -> u64 {
        self.next_height
    }

    fn contains_hash(&self, h: u128) -> Result<bool, ProfileError> {
        if self.mem.contains(&h) {
            return Ok(true);
        }
        for r in &self.runs {
            if r.contains(h).map_err(ProfileError::io(self.dir.join(&r.name)))? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    pub fn contains(&self, key: &str) -> Result<bool, ProfileError> {
        self.contains_hash(hash_key(key))
    }

    /// Records the keys of block `height` and returns how many distinct
    /// keys were not seen before.
    pub fn observe<'a>(&mut self, height: u64, keys: impl IntoIterator<Item = &'a str>) -> Result<u64, ProfileError> {
        if height != self.next_height {
            return Err(ProfileError::Sequencing {
                expected: self.next_height,
                found: height,
            });
        }
        let mut fresh = 0;
        let mut block = HashSet::new();
        for k in keys {
            let h = hash_key(k);
            if block.insert(h) && !self.contains_hash(h)? {
                fresh += 1;
                self.mem.insert(h);
            }
        }
        self.next_height += 1;
        if self.mem.len() >= self.mem_limit {
            self.flush()?;
        }
        Ok(fresh)
    }

    fn write_run(&mut self, keys: impl Iterator<Item = u128>) -> Result<Option<String>, ProfileError> {
        let name = format!("{:08}.run", self.next_run);
        self.next_run += 1;
        let path = self.dir.join(&name);
        let mut w = BufWriter::new(File::create(&path).map_err(ProfileError::io(&path))?);
        let mut n = 0;
        for k in keys {
            w.write_all(&k.to_be_bytes()).map_err(ProfileError::io(&path))?;
            n += 1;
        }
        w.flush().map_err(ProfileError::io(&path))?;
        if n == 0 {
            let _ = fs::remove_file(&path);
            return Ok(None);
        }
        Ok(Some(name))
    }

    fn save_meta(&self) -> Result<(), ProfileError> {
        let meta = Meta {
            next_height: self.next_height,
            next_run: self.next_run,
            runs: self.runs.iter().map(|r| r.name.clone()).collect(),
        };
        let tmp = self.dir.join(format!("{META}.tmp"));
        let text = serde_json::to_vec_pretty(&meta).expect("meta serializes");
        fs::write(&tmp, text).map_err(ProfileError::io(&tmp))?;
        let dest = self.dir.join(META);
        fs::rename(&tmp, &dest).map_err(ProfileError::io(&dest))
    }

    /// Persists buffered keys and the next expected height.
    pub fn flush(&mut self) -> Result<(), ProfileError> {
        let mut keys: Vec<u128> = self.mem.drain().collect();
        keys.sort_unstable();
        if let Some(name) = self.write_run(keys.into_iter())? {
            self.runs.push(Run::open(&self.dir.join(&name), name)?);
        }
        if self.runs.len() > MAX_RUNS {
            self.compact()?;
        }
        self.save_meta()?;
        let live: Vec<&str> = self.runs.iter().map(|r| r.name.as_str()).collect();
        for entry in fs::read_dir(&self.dir).map_err(ProfileError::io(&self.dir))?.flatten() {
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.ends_with(".run") && !live.contains(&name.as_str()) {
                let _ = fs::remove_file(entry.path());
            }
        }
        Ok(())
    }

    fn compact(&mut self) -> Result<(), ProfileError> {
        let mut readers = Vec::new();
        for r in &self.runs {
            let path = self.dir.join(&r.name);
            readers.push(KeyReader::open(&path)?);
        }
        let merged = MergeKeys { readers, heads: Vec::new(), started: false };
        let name = self.write_run(merged)?;
        self.runs.clear();
        if let Some(name) = name {
            self.runs.push(Run::open(&self.dir.join(&name), name)?);
        }
        Ok(())
    }

    pub fn run_count(&self) -> usize {
        self.runs.len()
    }
}

struct KeyReader(BufReader<File>);

impl KeyReader {
    fn open(path: &Path) -> Result<KeyReader, ProfileError> {
        Ok(KeyReader(BufReader::with_capacity(64 * 1024, File::open(path).map_err(ProfileError::io(path))?)))
    }

    fn next_key(&mut self) -> Option<u128> {
        let mut buf = [0u8; KEY];
        self.0.read_exact(&mut buf).ok()?;
        Some(u128::from_be_bytes(buf))
    }
}

struct MergeKeys {
    readers: Vec<KeyReader>,
    heads: Vec<Option<u128>>,
    started: bool,
}

impl Iterator for MergeKeys {
    type Item = u128;

    fn next(&mut self) -> Option<u128> {
        if !self.started {
            self.heads = self.readers.iter_mut().map(KeyReader::next_key).collect();
            self.started = true;
        }
        let min = self.heads.iter().flatten().min().copied()?;
        for (i, h) in self.heads.iter_mut().enumerate() {
            if *h == Some(min) {
                *h = self.readers[i].next_key();
            }
        }
        Some(min)
    }
}
