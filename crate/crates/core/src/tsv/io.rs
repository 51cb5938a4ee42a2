use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::GzBuilder;
use sha2::{Digest, Sha256};

use super::manifest::FileEntry;
use super::{Compression, TsvError};

const BUF: usize = 64 * 1024;

struct Hashing<W> {
    inner: W,
    hasher: Sha256,
}

impl<W: Write> Write for Hashing<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

enum Sink {
    Plain(BufWriter<Hashing<File>>),
    Gzip(BufWriter<GzEncoder<Hashing<File>>>),
}

/// Line writer that tracks row count and the digest of the on-disk bytes.
pub(crate) struct RowWriter {
    sink: Sink,
    path: PathBuf,
    rows: u64,
}

impl RowWriter {
    pub fn create(path: &Path, header: &str, compression: Compression) -> Result<Self, TsvError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(TsvError::io(dir))?;
        }
        let file = File::create(path).map_err(TsvError::io(path))?;
        let hashing = Hashing {
            inner: file,
            hasher: Sha256::new(),
        };
        let sink = match compression {
            Compression::None => Sink::Plain(BufWriter::with_capacity(BUF, hashing)),
            Compression::Gzip => Sink::Gzip(BufWriter::with_capacity(
                BUF,
                GzBuilder::new().mtime(0).write(hashing, flate2::Compression::default()),
            )),
        };
        let mut w = RowWriter {
            sink,
            path: path.to_owned(),
            rows: 0,
        };
        w.write_raw(header)?;
        Ok(w)
    }

    fn write_raw(&mut self, line: &str) -> Result<(), TsvError> {
        let res = match &mut self.sink {
            Sink::Plain(w) => w.write_all(line.as_bytes()).and_then(|_| w.write_all(b"\n")),
            Sink::Gzip(w) => w.write_all(line.as_bytes()).and_then(|_| w.write_all(b"\n")),
        };
        res.map_err(TsvError::io(&self.path))
    }

    pub fn write_row(&mut self, line: &str) -> Result<(), TsvError> {
        self.write_raw(line)?;
        self.rows += 1;
        Ok(())
    }

    /// Flushes and returns `(rows, sha256 hex)`.
    pub fn finish(self) -> Result<(u64, String), TsvError> {
        let err = TsvError::io(&self.path);
        let hashing = match self.sink {
            Sink::Plain(w) => w.into_inner().map_err(|e| e.into_error()),
            Sink::Gzip(w) => w
                .into_inner()
                .map_err(|e| e.into_error())
                .and_then(|gz| gz.finish()),
        };
        let mut hashing = hashing.map_err(err)?;
        hashing.inner.flush().map_err(TsvError::io(&self.path))?;
        Ok((self.rows, hex::encode(hashing.hasher.finalize())))
    }
}

struct HashingReader<R> {
    inner: R,
    hasher: Sha256,
}

impl<R: Read> Read for HashingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }
}

/// Reads a file listed in the manifest, verifying rows and digest at EOF.
pub(crate) fn read_verified(
    root: &Path,
    entry: &FileEntry,
    mut on_row: impl FnMut(usize, &str) -> Result<(), TsvError>,
) -> Result<(), TsvError> {
    let path = root.join(&entry.path);
    let file = File::open(&path).map_err(TsvError::io(&path))?;
    let corrupt = |reason: String| TsvError::Corruption {
        path: path.clone(),
        reason,
    };
    let mut reader = HashingReader {
        inner: file,
        hasher: Sha256::new(),
    };
    let mut rows = 0u64;
    let mut row_error = None;
    {
        let source: Box<dyn Read + '_> = if entry.path.ends_with(".gz") {
            Box::new(MultiGzDecoder::new(&mut reader))
        } else {
            Box::new(&mut reader)
        };
        let mut lines = BufReader::with_capacity(BUF, source).lines();
        match lines.next() {
            Some(Ok(_header)) => {}
            Some(Err(e)) => return Err(corrupt(e.to_string())),
            None => return Err(corrupt("missing header".into())),
        }
        for (i, line) in lines.enumerate() {
            let Ok(line) = line else {
                // undecodable bytes: let the digest check name the problem
                row_error.get_or_insert_with(|| corrupt("unreadable line".into()));
                break;
            };
            if row_error.is_none() {
                if let Err(e) = on_row(i + 2, &line) {
                    row_error = Some(e);
                }
            }
            rows += 1;
        }
    }
    // drain anything the decoder did not consume so the digest covers the file
    io::copy(&mut reader, &mut io::sink()).map_err(TsvError::io(&path))?;
    let digest = hex::encode(reader.hasher.finalize());
    if digest != entry.sha256 {
        return Err(corrupt(format!("sha256 {digest} does not match manifest {}", entry.sha256)));
    }
    if rows != entry.rows {
        return Err(corrupt(format!("{rows} rows, manifest lists {}", entry.rows)));
    }
    row_error.map_or(Ok(()), Err)
}

/// Plain line reader over a possibly gzipped file, header skipped.
pub(crate) fn open_lines(path: &Path) -> Result<impl Iterator<Item = io::Result<String>>, TsvError> {
    let file = File::open(path).map_err(TsvError::io(path))?;
    let source: Box<dyn Read + Send> = if path.to_string_lossy().ends_with(".gz") {
        Box::new(MultiGzDecoder::new(file))
    } else {
        Box::new(file)
    };
    Ok(BufReader::with_capacity(BUF, source).lines().skip(1))
}
