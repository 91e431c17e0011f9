//! Exact-content deduplication of a training split against a test split.
//!
//! Test images are indexed by the SHA-256 digest of their pixels in
//! canonical layout (row-major, channel-interleaved). The training split is
//! then scanned batch by batch: a training image whose digest is in the
//! index is reported as a duplicate, every other index is kept.
//!
//! Image sets are packed binary files of fixed-size records with no header,
//! described by a small TOML manifest.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataio::csv_io;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ImageHash(pub [u8; 32]);

impl ImageHash {
    pub fn hex(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ImageHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Byte order of a packed record.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Row-major, channels interleaved (the canonical layout).
    #[default]
    Hwc,
    /// One row-major plane per channel.
    Chw,
    /// One column-major plane per channel (STL-10 binaries).
    ChwColumnMajor,
}

/// Image geometry and record layout shared by both splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    #[serde(default)]
    pub layout: Layout,
    /// Expected record counts, checked against file sizes when present.
    #[serde(default)]
    pub train_count: Option<usize>,
    #[serde(default)]
    pub test_count: Option<usize>,
}

impl Manifest {
    pub fn stl10() -> Self {
        Manifest { width: 96, height: 96, channels: 3, layout: Layout::ChwColumnMajor, train_count: None, test_count: None }
    }

    pub fn record_len(&self) -> usize {
        self.width * self.height * self.channels
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if m.record_len() == 0 {
            return Err(Error::Config("manifest dimensions must be positive".into()));
        }
        Ok(m)
    }

    /// Reorders one record into canonical layout.
    pub fn canonicalize(&self, record: &[u8]) -> Vec<u8> {
        let (w, h, c) = (self.width, self.height, self.channels);
        match self.layout {
            Layout::Hwc => record.to_vec(),
            Layout::Chw => {
                let mut out = vec![0; record.len()];
                for ch in 0..c {
                    for p in 0..w * h {
                        out[p * c + ch] = record[ch * w * h + p];
                    }
                }
                out
            }
            Layout::ChwColumnMajor => {
                let mut out = vec![0; record.len()];
                for ch in 0..c {
                    for x in 0..w {
                        for y in 0..h {
                            out[(y * w + x) * c + ch] = record[ch * w * h + x * h + y];
                        }
                    }
                }
                out
            }
        }
    }
}

/// Digest of a canonical-layout pixel buffer.
pub fn hash_image(pixels: &[u8], width: usize, height: usize, channels: usize) -> Result<ImageHash> {
    let expected = width * height * channels;
    if pixels.len() != expected {
        return Err(Error::Argument(format!(
            "pixel buffer has {} bytes, {width}x{height}x{channels} needs {expected}",
            pixels.len()
        )));
    }
    Ok(ImageHash(Sha256::digest(pixels).into()))
}

/// A packed record file opened for sequential batched reads.
pub struct PackedImages {
    path: PathBuf,
    manifest: Manifest,
    count: usize,
}

impl PackedImages {
    pub fn open(path: impl AsRef<Path>, manifest: Manifest, expected: Option<usize>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let len = std::fs::metadata(&path).map_err(|e| Error::io(&path, e))?.len() as usize;
        let rec = manifest.record_len();
        if !len.is_multiple_of(rec) {
            return Err(Error::Format(format!(
                "{}: {len} bytes is not a multiple of the {rec}-byte record size",
                path.display()
            )));
        }
        let count = len / rec;
        if let Some(e) = expected {
            if e != count {
                return Err(Error::Format(format!("{}: manifest says {e} images, file holds {count}", path.display())));
            }
        }
        Ok(PackedImages { path, manifest, count })
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Canonical-layout images in batches of `batch_size`.
    pub fn batches(&self, batch_size: usize) -> Result<impl Iterator<Item = Result<Vec<Vec<u8>>>> + '_> {
        if batch_size == 0 {
            return Err(Error::Argument("batch size must be >= 1".into()));
        }
        let file = File::open(&self.path).map_err(|e| Error::io(&self.path, e))?;
        let mut reader = BufReader::new(file);
        let rec = self.manifest.record_len();
        let mut next = 0;
        Ok(std::iter::from_fn(move || {
            if next >= self.count {
                return None;
            }
            let end = (next + batch_size).min(self.count);
            let mut batch = Vec::with_capacity(end - next);
            let mut buf = vec![0u8; rec];
            let start = next;
            next = end;
            for i in start..end {
                if let Err(e) = reader.read_exact(&mut buf) {
                    next = self.count;
                    return Some(Err(Error::io(&self.path, e).with_context(format!("record {i}"))));
                }
                batch.push(self.manifest.canonicalize(&buf));
            }
            Some(Ok(batch))
        }))
    }

    /// Copies the selected records verbatim (native layout) to `dst`.
    pub fn write_subset(&self, indices: &[usize], dst: impl AsRef<Path>) -> Result<()> {
        let dst = dst.as_ref();
        let bytes = std::fs::read(&self.path).map_err(|e| Error::io(&self.path, e))?;
        let rec = self.manifest.record_len();
        let mut out = BufWriter::new(File::create(dst).map_err(|e| Error::io(dst, e))?);
        for &i in indices {
            if i >= self.count {
                return Err(Error::Range(format!("record {i} outside [0, {})", self.count)));
            }
            out.write_all(&bytes[i * rec..(i + 1) * rec]).map_err(|e| Error::io(dst, e))?;
        }
        out.flush().map_err(|e| Error::io(dst, e))
    }
}

impl Error {
    fn with_context(self, what: String) -> Error {
        match self {
            Error::Io { path, source } => Error::Io {
                path,
                source: std::io::Error::new(source.kind(), format!("{what}: {source}")),
            },
            other => Error::Data(format!("{what}: {other}")),
        }
    }
}

/// Test-set digest index: one entry per distinct digest, pointing at the
/// smallest test index carrying it.
#[derive(Debug, Clone, Default)]
pub struct TestIndex {
    pub map: HashMap<ImageHash, usize>,
    /// `(kept, dropped)` test index pairs with identical content.
    pub intra_test_duplicates: Vec<(usize, usize)>,
    pub test_count: usize,
}

impl TestIndex {
    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

fn hash_batch(batch: &[Vec<u8>], m: &Manifest) -> Result<Vec<ImageHash>> {
    batch
        .par_iter()
        .map(|px| hash_image(px, m.width, m.height, m.channels))
        .collect()
}

pub fn build_test_index<I>(batches: I, manifest: &Manifest) -> Result<TestIndex>
where
    I: IntoIterator<Item = Result<Vec<Vec<u8>>>>,
{
    let mut index = TestIndex::default();
    for (b, batch) in batches.into_iter().enumerate() {
        let batch = batch.map_err(|e| e.with_context(format!("test batch {b}")))?;
        let offset = index.test_count;
        let hashes = hash_batch(&batch, manifest).map_err(|e| e.with_context(format!("test batch {b}")))?;
        for (k, h) in hashes.into_iter().enumerate() {
            let i = offset + k;
            match index.map.get(&h) {
                Some(&kept) => {
                    log::info!("test image {i} duplicates test image {kept}");
                    index.intra_test_duplicates.push((kept, i));
                }
                None => {
                    index.map.insert(h, i);
                }
            }
        }
        index.test_count += batch.len();
    }
    Ok(index)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Duplicate {
    pub train_index: usize,
    pub test_index: usize,
    pub hash: ImageHash,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DedupReport {
    pub duplicates: Vec<Duplicate>,
    pub valid_indices: Vec<usize>,
}

impl DedupReport {
    pub fn train_count(&self) -> usize {
        self.duplicates.len() + self.valid_indices.len()
    }
}

pub fn scan_train<I>(batches: I, manifest: &Manifest, index: &TestIndex) -> Result<DedupReport>
where
    I: IntoIterator<Item = Result<Vec<Vec<u8>>>>,
{
    let mut report = DedupReport::default();
    let mut offset = 0;
    for (b, batch) in batches.into_iter().enumerate() {
        let batch = batch.map_err(|e| e.with_context(format!("train batch {b} at offset {offset}")))?;
        let hashes = hash_batch(&batch, manifest)
            .map_err(|e| e.with_context(format!("train batch {b} at offset {offset}")))?;
        for (k, h) in hashes.into_iter().enumerate() {
            let i = offset + k;
            match index.map.get(&h) {
                Some(&t) => report.duplicates.push(Duplicate { train_index: i, test_index: t, hash: h }),
                None => report.valid_indices.push(i),
            }
        }
        offset += batch.len();
    }
    Ok(report)
}

/// Writes `train_index,test_index,hash`. Returns `false`, writing nothing,
/// when there are no duplicates.
pub fn write_report(report: &DedupReport, path: impl AsRef<Path>) -> Result<bool> {
    if report.duplicates.is_empty() {
        return Ok(false);
    }
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(["train_index", "test_index", "hash"]).map_err(|e| csv_io(path, e))?;
    for d in &report.duplicates {
        w.write_record([d.train_index.to_string(), d.test_index.to_string(), d.hash.hex()])
            .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(true)
}

/// One retained train index per line, ascending.
pub fn write_valid_indices(report: &DedupReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for i in &report.valid_indices {
        writeln!(out, "{i}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Opens both splits and runs the full scan.
pub fn dedup_files(
    train: impl AsRef<Path>,
    test: impl AsRef<Path>,
    manifest: &Manifest,
    batch_size: usize,
) -> Result<(TestIndex, DedupReport)> {
    let test = PackedImages::open(test, *manifest, manifest.test_count)?;
    let train = PackedImages::open(train, *manifest, manifest.train_count)?;
    let index = build_test_index(test.batches(batch_size)?, manifest)?;
    let report = scan_train(train.batches(batch_size)?, manifest, &index)?;
    Ok((index, report))
}
