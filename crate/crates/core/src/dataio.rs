//! Feature matrices, label files and labeled/unlabeled splits.
//!
//! Feature files are the `SOFB` container: magic, version 1, `n` and `d` as
//! u32, then `n * d` little-endian f32 values in row-major order. Values are
//! widened to f64 on load and every computation downstream runs in f64.
//!
//! Label files are CSV with an `index,class` header. Class ids are 1-based
//! on every external surface.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index;

use crate::container::{self, Reader, Writer};
use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};

pub const FEATURE_MAGIC: &[u8; 4] = b"SOFB";

/// `n` samples of dimension `d`, stored row-major.
///
/// Every value is finite. Matrices built from files or [`FeatureMatrix::new`]
/// have `n >= 1`; [`FeatureMatrix::select_rows`] may yield zero rows so that
/// an empty labeled or unlabeled partition can still be passed around.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Argument(format!("feature matrix must be non-empty, got {n}x{d}")));
        }
        Self::with_rows(n, d, values)
    }

    pub fn from_f32(n: usize, d: usize, values: &[f32]) -> Result<Self> {
        Self::new(n, d, values.iter().map(|&v| f64::from(v)).collect())
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::Argument(format!("row {i} has length {}, expected {d}", r.len())));
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), d, values)
    }

    fn with_rows(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * d {
            return Err(Error::Argument(format!(
                "{} values supplied for a {n}x{d} matrix",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(FeatureMatrix { n, d, values })
    }

    /// An `0 x d` matrix.
    pub fn empty(d: usize) -> Self {
        FeatureMatrix { n: 0, d, values: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact on an empty slice with d > 0 yields nothing
        self.values.chunks_exact(self.d.max(1))
    }

    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix { n: indices.len(), d: self.d, values }
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.d != other.d {
            return Err(Error::Argument(format!("cannot stack d={} on d={}", other.d, self.d)));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Ok(FeatureMatrix { n: self.n + other.n, d: self.d, values })
    }
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = container::read_file(path)?;
    decode_features(&bytes)
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureMatrix> {
    let mut r = Reader::parse(bytes, FEATURE_MAGIC, 2)?;
    let (n, d) = (r.dims[0] as usize, r.dims[1] as usize);
    if n == 0 || d == 0 {
        return Err(Error::Format(format!("header declares an empty {n}x{d} matrix")));
    }
    let count = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(4).map(|_| c))
        .ok_or_else(|| Error::Format(format!("header dimensions {n}x{d} overflow")))?;
    r.expect_len(count * 4)?;
    let raw = r.f32s(count);
    FeatureMatrix::from_f32(n, d, &raw)
}

/// Serializes `m` as f32. Values that are not exactly representable in f32
/// are rounded to nearest.
pub fn encode_features(m: &FeatureMatrix) -> Result<Vec<u8>> {
    let mut w = Writer::new(FEATURE_MAGIC, &feature_dims(m)?);
    w.f32s(m.values.iter().map(|&v| v as f32));
    Ok(w.into_bytes())
}

pub fn write_features(m: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut w = Writer::new(FEATURE_MAGIC, &feature_dims(m)?);
    w.f32s(m.values.iter().map(|&v| v as f32));
    w.write_to(path.as_ref())
}

fn feature_dims(m: &FeatureMatrix) -> Result<[u32; 2]> {
    if m.n == 0 {
        return Err(Error::Argument("refusing to write a matrix with zero rows".into()));
    }
    let n = u32::try_from(m.n).map_err(|_| Error::Argument(format!("n = {} exceeds u32", m.n)))?;
    let d = u32::try_from(m.d).map_err(|_| Error::Argument(format!("d = {} exceeds u32", m.d)))?;
    Ok([n, d])
}

/// Partial assignment of 1-based class ids to sample indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelSet {
    assignments: BTreeMap<usize, u32>,
    num_classes: u32,
}

impl LabelSet {
    /// `num_classes` is the largest class id present (0 when empty).
    pub fn new(assignments: BTreeMap<usize, u32>) -> Result<Self> {
        if let Some((i, _)) = assignments.iter().find(|(_, &c)| c == 0) {
            return Err(Error::Range(format!("sample {i} has class 0; class ids start at 1")));
        }
        let num_classes = assignments.values().copied().max().unwrap_or(0);
        Ok(LabelSet { assignments, num_classes })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, u32)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, c) in pairs {
            if map.insert(i, c).is_some() {
                return Err(Error::Format(format!("duplicate index {i}")));
            }
        }
        Self::new(map)
    }

    pub fn num_classes(&self) -> u32 {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<u32> {
        self.assignments.get(&index).copied()
    }

    /// `(index, class)` pairs in ascending index order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.assignments.iter().map(|(&i, &c)| (i, c))
    }

    /// Restricts to the given indices; unlisted ones are dropped.
    pub fn restrict(&self, indices: &[usize]) -> LabelSet {
        let assignments: BTreeMap<_, _> = indices
            .iter()
            .filter_map(|&i| self.get(i).map(|c| (i, c)))
            .collect();
        let num_classes = assignments.values().copied().max().unwrap_or(0);
        LabelSet { assignments, num_classes }
    }

    /// Class ids for `indices`, failing on any unlabeled index.
    pub fn classes_of(&self, indices: &[usize]) -> Result<Vec<u32>> {
        indices
            .iter()
            .map(|&i| {
                self.get(i)
                    .ok_or_else(|| Error::Consistency(format!("sample {i} has no label")))
            })
            .collect()
    }
}

pub fn read_labels(path: impl AsRef<Path>, n: usize) -> Result<LabelSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text, n)
}

pub fn parse_labels(text: &str, n: usize) -> Result<LabelSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut map = BTreeMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format(format!("label csv: {e}")))?;
        if record.len() != 2 {
            return Err(Error::Format(format!(
                "line {}: expected 2 fields, found {}",
                line + 1,
                record.len()
            )));
        }
        if line == 0 && &record[0] == "index" && &record[1] == "class" {
            continue;
        }
        let index: usize = record[0]
            .parse()
            .map_err(|_| Error::Format(format!("line {}: bad index {:?}", line + 1, &record[0])))?;
        let class: i64 = record[1]
            .parse()
            .map_err(|_| Error::Format(format!("line {}: bad class {:?}", line + 1, &record[1])))?;
        if index >= n {
            return Err(Error::Range(format!("index {index} is outside [0, {n})")));
        }
        if class < 1 || class > i64::from(u32::MAX) {
            return Err(Error::Range(format!("index {index} has class {class}; classes start at 1")));
        }
        if map.insert(index, class as u32).is_some() {
            return Err(Error::Format(format!("duplicate index {index}")));
        }
    }
    LabelSet::new(map)
}

pub fn write_labels(labels: &LabelSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(["index", "class"]).map_err(|e| csv_io(path, e))?;
    for (i, c) in labels.iter() {
        w.write_record([i.to_string(), c.to_string()]).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

/// A partition of `[0, n)` into labeled and unlabeled sample indices, both
/// ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
}

/// Draws `per_class` labeled samples from every class `1..=K` uniformly
/// without replacement. Everything else, including labeled samples that were
/// not drawn, becomes unlabeled.
pub fn split_labeled(m: &FeatureMatrix, labels: &LabelSet, per_class: usize, seed: u64) -> Result<Split> {
    let n = m.n();
    if let Some((i, _)) = labels.iter().find(|&(i, _)| i >= n) {
        return Err(Error::Range(format!("label index {i} is outside [0, {n})")));
    }
    let k = labels.num_classes() as usize;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, c) in labels.iter() {
        by_class[c as usize - 1].push(i);
    }
    let mut rng = rng_for(seed, Stream::Split);
    let mut chosen = vec![false; n];
    for (c, members) in by_class.iter().enumerate() {
        if members.len() < per_class {
            return Err(Error::Capacity(format!(
                "class {} has {} labeled candidates, {per_class} requested",
                c + 1,
                members.len()
            )));
        }
        for pick in index::sample(&mut rng, members.len(), per_class) {
            chosen[members[pick]] = true;
        }
    }
    let (labeled, unlabeled) = (0..n).partition(|&i| chosen[i]);
    Ok(Split { labeled, unlabeled })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_tmp(bytes: &[u8]) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), bytes).unwrap();
        f
    }

    fn header(n: u32, d: u32) -> Vec<u8> {
        let mut b = b"SOFB".to_vec();
        b.extend_from_slice(&1u32.to_le_bytes());
        b.extend_from_slice(&n.to_le_bytes());
        b.extend_from_slice(&d.to_le_bytes());
        b
    }

    #[test]
    fn reads_two_by_three() {
        let mut b = header(2, 3);
        for v in [1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        let f = write_tmp(&b);
        let m = read_features(f.path()).unwrap();
        assert_eq!((m.n(), m.d()), (2, 3));
        assert_eq!(m.row(1), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn short_payload_is_truncation() {
        let mut b = header(2, 3);
        for v in [1.0f32; 5] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        let err = decode_features(&b).unwrap_err();
        assert!(matches!(err, Error::Truncated { expected: 24, found: 20 }), "{err}");
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut b = header(1, 1);
        b.extend_from_slice(&[0u8; 5]);
        assert!(matches!(decode_features(&b), Err(Error::Truncated { .. })));
    }

    #[test]
    fn nan_payload_is_data_error() {
        let mut b = header(1, 2);
        b.extend_from_slice(&1.0f32.to_le_bytes());
        b.extend_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_features(&b), Err(Error::Data(_))));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut b = header(1, 1);
        b.extend_from_slice(&0f32.to_le_bytes());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(decode_features(&bad), Err(Error::Format(_))));
        let mut bad = b;
        bad[4] = 2;
        assert!(matches!(decode_features(&bad), Err(Error::Format(_))));
    }

    #[test]
    fn file_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("one.sofb");
        write_features(&FeatureMatrix::new(1, 1, vec![0.0]).unwrap(), &p).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 20);
        let m = FeatureMatrix::new(3, 4, vec![0.5; 12]).unwrap();
        write_features(&m, &p).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 16 + 4 * 12);
    }

    proptest! {
        #[test]
        fn feature_round_trip_is_bit_exact(
            vals in proptest::collection::vec(
                any::<f32>().prop_filter("finite", |v| v.is_finite()), 600)
        ) {
            let m = FeatureMatrix::from_f32(10, 60, &vals).unwrap();
            let back = decode_features(&encode_features(&m).unwrap()).unwrap();
            prop_assert_eq!((back.n(), back.d()), (10, 60));
            for (a, b) in back.values().iter().zip(m.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn labels_parse() {
        let l = parse_labels("index,class\n0,1\n5,3\n", 10).unwrap();
        assert_eq!(l.iter().collect::<Vec<_>>(), vec![(0, 1), (5, 3)]);
        assert_eq!(l.num_classes(), 3);
        assert!(parse_labels("", 10).unwrap().is_empty());
        assert!(parse_labels("index,class\n", 10).unwrap().is_empty());
    }

    #[test]
    fn label_errors() {
        assert!(matches!(parse_labels("0,1\n0,2\n", 10), Err(Error::Format(_))));
        assert!(matches!(parse_labels("10,1\n", 10), Err(Error::Range(_))));
        assert!(matches!(parse_labels("1,0\n", 10), Err(Error::Range(_))));
        assert!(matches!(parse_labels("1,-2\n", 10), Err(Error::Range(_))));
    }

    fn balanced(n_per: usize, k: u32, extra_unlabeled: usize) -> (FeatureMatrix, LabelSet) {
        let n = n_per * k as usize + extra_unlabeled;
        let m = FeatureMatrix::new(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        let labels = LabelSet::from_pairs((0..n_per * k as usize).map(|i| (i, (i % k as usize) as u32 + 1))).unwrap();
        (m, labels)
    }

    #[test]
    fn split_forty_labels() {
        let (m, labels) = balanced(20, 10, 50);
        let s = split_labeled(&m, &labels, 4, 1).unwrap();
        assert_eq!(s.labeled.len(), 40);
        for c in 1..=10 {
            assert_eq!(s.labeled.iter().filter(|&&i| labels.get(i) == Some(c)).count(), 4);
        }
        let mut all: Vec<_> = s.labeled.iter().chain(&s.unlabeled).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..m.n()).collect::<Vec<_>>());
        assert_eq!(s, split_labeled(&m, &labels, 4, 1).unwrap());
        assert_ne!(s, split_labeled(&m, &labels, 4, 2).unwrap());
    }

    #[test]
    fn split_exhausts_class() {
        let (m, labels) = balanced(5, 3, 7);
        let s = split_labeled(&m, &labels, 5, 9).unwrap();
        assert_eq!(s.unlabeled, (15..22).collect::<Vec<_>>());
    }

    #[test]
    fn split_capacity_error_names_class() {
        let m = FeatureMatrix::new(4, 1, vec![0.0; 4]).unwrap();
        let labels = LabelSet::from_pairs([(0, 1), (1, 1), (2, 2)]).unwrap();
        let err = split_labeled(&m, &labels, 2, 0).unwrap_err();
        assert!(err.to_string().contains("class 2"), "{err}");
    }
}
