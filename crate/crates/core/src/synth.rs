//! Isotropic Gaussian blobs with planted class means, for tests and demos.

use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataio::{self, FeatureMatrix, LabelSet};
use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub n_classes: usize,
    pub dim: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Pairwise distance between class means, in units of `sigma`.
    pub separation: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        BlobSpec { n_classes: 3, dim: 10, train_per_class: 504, test_per_class: 200, separation: 8.0, sigma: 1.0, seed: 0 }
    }
}

/// Fully labeled train and test splits drawn from the same blobs.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub train: FeatureMatrix,
    pub train_labels: LabelSet,
    pub test: FeatureMatrix,
    pub test_labels: LabelSet,
    pub means: Vec<Vec<f64>>,
}

/// Class `k` is centered at `separation * sigma / sqrt(2) * e_k`, so every
/// pair of means is exactly `separation * sigma` apart. Samples cycle
/// through the classes: row `i` belongs to class `i % K + 1`.
pub fn generate(spec: &BlobSpec) -> Result<SynthData> {
    if spec.n_classes == 0 || spec.n_classes > spec.dim {
        return Err(Error::Argument(format!(
            "need 1 <= classes <= dim, got {} classes in {} dims",
            spec.n_classes, spec.dim
        )));
    }
    if spec.train_per_class == 0 || spec.test_per_class == 0 || !(spec.sigma > 0.0) {
        return Err(Error::Argument("blob sizes and sigma must be positive".into()));
    }
    let offset = spec.separation * spec.sigma / std::f64::consts::SQRT_2;
    let means: Vec<Vec<f64>> = (0..spec.n_classes)
        .map(|k| (0..spec.dim).map(|j| if j == k { offset } else { 0.0 }).collect())
        .collect();
    let mut rng = rng_for(spec.seed, Stream::Synth);
    let mut draw = |per_class: usize| -> Result<(FeatureMatrix, LabelSet)> {
        let n = per_class * spec.n_classes;
        let mut values = Vec::with_capacity(n * spec.dim);
        for i in 0..n {
            let mu = &means[i % spec.n_classes];
            for m in mu {
                let z: f64 = StandardNormal.sample(&mut rng);
                // stored files are f32; keep in-memory data identical to what a reload sees
                values.push(f64::from((m + spec.sigma * z) as f32));
            }
        }
        let labels = LabelSet::from_pairs((0..n).map(|i| (i, (i % spec.n_classes) as u32 + 1)))?;
        Ok((FeatureMatrix::new(n, spec.dim, values)?, labels))
    };
    let (train, train_labels) = draw(spec.train_per_class)?;
    let (test, test_labels) = draw(spec.test_per_class)?;
    Ok(SynthData { train, train_labels, test, test_labels, means })
}

pub const TRAIN_FEATURES: &str = "train.sofb";
pub const TRAIN_LABELS: &str = "train_labels.csv";
pub const TEST_FEATURES: &str = "test.sofb";
pub const TEST_LABELS: &str = "test_labels.csv";

/// Writes the four files named by the constants above into `dir`.
pub fn write_dataset(data: &SynthData, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    dataio::write_features(&data.train, dir.join(TRAIN_FEATURES))?;
    dataio::write_labels(&data.train_labels, dir.join(TRAIN_LABELS))?;
    dataio::write_features(&data.test, dir.join(TEST_FEATURES))?;
    dataio::write_labels(&data.test_labels, dir.join(TEST_LABELS))
}
