//! Semi-supervised Gaussian mixture classification over precomputed image
//! feature vectors.
//!
//! The crate covers the whole training pipeline: feature/label file I/O,
//! PCA reduction, K-means++ seeding, a joint labeled/unlabeled EM fit of a
//! Gaussian mixture whose components carry class distributions, one-shot
//! pseudo-label augmentation, a softmax-head baseline for ablations, and an
//! exact-hash train/test deduplication tool.

// `!(x >= 0.0)`-style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod container;
pub mod dataio;
pub mod dedup;
pub mod error;
pub mod kmeans;
pub mod linalg;
pub mod pca;
pub mod pipeline;
pub mod pseudo;
pub mod rng;
pub mod sgmm;
pub mod synth;

pub use dataio::{FeatureMatrix, LabelSet};
pub use error::{Error, Result};
pub use pca::PcaModel;
pub use sgmm::{EmConfig, Responsibilities, SgmmModel};
