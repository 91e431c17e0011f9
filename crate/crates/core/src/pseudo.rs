//! One-shot pseudo-labeling of the unlabeled partition.
//!
//! Every unlabeled sample is scored by its class posterior. Samples whose
//! confidence exceeds `tau` join the candidate list of their argmax class,
//! ordered by confidence. The same number of top candidates,
//! `min_k floor(alpha * |C_k|)`, is then taken from every class so the
//! augmentation stays class balanced.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::{csv_io, FeatureMatrix};
use crate::error::{Error, Result};
use crate::linalg::RowMatrix;
use crate::sgmm::{self, SgmmModel};

pub const DEFAULT_TAU: f64 = 0.95;
pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoConfig {
    pub tau: f64,
    pub alpha: f64,
}

impl Default for PseudoConfig {
    fn default() -> Self {
        PseudoConfig { tau: DEFAULT_TAU, alpha: DEFAULT_ALPHA }
    }
}

impl PseudoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Argument(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Argument(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Class posteriors and confidences for a set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    pub proba: RowMatrix,
    /// Row maxima.
    pub confidence: Vec<f64>,
    /// Row argmax, 1-based, ties to the smaller id.
    pub classes: Vec<u32>,
    /// Identifier reported for each row; defaults to the row position.
    pub sample_ids: Vec<usize>,
}

impl Scores {
    pub fn from_proba(proba: RowMatrix) -> Self {
        let classes = sgmm::argmax_classes(&proba);
        let confidence = proba
            .iter_rows()
            .zip(&classes)
            .map(|(row, &c)| row[c as usize - 1])
            .collect();
        let sample_ids = (0..proba.rows()).collect();
        Scores { proba, confidence, classes, sample_ids }
    }

    /// Relabels rows with caller-side identifiers, e.g. global indices.
    pub fn with_sample_ids(mut self, ids: Vec<usize>) -> Result<Self> {
        if ids.len() != self.proba.rows() {
            return Err(Error::Argument(format!("{} ids for {} scored rows", ids.len(), self.proba.rows())));
        }
        self.sample_ids = ids;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.confidence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.confidence.is_empty()
    }
}

pub fn score_unlabeled(model: &SgmmModel, features_u: &FeatureMatrix) -> Result<Scores> {
    Ok(Scores::from_proba(sgmm::predict_proba(model, features_u)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub sample: usize,
    pub confidence: f64,
}

/// Per-class candidate lists; `lists[k - 1]` holds class `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSets {
    pub lists: Vec<Vec<Candidate>>,
}

/// Samples above `tau`, grouped by argmax class and sorted by descending
/// confidence (equal confidences by ascending sample id).
pub fn build_candidates(scores: &Scores, cfg: &PseudoConfig, n_classes: usize) -> CandidateSets {
    let mut lists = vec![Vec::new(); n_classes];
    for ((&c, &xi), &sample) in scores.classes.iter().zip(&scores.confidence).zip(&scores.sample_ids) {
        if xi > cfg.tau && (c as usize) <= n_classes {
            lists[c as usize - 1].push(Candidate { sample, confidence: xi });
        }
    }
    for list in &mut lists {
        list.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then(a.sample.cmp(&b.sample)));
    }
    CandidateSets { lists }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PseudoLabel {
    pub sample: usize,
    pub class: u32,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStatus {
    Ok,
    /// Some class had too few candidates; nothing was selected.
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabelSet {
    /// Grouped by class in ascending order, each group in candidate order.
    pub entries: Vec<PseudoLabel>,
    pub per_class_count: usize,
    pub status: SamplingStatus,
}

pub fn proportional_sample(candidates: &CandidateSets, cfg: &PseudoConfig) -> PseudoLabelSet {
    let per_class_count = candidates
        .lists
        .iter()
        .map(|list| (cfg.alpha * list.len() as f64).floor() as usize)
        .min()
        .unwrap_or(0);
    let entries: Vec<PseudoLabel> = candidates
        .lists
        .iter()
        .enumerate()
        .flat_map(|(k, list)| {
            list[..per_class_count].iter().map(move |c| PseudoLabel {
                sample: c.sample,
                class: k as u32 + 1,
                confidence: c.confidence,
            })
        })
        .collect();
    let status = if per_class_count == 0 {
        log::warn!("pseudo-labeling selected nothing: some class has no eligible candidates");
        SamplingStatus::Empty
    } else {
        SamplingStatus::Ok
    };
    PseudoLabelSet { entries, per_class_count, status }
}

/// Global sample indices split into labeled `(index, class)` pairs and
/// unlabeled indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingSet {
    pub labeled: Vec<(usize, u32)>,
    pub unlabeled: Vec<usize>,
}

/// Moves every pseudo-labeled sample from the unlabeled list to the labeled
/// list. Pseudo-label sample ids must be global indices.
pub fn augment(set: &TrainingSet, dp: &PseudoLabelSet) -> Result<TrainingSet> {
    let labeled_ids: HashSet<usize> = set.labeled.iter().map(|&(i, _)| i).collect();
    let unlabeled_ids: HashSet<usize> = set.unlabeled.iter().copied().collect();
    let mut moved = HashSet::with_capacity(dp.entries.len());
    for e in &dp.entries {
        if labeled_ids.contains(&e.sample) {
            return Err(Error::Consistency(format!("sample {} is already labeled", e.sample)));
        }
        if !unlabeled_ids.contains(&e.sample) {
            return Err(Error::Consistency(format!("sample {} is not in the unlabeled set", e.sample)));
        }
        if !moved.insert(e.sample) {
            return Err(Error::Consistency(format!("sample {} pseudo-labeled twice", e.sample)));
        }
    }
    let mut labeled = set.labeled.clone();
    labeled.extend(dp.entries.iter().map(|e| (e.sample, e.class)));
    let unlabeled = set.unlabeled.iter().copied().filter(|i| !moved.contains(i)).collect();
    Ok(TrainingSet { labeled, unlabeled })
}

/// Audit dump: `index,class,confidence`.
pub fn write_pseudo_labels(dp: &PseudoLabelSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(["index", "class", "confidence"]).map_err(|e| csv_io(path, e))?;
    for e in &dp.entries {
        w.write_record([e.sample.to_string(), e.class.to_string(), e.confidence.to_string()])
            .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
