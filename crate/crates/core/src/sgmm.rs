//! Semi-supervised Gaussian mixture.
//!
//! Each component `l` carries a weight `pi_l`, a full-covariance Gaussian
//! and a class distribution `P(k | l)`. Unlabeled samples contribute
//! `log sum_l pi_l N(x; mu_l, S_l)` to the objective, labeled samples
//! `log sum_l pi_l N(x; mu_l, S_l) P(c | l)`. EM alternates the posterior
//! computation ([`e_step`]) with closed-form updates ([`m_step`]); class
//! posteriors for new samples mix `P(k | l)` by the unlabeled-form
//! responsibilities ([`predict_proba`]).

use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::container::{self, Reader, Writer};
use crate::dataio::{FeatureMatrix, LabelSet};
use crate::error::{Error, Result};
use crate::kmeans;
use crate::linalg::{self, Gaussian, RowMatrix};
use crate::rng::{rng_for, Stream};

pub const MODEL_MAGIC: &[u8; 4] = b"SOGM";
pub const DEFAULT_REG_EPSILON: f64 = 1e-6;
pub const DEFAULT_SMOOTHING: f64 = 1e-6;
/// Total responsibility below which a component counts as collapsed.
pub const COLLAPSE_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SgmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
    /// `L x K`, row `l` is `P(k | l)`.
    pub class_given_component: RowMatrix,
    /// Ridge scale: `reg_epsilon * trace(S) / d` is added to every diagonal.
    pub reg_epsilon: f64,
}

impl SgmmModel {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_given_component.cols()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Checks shapes, normalization, symmetry and positive definiteness.
    pub fn validate(&self) -> Result<()> {
        let l = self.n_components();
        let d = self.dim();
        if l == 0 || d == 0 || self.n_classes() == 0 {
            return Err(Error::Argument("model needs L, K, d >= 1".into()));
        }
        if self.means.len() != l || self.covariances.len() != l || self.class_given_component.rows() != l {
            return Err(Error::Argument("per-component arrays disagree on L".into()));
        }
        let wsum: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|&w| !(w >= 0.0)) || (wsum - 1.0).abs() > 1e-9 {
            return Err(Error::Data(format!("mixing weights must be >= 0 and sum to 1 (sum {wsum})")));
        }
        for (j, (mu, cov)) in self.means.iter().zip(&self.covariances).enumerate() {
            if mu.len() != d || cov.nrows() != d || cov.ncols() != d {
                return Err(Error::Argument(format!("component {j} has inconsistent dimensions")));
            }
            if mu.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("component {j} has a non-finite mean")));
            }
            for a in 0..d {
                for b in 0..a {
                    if (cov[(a, b)] - cov[(b, a)]).abs() > 1e-10 {
                        return Err(Error::Data(format!("covariance {j} is not symmetric")));
                    }
                }
            }
            if Gaussian::new(mu, cov).is_none() {
                return Err(Error::Data(format!("covariance {j} is not positive definite")));
            }
        }
        for j in 0..l {
            let row = self.class_given_component.row(j);
            let s: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                return Err(Error::Data(format!("P(k|l) row {j} is not a distribution (sum {s})")));
            }
        }
        Ok(())
    }

    fn densities(&self) -> Result<Vec<Gaussian>> {
        self.means
            .iter()
            .zip(&self.covariances)
            .enumerate()
            .map(|(j, (mu, cov))| {
                Gaussian::new(mu, cov)
                    .ok_or_else(|| Error::Data(format!("covariance {j} is not positive definite")))
            })
            .collect()
    }

    fn check_dim(&self, m: &FeatureMatrix) -> Result<()> {
        if m.d() != self.dim() {
            return Err(Error::Argument(format!(
                "model dimension {} but features have dimension {}",
                self.dim(),
                m.d()
            )));
        }
        Ok(())
    }
}

/// Unlabeled and labeled training partitions for one EM fit.
#[derive(Debug, Clone, Copy)]
pub struct EmData<'a> {
    pub unlabeled: &'a FeatureMatrix,
    pub labeled: &'a FeatureMatrix,
    /// 1-based class per labeled row.
    pub labels: &'a [u32],
}

impl<'a> EmData<'a> {
    pub fn new(unlabeled: &'a FeatureMatrix, labeled: &'a FeatureMatrix, labels: &'a [u32]) -> Result<Self> {
        if labels.len() != labeled.n() {
            return Err(Error::Argument(format!(
                "{} labels for {} labeled rows",
                labels.len(),
                labeled.n()
            )));
        }
        if unlabeled.d() != labeled.d() && !labeled.is_empty() && !unlabeled.is_empty() {
            return Err(Error::Argument("labeled and unlabeled dimensions differ".into()));
        }
        if unlabeled.is_empty() && labeled.is_empty() {
            return Err(Error::Argument("no training samples".into()));
        }
        Ok(EmData { unlabeled, labeled, labels })
    }

    pub fn total(&self) -> usize {
        self.unlabeled.n() + self.labeled.n()
    }

    fn dim(&self) -> usize {
        if self.unlabeled.is_empty() { self.labeled.d() } else { self.unlabeled.d() }
    }

    fn check(&self, model: &SgmmModel) -> Result<()> {
        if self.dim() != model.dim() {
            return Err(Error::Argument(format!(
                "model dimension {} but features have dimension {}",
                model.dim(),
                self.dim()
            )));
        }
        let k = model.n_classes() as u32;
        if let Some(&c) = self.labels.iter().find(|&&c| c == 0 || c > k) {
            return Err(Error::Range(format!("class {c} outside [1, {k}]")));
        }
        Ok(())
    }

    /// Unlabeled rows followed by labeled rows.
    fn all_rows(&self) -> impl Iterator<Item = &'a [f64]> + 'a {
        self.unlabeled.rows().chain(self.labeled.rows())
    }
}

/// Posteriors over components: `unlabeled` rows are `gamma_il`, `labeled`
/// rows are the label-conditioned `gamma_il|c_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    pub unlabeled: RowMatrix,
    pub labeled: RowMatrix,
}

/// Writes `log pi_l + log N(x; l)` (+ `log P(class | l)`) into `out` for
/// every component.
fn log_terms(
    log_w: &[f64],
    dens: &[Gaussian],
    log_p: Option<&RowMatrix>,
    class: Option<u32>,
    x: &[f64],
    out: &mut [f64],
    scratch: &mut [f64],
) {
    for (j, o) in out.iter_mut().enumerate() {
        let mut v = log_w[j] + dens[j].log_pdf(x, scratch);
        if let (Some(lp), Some(c)) = (log_p, class) {
            v += lp.get(j, c as usize - 1);
        }
        *o = v;
    }
}

struct Prepared {
    log_w: Vec<f64>,
    dens: Vec<Gaussian>,
    log_p: RowMatrix,
}

fn prepare(model: &SgmmModel) -> Result<Prepared> {
    let log_w = model.weights.iter().map(|w| w.ln()).collect();
    let p = &model.class_given_component;
    let log_p = RowMatrix::from_vec(p.rows(), p.cols(), p.as_slice().iter().map(|v| v.ln()).collect());
    Ok(Prepared { log_w, dens: model.densities()?, log_p })
}

/// Fills `resp` with normalized posteriors and returns each row's
/// log-sum-exp.
fn posterior_rows(
    prep: &Prepared,
    features: &FeatureMatrix,
    labels: Option<&[u32]>,
    resp: &mut RowMatrix,
) -> Vec<f64> {
    let d = features.d();
    let mut lse = vec![0.0; features.n()];
    resp.par_rows_mut()
        .zip(lse.par_iter_mut())
        .enumerate()
        .for_each(|(i, (out, lse_i))| {
            let mut scratch = vec![0.0; d];
            let class = labels.map(|c| c[i]);
            log_terms(&prep.log_w, &prep.dens, Some(&prep.log_p), class, features.row(i), out, &mut scratch);
            *lse_i = linalg::softmax_in_place(out);
        });
    lse
}

fn e_pass(model: &SgmmModel, data: &EmData<'_>) -> Result<(Responsibilities, f64)> {
    data.check(model)?;
    let prep = prepare(model)?;
    let l = model.n_components();
    let mut unlabeled = RowMatrix::zeros(data.unlabeled.n(), l);
    let mut labeled = RowMatrix::zeros(data.labeled.n(), l);
    let lse_u = posterior_rows(&prep, data.unlabeled, None, &mut unlabeled);
    let lse_l = posterior_rows(&prep, data.labeled, Some(data.labels), &mut labeled);
    if let Some(i) = lse_l.iter().position(|&v| v == f64::NEG_INFINITY) {
        return Err(Error::InconsistentLabel { sample: i });
    }
    let ll = lse_u.iter().sum::<f64>() + lse_l.iter().sum::<f64>();
    Ok((Responsibilities { unlabeled, labeled }, ll))
}

/// Component posteriors for both partitions, computed in log space.
pub fn e_step(model: &SgmmModel, data: &EmData<'_>) -> Result<Responsibilities> {
    e_pass(model, data).map(|(r, _)| r)
}

/// Joint log-likelihood of the unlabeled and labeled partitions.
pub fn log_likelihood(model: &SgmmModel, data: &EmData<'_>) -> Result<f64> {
    data.check(model)?;
    let prep = prepare(model)?;
    let d = model.dim();
    let l = model.n_components();
    let row_ll = |x: &[f64], class: Option<u32>| {
        let mut scratch = vec![0.0; d];
        let mut terms = vec![0.0; l];
        log_terms(&prep.log_w, &prep.dens, Some(&prep.log_p), class, x, &mut terms, &mut scratch);
        linalg::logsumexp(&terms)
    };
    let u: Vec<f64> = (0..data.unlabeled.n())
        .into_par_iter()
        .map(|i| row_ll(data.unlabeled.row(i), None))
        .collect();
    let lab: Vec<f64> = (0..data.labeled.n())
        .into_par_iter()
        .map(|i| row_ll(data.labeled.row(i), Some(data.labels[i])))
        .collect();
    Ok(u.iter().sum::<f64>() + lab.iter().sum::<f64>())
}

/// Which mean the covariance update centers on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceCentering {
    /// The freshly updated mean (standard EM).
    #[default]
    Updated,
    /// The mean from the previous iteration, as in the literal update rule.
    Previous,
}

#[derive(Debug, Clone, Copy)]
pub struct MStepOptions<'a> {
    pub reg_epsilon: f64,
    /// Pseudo-count added to every class in the `P(k | l)` update.
    pub smoothing: f64,
    /// When set, covariances are centered on these means instead of the
    /// updated ones.
    pub previous_means: Option<&'a [Vec<f64>]>,
}

impl Default for MStepOptions<'_> {
    fn default() -> Self {
        MStepOptions { reg_epsilon: DEFAULT_REG_EPSILON, smoothing: DEFAULT_SMOOTHING, previous_means: None }
    }
}

/// Closed-form parameter updates from responsibilities.
///
/// Means and covariances pool both partitions; weights divide by the total
/// sample count; `P(k | l)` uses labeled responsibilities only, plus the
/// smoothing pseudo-count. Covariances are ridged afterwards. A component
/// whose total responsibility falls below [`COLLAPSE_THRESHOLD`] is reseeded
/// at the least confidently explained sample with the pooled covariance and
/// weight `1/N` before the weights are renormalized.
pub fn m_step(resp: &Responsibilities, data: &EmData<'_>, n_classes: usize, opts: &MStepOptions<'_>) -> Result<SgmmModel> {
    let l = resp.unlabeled.cols().max(resp.labeled.cols());
    let d = data.dim();
    let n_total = data.total() as f64;
    if resp.unlabeled.rows() != data.unlabeled.n() || resp.labeled.rows() != data.labeled.n() {
        return Err(Error::Argument("responsibility rows do not match the data".into()));
    }
    if n_classes == 0 {
        return Err(Error::Argument("n_classes must be >= 1".into()));
    }
    if let Some(&c) = data.labels.iter().find(|&&c| c == 0 || c as usize > n_classes) {
        return Err(Error::Range(format!("class {c} outside [1, {n_classes}]")));
    }
    let weights_of = |j: usize| {
        (0..data.unlabeled.n())
            .map(move |i| resp.unlabeled.get(i, j))
            .chain((0..data.labeled.n()).map(move |i| resp.labeled.get(i, j)))
    };

    let mut totals = vec![0.0; l];
    let mut means = vec![vec![0.0; d]; l];
    for j in 0..l {
        for (x, g) in data.all_rows().zip(weights_of(j)) {
            totals[j] += g;
            for (m, v) in means[j].iter_mut().zip(x) {
                *m += g * v;
            }
        }
        if totals[j] >= COLLAPSE_THRESHOLD {
            means[j].iter_mut().for_each(|m| *m /= totals[j]);
        }
    }

    let mut pooled: Option<DMatrix<f64>> = None;
    let mut pooled_cov = || -> DMatrix<f64> {
        pooled
            .get_or_insert_with(|| {
                let mut mu = vec![0.0; d];
                for x in data.all_rows() {
                    mu.iter_mut().zip(x).for_each(|(m, v)| *m += v);
                }
                mu.iter_mut().for_each(|m| *m /= n_total);
                let mut cov = linalg::weighted_scatter(data.all_rows().map(|x| (x, 1.0)), &mu, n_total);
                linalg::ridge(&mut cov, opts.reg_epsilon);
                if Gaussian::new(&mu, &cov).is_none() {
                    cov = DMatrix::identity(d, d);
                }
                cov
            })
            .clone()
    };

    let mut weights = vec![0.0; l];
    let mut covariances = Vec::with_capacity(l);
    let mut class_given_component = RowMatrix::zeros(l, n_classes);
    let mut reseeded: Vec<usize> = Vec::new();
    for j in 0..l {
        if totals[j] < COLLAPSE_THRESHOLD {
            let sample = least_explained(resp, &reseeded);
            reseeded.push(sample);
            means[j] = data.all_rows().nth(sample).unwrap().to_vec();
            covariances.push(pooled_cov());
            weights[j] = 1.0 / n_total;
            class_given_component.row_mut(j).fill(1.0 / n_classes as f64);
            continue;
        }
        let center = opts.previous_means.map_or(&means[j], |prev| &prev[j]);
        let mut cov = linalg::weighted_scatter(data.all_rows().zip(weights_of(j)), center, totals[j]);
        linalg::ridge(&mut cov, opts.reg_epsilon);
        if Gaussian::new(&means[j], &cov).is_none() {
            cov = pooled_cov();
        }
        covariances.push(cov);
        weights[j] = totals[j] / n_total;

        let row = class_given_component.row_mut(j);
        let mut labeled_total = 0.0;
        for (i, &c) in data.labels.iter().enumerate() {
            let g = resp.labeled.get(i, j);
            row[c as usize - 1] += g;
            labeled_total += g;
        }
        let denom = labeled_total + n_classes as f64 * opts.smoothing;
        if denom > 0.0 {
            row.iter_mut().for_each(|p| *p = (*p + opts.smoothing) / denom);
        } else {
            row.fill(1.0 / n_classes as f64);
        }
    }
    if !reseeded.is_empty() {
        let s: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= s);
    }
    Ok(SgmmModel { weights, means, covariances, class_given_component, reg_epsilon: opts.reg_epsilon })
}

/// Sample (in unlabeled-then-labeled order) whose largest responsibility is
/// smallest, skipping already used samples.
fn least_explained(resp: &Responsibilities, used: &[usize]) -> usize {
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    let rows = resp.unlabeled.iter_rows().chain(resp.labeled.iter_rows());
    for (i, row) in rows.enumerate() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m < best_v && !used.contains(&i) {
            best_v = m;
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EmConfig {
    pub max_iter: usize,
    /// Stop once the log-likelihood improves by less than this.
    pub tol: f64,
    #[serde(default)]
    pub centering: CovarianceCentering,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig { max_iter: 200, tol: 1e-3, centering: CovarianceCentering::Updated }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::Argument("max_iter must be >= 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Argument(format!("tol must be >= 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Result of [`fit_em`]: the final model and the log-likelihood of every
/// visited parameter set, starting with the initial one.
#[derive(Debug, Clone)]
pub struct EmFit {
    pub model: SgmmModel,
    pub trace: Vec<f64>,
}

pub fn fit_em(model: SgmmModel, data: &EmData<'_>, cfg: &EmConfig) -> Result<EmFit> {
    cfg.validate()?;
    let n_classes = model.n_classes();
    let smoothing = DEFAULT_SMOOTHING;
    let (mut resp, mut ll) = e_pass(&model, data)?;
    if !ll.is_finite() {
        return Err(Error::Numerical { iteration: 0, what: format!("initial log-likelihood is {ll}") });
    }
    let mut model = model;
    let mut trace = vec![ll];
    for iteration in 1..=cfg.max_iter {
        let prev = match cfg.centering {
            CovarianceCentering::Updated => None,
            CovarianceCentering::Previous => Some(model.means.as_slice()),
        };
        let opts = MStepOptions { reg_epsilon: model.reg_epsilon, smoothing, previous_means: prev };
        let next = m_step(&resp, data, n_classes, &opts)?;
        if has_nan(&next) {
            return Err(Error::Numerical { iteration, what: "NaN in model parameters".into() });
        }
        let (next_resp, next_ll) = e_pass(&next, data).map_err(|e| match e {
            Error::Data(what) => Error::Numerical { iteration, what },
            other => other,
        })?;
        if !next_ll.is_finite() {
            return Err(Error::Numerical { iteration, what: format!("log-likelihood is {next_ll}") });
        }
        trace.push(next_ll);
        let improvement = next_ll - ll;
        model = next;
        resp = next_resp;
        ll = next_ll;
        log::debug!("em iteration {iteration}: log-likelihood {ll:.6} (+{improvement:.3e})");
        if improvement < cfg.tol {
            break;
        }
    }
    Ok(EmFit { model, trace })
}

fn has_nan(m: &SgmmModel) -> bool {
    m.weights.iter().any(|v| v.is_nan())
        || m.means.iter().flatten().any(|v| v.is_nan())
        || m.covariances.iter().any(|c| c.iter().any(|v| v.is_nan()))
        || m.class_given_component.as_slice().iter().any(|v| v.is_nan())
}

/// Class posteriors `p_ik = sum_l P(k | l) gamma_il` with unlabeled-form
/// responsibilities.
pub fn predict_proba(model: &SgmmModel, features: &FeatureMatrix) -> Result<RowMatrix> {
    model.check_dim(features)?;
    let prep = prepare(model)?;
    let l = model.n_components();
    let k = model.n_classes();
    let d = model.dim();
    let mut out = RowMatrix::zeros(features.n(), k);
    out.par_rows_mut().enumerate().for_each(|(i, row)| {
        let mut scratch = vec![0.0; d];
        let mut gamma = vec![0.0; l];
        log_terms(&prep.log_w, &prep.dens, None, None, features.row(i), &mut gamma, &mut scratch);
        linalg::softmax_in_place(&mut gamma);
        for (j, g) in gamma.iter().enumerate() {
            for (o, p) in row.iter_mut().zip(model.class_given_component.row(j)) {
                *o += p * g;
            }
        }
    });
    Ok(out)
}

/// Row-wise argmax as 1-based class ids; ties go to the smaller id.
pub fn argmax_classes(proba: &RowMatrix) -> Vec<u32> {
    proba
        .iter_rows()
        .map(|row| {
            let mut best = 0;
            for (k, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = k;
                }
            }
            best as u32 + 1
        })
        .collect()
}

pub fn predict(model: &SgmmModel, features: &FeatureMatrix) -> Result<Vec<u32>> {
    Ok(argmax_classes(&predict_proba(model, features)?))
}

/// Initialization knobs for [`kmeanspp_init_with`].
#[derive(Debug, Clone, Copy)]
pub struct InitOptions {
    pub n_components: usize,
    /// Defaults to the largest class id in the label set (at least 1).
    pub n_classes: Option<usize>,
    pub seed: u64,
    pub reg_epsilon: f64,
}

/// K-means++ seeding and Lloyd refinement over all rows of `features`;
/// `labels` indexes into those rows.
pub fn kmeanspp_init(features: &FeatureMatrix, labels: &LabelSet, n_components: usize, seed: u64) -> Result<SgmmModel> {
    kmeanspp_init_with(
        features,
        labels,
        &InitOptions { n_components, n_classes: None, seed, reg_epsilon: DEFAULT_REG_EPSILON },
    )
}

/// Weights are cluster-size fractions, means are centroids, covariances
/// are ridged within-cluster covariances, and `P(k | l)` is the add-one
/// smoothed class histogram of each cluster's labeled members. Clusters with
/// fewer than two members or a singular scatter get a ridged multiple of
/// the identity scaled to the average pooled variance; empty clusters get
/// weight `1/N` before renormalization.
pub fn kmeanspp_init_with(features: &FeatureMatrix, labels: &LabelSet, opts: &InitOptions) -> Result<SgmmModel> {
    let n = features.n();
    let d = features.d();
    let l = opts.n_components;
    if l == 0 || n < l {
        return Err(Error::Capacity(format!("{n} samples cannot seed {l} components")));
    }
    let k = opts.n_classes.unwrap_or(labels.num_classes() as usize).max(1);
    if let Some((i, c)) = labels.iter().find(|&(i, c)| i >= n || c as usize > k) {
        return Err(Error::Range(format!("label ({i}, {c}) outside {n} samples / {k} classes")));
    }
    let mut rng = rng_for(opts.seed, Stream::KMeans);
    let seeds = kmeans::plus_plus_seeds(features, l, &mut rng);
    let (centers, assign) = kmeans::lloyd(features, seeds, kmeans::MAX_LLOYD_ITER);

    let mut global_mean = vec![0.0; d];
    for x in features.rows() {
        global_mean.iter_mut().zip(x).for_each(|(m, v)| *m += v);
    }
    global_mean.iter_mut().for_each(|m| *m /= n as f64);
    let global = linalg::weighted_scatter(features.rows().map(|x| (x, 1.0)), &global_mean, n as f64);
    let scale = match global.trace() / d as f64 {
        s if s > 0.0 => s,
        _ => 1.0,
    };

    let mut counts = vec![0usize; l];
    for &a in &assign {
        counts[a] += 1;
    }
    let mut weights = Vec::with_capacity(l);
    let mut covariances = Vec::with_capacity(l);
    let mut class_given_component = RowMatrix::zeros(l, k);
    for j in 0..l {
        let members = features.rows().zip(&assign).filter(|(_, &a)| a == j).map(|(x, _)| (x, 1.0));
        let mut cov = if counts[j] >= 2 {
            linalg::weighted_scatter(members, &centers[j], counts[j] as f64)
        } else {
            DMatrix::zeros(d, d)
        };
        linalg::ridge(&mut cov, opts.reg_epsilon);
        if Gaussian::new(&centers[j], &cov).is_none() {
            cov = DMatrix::identity(d, d) * scale;
            linalg::ridge(&mut cov, opts.reg_epsilon);
        }
        covariances.push(cov);
        weights.push(if counts[j] == 0 { 1.0 } else { counts[j] as f64 } / n as f64);
    }
    for (i, c) in labels.iter() {
        let j = assign[i];
        let v = class_given_component.get(j, c as usize - 1);
        class_given_component.set(j, c as usize - 1, v + 1.0);
    }
    for j in 0..l {
        let row = class_given_component.row_mut(j);
        let labeled: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p = (*p + 1.0) / (labeled + k as f64));
    }
    let s: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= s);
    Ok(SgmmModel { weights, means: centers, covariances, class_given_component, reg_epsilon: opts.reg_epsilon })
}

/// `SOGM` layout: dims `[L, K, d]`, then f64 weights, means, covariances
/// (each row-major) and the `P(k | l)` table.
pub fn encode_model(model: &SgmmModel) -> Vec<u8> {
    model_writer(model).into_bytes()
}

pub fn write_model(model: &SgmmModel, path: impl AsRef<Path>) -> Result<()> {
    model_writer(model).write_to(path.as_ref())
}

fn model_writer(model: &SgmmModel) -> Writer {
    let (l, k, d) = (model.n_components(), model.n_classes(), model.dim());
    let mut w = Writer::new(MODEL_MAGIC, &[l as u32, k as u32, d as u32]);
    w.f64s(model.weights.iter().copied());
    w.f64s(model.means.iter().flatten().copied());
    for cov in &model.covariances {
        // nalgebra is column-major; the covariance is symmetric but write it row-major anyway
        w.f64s(cov.transpose().iter().copied());
    }
    w.f64s(model.class_given_component.as_slice().iter().copied());
    w
}

pub fn read_model(path: impl AsRef<Path>) -> Result<SgmmModel> {
    decode_model(&container::read_file(path.as_ref())?)
}

pub fn decode_model(bytes: &[u8]) -> Result<SgmmModel> {
    let mut r = Reader::parse(bytes, MODEL_MAGIC, 3)?;
    let (l, k, d) = (r.dims[0] as usize, r.dims[1] as usize, r.dims[2] as usize);
    if l == 0 || k == 0 || d == 0 {
        return Err(Error::Format(format!("invalid model dimensions L={l}, K={k}, d={d}")));
    }
    r.expect_len(8 * (l + l * d + l * d * d + l * k))?;
    let weights = r.f64s(l);
    let means = r.f64s(l * d).chunks_exact(d).map(<[f64]>::to_vec).collect();
    let covariances = (0..l).map(|_| DMatrix::from_row_slice(d, d, &r.f64s(d * d))).collect();
    let class_given_component = RowMatrix::from_vec(l, k, r.f64s(l * k));
    let model = SgmmModel { weights, means, covariances, class_given_component, reg_epsilon: DEFAULT_REG_EPSILON };
    model.validate()?;
    Ok(model)
}
