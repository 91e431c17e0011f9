//! Softmax classification head trained semi-supervised, used as the
//! ablation baseline.
//!
//! The loss is cross-entropy on labeled samples plus a ramped weight times
//! the self-training loss on unlabeled samples whose confidence exceeds
//! `tau`, each scored against its own current argmax. Training is plain
//! minibatch gradient descent with analytic gradients.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataio::FeatureMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, RowMatrix};
use crate::rng::{rng_for, Stream};
use crate::sgmm::argmax_classes;

/// Affine scores `W x + b` followed by softmax. `weights` is `K x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxHead {
    pub weights: RowMatrix,
    pub bias: Vec<f64>,
}

impl SoftmaxHead {
    pub fn zeros(n_classes: usize, dim: usize) -> Self {
        SoftmaxHead { weights: RowMatrix::zeros(n_classes, dim), bias: vec![0.0; n_classes] }
    }

    pub fn n_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    /// Flattened parameters, weights row-major then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.weights.as_slice().to_vec();
        p.extend_from_slice(&self.bias);
        p
    }

    pub fn from_params(n_classes: usize, dim: usize, params: &[f64]) -> Self {
        let split = n_classes * dim;
        SoftmaxHead {
            weights: RowMatrix::from_vec(n_classes, dim, params[..split].to_vec()),
            bias: params[split..].to_vec(),
        }
    }

    fn proba_row(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.bias[k] + self.weights.row(k).iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        linalg::softmax_in_place(out);
    }

    fn check(&self, m: &FeatureMatrix) -> Result<()> {
        if m.d() != self.dim() {
            return Err(Error::Argument(format!("head expects dimension {}, got {}", self.dim(), m.d())));
        }
        Ok(())
    }
}

/// Gradient with the same layout as [`SoftmaxHead`].
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradient {
    pub weights: RowMatrix,
    pub bias: Vec<f64>,
}

impl HeadGradient {
    fn zeros(k: usize, d: usize) -> Self {
        HeadGradient { weights: RowMatrix::zeros(k, d), bias: vec![0.0; k] }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut p = self.weights.as_slice().to_vec();
        p.extend_from_slice(&self.bias);
        p
    }

    /// Accumulates `scale * (p - onehot(target)) x^T`.
    fn add_sample(&mut self, x: &[f64], p: &[f64], target: usize, scale: f64) {
        for (k, &pk) in p.iter().enumerate() {
            let ds = scale * (pk - if k == target { 1.0 } else { 0.0 });
            self.bias[k] += ds;
            for (g, v) in self.weights.row_mut(k).iter_mut().zip(x) {
                *g += ds * v;
            }
        }
    }
}

pub fn head_proba(head: &SoftmaxHead, features: &FeatureMatrix) -> Result<RowMatrix> {
    head.check(features)?;
    let mut out = RowMatrix::zeros(features.n(), head.n_classes());
    for i in 0..features.n() {
        head.proba_row(features.row(i), out.row_mut(i));
    }
    Ok(out)
}

/// Mean cross-entropy of the labeled rows and its gradient.
pub fn supervised_loss_and_grad(
    head: &SoftmaxHead,
    features_l: &FeatureMatrix,
    labels_l: &[u32],
    rows: Option<&[usize]>,
) -> Result<(f64, HeadGradient)> {
    head.check(features_l)?;
    if labels_l.len() != features_l.n() {
        return Err(Error::Argument(format!("{} labels for {} rows", labels_l.len(), features_l.n())));
    }
    let all: Vec<usize>;
    let rows = match rows {
        Some(r) => r,
        None => {
            all = (0..features_l.n()).collect();
            &all
        }
    };
    if rows.is_empty() {
        return Err(Error::Argument("supervised loss needs at least one labeled sample".into()));
    }
    let k = head.n_classes();
    let scale = 1.0 / rows.len() as f64;
    let mut grad = HeadGradient::zeros(k, head.dim());
    let mut p = vec![0.0; k];
    let mut loss = 0.0;
    for &i in rows {
        let c = labels_l[i] as usize;
        if c == 0 || c > k {
            return Err(Error::Range(format!("class {c} outside [1, {k}]")));
        }
        let x = features_l.row(i);
        head.proba_row(x, &mut p);
        loss -= p[c - 1].ln();
        grad.add_sample(x, &p, c - 1, scale);
    }
    Ok((loss * scale, grad))
}

pub fn supervised_loss(head: &SoftmaxHead, features_l: &FeatureMatrix, labels_l: &[u32]) -> Result<f64> {
    supervised_loss_and_grad(head, features_l, labels_l, None).map(|(l, _)| l)
}

/// Self-training loss over the given unlabeled rows: confident rows are
/// scored against their own argmax; the mean runs over all rows. The
/// argmax and the confidence mask are held fixed when differentiating.
pub fn unsupervised_loss_and_grad(
    head: &SoftmaxHead,
    features_u: &FeatureMatrix,
    tau: f64,
    rows: Option<&[usize]>,
) -> Result<(f64, HeadGradient)> {
    head.check(features_u)?;
    let k = head.n_classes();
    let mut grad = HeadGradient::zeros(k, head.dim());
    let n = rows.map_or(features_u.n(), <[usize]>::len);
    if n == 0 {
        return Ok((0.0, grad));
    }
    let scale = 1.0 / n as f64;
    let mut p = vec![0.0; k];
    let mut loss = 0.0;
    for r in 0..n {
        let i = rows.map_or(r, |rs| rs[r]);
        let x = features_u.row(i);
        head.proba_row(x, &mut p);
        let mut best = 0;
        for j in 1..k {
            if p[j] > p[best] {
                best = j;
            }
        }
        if p[best] > tau {
            loss -= p[best].ln();
            grad.add_sample(x, &p, best, scale);
        }
    }
    Ok((loss * scale, grad))
}

pub fn unsupervised_loss(head: &SoftmaxHead, features_u: &FeatureMatrix, tau: f64) -> Result<f64> {
    unsupervised_loss_and_grad(head, features_u, tau, None).map(|(l, _)| l)
}

/// `lambda_max * min(1, t / t_ramp)`.
pub fn ramp_weight(t: usize, lambda_max: f64, t_ramp: usize) -> f64 {
    lambda_max * (t as f64 / t_ramp.max(1) as f64).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub lambda_max: f64,
    /// Ramp length in optimizer steps; `None` means half of all steps.
    pub t_ramp: Option<usize>,
    pub tau: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            lambda_max: 1.0,
            t_ramp: None,
            tau: 0.95,
            learning_rate: 0.1,
            epochs: 100,
            batch_size: 256,
            seed: 0,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_max >= 0.0) {
            return Err(Error::Argument("lambda_max must be >= 0".into()));
        }
        if self.t_ramp == Some(0) {
            return Err(Error::Argument("t_ramp must be >= 1".into()));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Argument(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Argument("learning_rate must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Argument("epochs and batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BaselineFit {
    pub head: SoftmaxHead,
    /// Full-data total loss after each epoch.
    pub loss_trace: Vec<f64>,
    pub steps: usize,
    pub t_ramp: usize,
}

/// Minibatch gradient descent from a zero-initialized head.
///
/// The schedule is driven by the labeled set: each epoch has
/// `ceil(n_l / batch_size)` steps and the unlabeled set is spread evenly
/// over those steps. Labeled and unlabeled shuffles use separate streams, so
/// `lambda_max = 0` reproduces supervised-only training exactly.
pub fn train_baseline(
    features_l: &FeatureMatrix,
    labels_l: &[u32],
    features_u: &FeatureMatrix,
    n_classes: usize,
    cfg: &BaselineConfig,
) -> Result<BaselineFit> {
    cfg.validate()?;
    if features_l.is_empty() {
        return Err(Error::Argument("baseline training needs labeled samples".into()));
    }
    if !features_u.is_empty() && features_u.d() != features_l.d() {
        return Err(Error::Argument("labeled and unlabeled dimensions differ".into()));
    }
    let (n_l, n_u) = (features_l.n(), features_u.n());
    let steps_per_epoch = n_l.div_ceil(cfg.batch_size);
    let u_batch = n_u.div_ceil(steps_per_epoch);
    let total_steps = steps_per_epoch * cfg.epochs;
    let t_ramp = cfg.t_ramp.unwrap_or((total_steps / 2).max(1));

    let mut head = SoftmaxHead::zeros(n_classes, features_l.d());
    let mut rng_l = rng_for(cfg.seed, Stream::BaselineLabeled);
    let mut rng_u = rng_for(cfg.seed, Stream::BaselineUnlabeled);
    let mut order_l: Vec<usize> = (0..n_l).collect();
    let mut order_u: Vec<usize> = (0..n_u).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    let mut t = 0;
    for _ in 0..cfg.epochs {
        order_l.shuffle(&mut rng_l);
        order_u.shuffle(&mut rng_u);
        for s in 0..steps_per_epoch {
            let lb = &order_l[s * cfg.batch_size..((s + 1) * cfg.batch_size).min(n_l)];
            let lambda = ramp_weight(t, cfg.lambda_max, t_ramp);
            let (mut loss, mut grad) = supervised_loss_and_grad(&head, features_l, labels_l, Some(lb))?;
            if lambda > 0.0 && n_u > 0 {
                let ub = &order_u[(s * u_batch).min(n_u)..((s + 1) * u_batch).min(n_u)];
                let (lu, gu) = unsupervised_loss_and_grad(&head, features_u, cfg.tau, Some(ub))?;
                loss += lambda * lu;
                for (g, v) in grad.bias.iter_mut().zip(&gu.bias) {
                    *g += lambda * v;
                }
                for k in 0..n_classes {
                    for (g, v) in grad.weights.row_mut(k).iter_mut().zip(gu.weights.row(k)) {
                        *g += lambda * v;
                    }
                }
            }
            if !loss.is_finite() {
                return Err(Error::Numerical { iteration: t, what: format!("baseline loss is {loss}") });
            }
            for (w, g) in head.bias.iter_mut().zip(&grad.bias) {
                *w -= cfg.learning_rate * g;
            }
            for k in 0..n_classes {
                for (w, g) in head.weights.row_mut(k).iter_mut().zip(grad.weights.row(k)) {
                    *w -= cfg.learning_rate * g;
                }
            }
            t += 1;
        }
        let lambda = ramp_weight(t, cfg.lambda_max, t_ramp);
        let mut epoch_loss = supervised_loss(&head, features_l, labels_l)?;
        if lambda > 0.0 {
            epoch_loss += lambda * unsupervised_loss(&head, features_u, cfg.tau)?;
        }
        if !epoch_loss.is_finite() {
            return Err(Error::Numerical { iteration: t, what: format!("baseline loss is {epoch_loss}") });
        }
        loss_trace.push(epoch_loss);
    }
    Ok(BaselineFit { head, loss_trace, steps: t, t_ramp })
}

pub fn predict(head: &SoftmaxHead, features: &FeatureMatrix) -> Result<Vec<u32>> {
    Ok(argmax_classes(&head_proba(head, features)?))
}
