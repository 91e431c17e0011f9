//! Small numeric helpers: a row-major table, log-sum-exp and Cholesky-backed
//! Gaussian log densities.

use nalgebra::DMatrix;

/// Dense row-major `rows x cols` table of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RowMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RowMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "RowMatrix::from_vec shape mismatch");
        RowMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub(crate) fn par_rows_mut(&mut self) -> rayon::slice::ChunksExactMut<'_, f64> {
        use rayon::prelude::*;
        self.data.par_chunks_exact_mut(self.cols.max(1))
    }
}

/// `ln(sum(exp(v)))`, shifted by the maximum. Empty or all `-inf` input gives
/// `-inf`.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// Normalizes log-weights in place into probabilities and returns their
/// log-sum-exp.
pub fn softmax_in_place(values: &mut [f64]) -> f64 {
    let lse = logsumexp(values);
    for v in values.iter_mut() {
        *v = (*v - lse).exp();
    }
    lse
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Multivariate normal with a precomputed Cholesky factor.
#[derive(Debug, Clone)]
pub struct Gaussian {
    mean: Vec<f64>,
    // lower triangle, row-major
    chol: Vec<f64>,
    log_norm: f64,
}

impl Gaussian {
    /// `None` when `cov` is not positive definite.
    pub fn new(mean: &[f64], cov: &DMatrix<f64>) -> Option<Self> {
        let d = mean.len();
        let chol = cov.clone().cholesky()?;
        let l = chol.l();
        let mut flat = vec![0.0; d * d];
        let mut log_det = 0.0;
        for i in 0..d {
            for j in 0..=i {
                flat[i * d + j] = l[(i, j)];
            }
            log_det += 2.0 * l[(i, i)].ln();
        }
        if !log_det.is_finite() {
            return None;
        }
        Some(Gaussian {
            mean: mean.to_vec(),
            chol: flat,
            log_norm: -0.5 * (d as f64 * LN_2PI + log_det),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `scratch` must have length `dim()`.
    pub fn log_pdf(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        let d = self.mean.len();
        let mut maha = 0.0;
        for i in 0..d {
            let row = &self.chol[i * d..i * d + i];
            let mut s = x[i] - self.mean[i];
            for (lij, zj) in row.iter().zip(scratch.iter()) {
                s -= lij * zj;
            }
            let z = s / self.chol[i * d + i];
            scratch[i] = z;
            maha += z * z;
        }
        self.log_norm - 0.5 * maha
    }
}

/// Adds `eps * trace(cov) / d` to the diagonal.
pub fn ridge(cov: &mut DMatrix<f64>, eps: f64) {
    let d = cov.nrows();
    if d == 0 {
        return;
    }
    let shift = eps * cov.trace() / d as f64;
    for i in 0..d {
        cov[(i, i)] += shift;
    }
}

/// Weighted mean and (biased, 1/sum(w)) covariance of `rows` about `center`.
pub(crate) fn weighted_scatter<'a>(
    rows: impl Iterator<Item = (&'a [f64], f64)>,
    center: &[f64],
    total_weight: f64,
) -> DMatrix<f64> {
    let d = center.len();
    let mut cov = DMatrix::zeros(d, d);
    let mut diff = vec![0.0; d];
    for (x, w) in rows {
        if w == 0.0 {
            continue;
        }
        for j in 0..d {
            diff[j] = x[j] - center[j];
        }
        for a in 0..d {
            let wa = w * diff[a];
            for b in 0..=a {
                cov[(a, b)] += wa * diff[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..=a {
            let v = cov[(a, b)] / total_weight;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    cov
}
