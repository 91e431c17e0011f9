//! Principal component analysis on the pooled training features.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::container::{self, Reader, Writer};
use crate::dataio::FeatureMatrix;
use crate::error::{Error, Result};
use crate::linalg::RowMatrix;

pub const PCA_MAGIC: &[u8; 4] = b"SOPC";

/// Top principal directions of a sample covariance.
///
/// `basis` rows are orthonormal, ordered by descending eigenvalue, and each
/// is signed so that its largest-magnitude entry is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub basis: RowMatrix,
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn target_dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Fits on every row of `m` using the `1/(n-1)` covariance estimator.
pub fn fit_pca(m: &FeatureMatrix, target_dim: usize) -> Result<PcaModel> {
    let (n, d) = (m.n(), m.d());
    let max_dim = d.min(n.saturating_sub(1));
    if target_dim == 0 || target_dim > max_dim {
        return Err(Error::Argument(format!(
            "target_dim {target_dim} outside [1, {max_dim}] for {n} samples of dimension {d}"
        )));
    }
    let mut mean = vec![0.0; d];
    for row in m.rows() {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n as f64);

    let mut centered = DMatrix::from_row_slice(n, d, m.values());
    for (j, mu) in mean.iter().enumerate() {
        centered.column_mut(j).add_scalar_mut(-mu);
    }
    let cov = centered.tr_mul(&centered) / (n as f64 - 1.0);

    let eig = SymmetricEigen::new(cov);
    let values: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateData("input has zero variance".into()));
    }
    let mut order: Vec<usize> = (0..d).collect();
    // stable sort keeps solver order on ties
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let mut basis = RowMatrix::zeros(target_dim, d);
    let mut eigenvalues = Vec::with_capacity(target_dim);
    for (r, &src) in order.iter().take(target_dim).enumerate() {
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for j in 1..d {
            if col[j].abs() > col[pivot].abs() {
                pivot = j;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..d {
            basis.set(r, j, sign * col[j]);
        }
        eigenvalues.push(values[src]);
    }
    let explained_variance_ratio = eigenvalues.iter().map(|v| v / total).collect();
    Ok(PcaModel { mean, basis, eigenvalues, explained_variance_ratio })
}

/// Centers `m` on the model mean and projects onto the basis.
pub fn transform(model: &PcaModel, m: &FeatureMatrix) -> Result<FeatureMatrix> {
    if m.d() != model.input_dim() {
        return Err(Error::Argument(format!(
            "PCA expects dimension {}, got {}",
            model.input_dim(),
            m.d()
        )));
    }
    let t = model.target_dim();
    let d = model.input_dim();
    if m.is_empty() {
        return Ok(FeatureMatrix::empty(t));
    }
    let mut centered = DMatrix::from_row_slice(m.n(), d, m.values());
    for (j, mu) in model.mean.iter().enumerate() {
        centered.column_mut(j).add_scalar_mut(-mu);
    }
    let basis = DMatrix::from_row_slice(t, d, model.basis.as_slice());
    let projected = centered * basis.transpose();
    let mut values = Vec::with_capacity(m.n() * t);
    for i in 0..m.n() {
        values.extend(projected.row(i).iter());
    }
    FeatureMatrix::new(m.n(), t, values)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct VarianceReport {
    pub ratios: Vec<f64>,
    pub cumulative: Vec<f64>,
}

pub fn explained_variance_report(model: &PcaModel) -> VarianceReport {
    let ratios = model.explained_variance_ratio.clone();
    let mut acc = 0.0;
    let cumulative = ratios
        .iter()
        .map(|r| {
            acc += r;
            acc
        })
        .collect();
    VarianceReport { ratios, cumulative }
}

/// `SOPC` layout: dims `[d, target_dim]`, then f64 mean, eigenvalues, basis
/// (row-major) and explained-variance ratios.
pub fn encode_pca(model: &PcaModel) -> Vec<u8> {
    pca_writer(model).into_bytes()
}

pub fn write_pca(model: &PcaModel, path: impl AsRef<Path>) -> Result<()> {
    pca_writer(model).write_to(path.as_ref())
}

fn pca_writer(model: &PcaModel) -> Writer {
    let mut w = Writer::new(PCA_MAGIC, &[model.input_dim() as u32, model.target_dim() as u32]);
    w.f64s(model.mean.iter().copied());
    w.f64s(model.eigenvalues.iter().copied());
    w.f64s(model.basis.as_slice().iter().copied());
    w.f64s(model.explained_variance_ratio.iter().copied());
    w
}

pub fn read_pca(path: impl AsRef<Path>) -> Result<PcaModel> {
    decode_pca(&container::read_file(path.as_ref())?)
}

pub fn decode_pca(bytes: &[u8]) -> Result<PcaModel> {
    let mut r = Reader::parse(bytes, PCA_MAGIC, 2)?;
    let (d, t) = (r.dims[0] as usize, r.dims[1] as usize);
    if d == 0 || t == 0 || t > d {
        return Err(Error::Format(format!("invalid PCA dimensions d={d}, target={t}")));
    }
    r.expect_len(8 * (d + t + t * d + t))?;
    let mean = r.f64s(d);
    let eigenvalues = r.f64s(t);
    let basis = RowMatrix::from_vec(t, d, r.f64s(t * d));
    let explained_variance_ratio = r.f64s(t);
    Ok(PcaModel { mean, basis, eigenvalues, explained_variance_ratio })
}
