//! Independent reference implementations used as test oracles.
//!
//! Everything here is deliberately naive straight-line code over nested
//! `Vec`s: Gauss-Jordan elimination instead of Cholesky, cyclic Jacobi
//! rotations instead of a library eigensolver, linear scans instead of
//! sorting. None of it calls into the library's numerical routines.

#![allow(dead_code, clippy::needless_range_loop, clippy::too_many_arguments)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use semioccam::linalg::RowMatrix;
use semioccam::{FeatureMatrix, SgmmModel};

pub type Mat = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(r: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(r)
}

pub fn to_mat(m: &DMatrix<f64>) -> Mat {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn rows_of(m: &FeatureMatrix) -> Mat {
    m.rows().map(<[f64]>::to_vec).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Inverse and log-determinant by Gauss-Jordan elimination with partial
/// pivoting. Panics on a singular matrix.
pub fn inverse_logdet(a: &Mat) -> (Mat, f64) {
    let n = a.len();
    let mut m: Mat = a.clone();
    let mut inv: Mat = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut logdet = 0.0;
    for col in 0..n {
        let mut p = col;
        for r in col + 1..n {
            if m[r][col].abs() > m[p][col].abs() {
                p = r;
            }
        }
        assert!(m[p][col] != 0.0, "singular matrix");
        m.swap(col, p);
        inv.swap(col, p);
        let pivot = m[col][col];
        logdet += pivot.abs().ln();
        for j in 0..n {
            m[col][j] /= pivot;
            inv[col][j] /= pivot;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                for j in 0..n {
                    m[r][j] -= f * m[col][j];
                    inv[r][j] -= f * inv[col][j];
                }
            }
        }
    }
    (inv, logdet)
}

/// Multivariate normal log-density by explicit inverse.
pub fn log_normal(x: &[f64], mu: &[f64], cov: &Mat) -> f64 {
    let d = x.len();
    let (inv, logdet) = inverse_logdet(cov);
    let diff: Vec<f64> = x.iter().zip(mu).map(|(a, b)| a - b).collect();
    let mut q = 0.0;
    for i in 0..d {
        for j in 0..d {
            q += diff[i] * inv[i][j] * diff[j];
        }
    }
    -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + q)
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Mixture parameters as plain vectors.
#[derive(Debug, Clone)]
pub struct Params {
    pub weights: Vec<f64>,
    pub means: Mat,
    pub covs: Vec<Mat>,
    /// `p[l][k] = P(class k+1 | component l)`.
    pub p: Mat,
}

impl Params {
    pub fn from_model(m: &SgmmModel) -> Self {
        Params {
            weights: m.weights.clone(),
            means: m.means.clone(),
            covs: m.covariances.iter().map(to_mat).collect(),
            p: m.class_given_component.iter_rows().map(<[f64]>::to_vec).collect(),
        }
    }

    pub fn to_model(&self, reg_epsilon: f64) -> SgmmModel {
        let d = self.means[0].len();
        let k = self.p[0].len();
        SgmmModel {
            weights: self.weights.clone(),
            means: self.means.clone(),
            covariances: self.covs.iter().map(|c| DMatrix::from_fn(d, d, |i, j| c[i][j])).collect(),
            class_given_component: RowMatrix::from_vec(self.p.len(), k, self.p.concat()),
            reg_epsilon,
        }
    }

    /// All parameters concatenated, for max-abs comparisons.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.weights.clone();
        v.extend(self.means.concat());
        for c in &self.covs {
            v.extend(c.concat());
        }
        v.extend(self.p.concat());
        v
    }

    pub fn flat_gaussian(&self) -> Vec<f64> {
        let mut v = self.weights.clone();
        v.extend(self.means.concat());
        for c in &self.covs {
            v.extend(c.concat());
        }
        v
    }
}

/// `log pi_l + log N(x; l)` and, for labeled rows, `+ log P(c | l)`.
fn joint_terms(p: &Params, x: &[f64], class: Option<u32>) -> Vec<f64> {
    (0..p.weights.len())
        .map(|l| {
            let mut v = p.weights[l].ln() + log_normal(x, &p.means[l], &p.covs[l]);
            if let Some(c) = class {
                v += p.p[l][c as usize - 1].ln();
            }
            v
        })
        .collect()
}

/// Joint objective: unlabeled mixture terms plus label-weighted terms.
pub fn log_likelihood(p: &Params, xu: &Mat, xl: &Mat, labels: &[u32]) -> f64 {
    let u: f64 = xu.iter().map(|x| log_sum_exp(&joint_terms(p, x, None))).sum();
    let l: f64 = xl.iter().zip(labels).map(|(x, &c)| log_sum_exp(&joint_terms(p, x, Some(c)))).sum();
    u + l
}

fn normalize_exp(t: Vec<f64>) -> Vec<f64> {
    let z = log_sum_exp(&t);
    t.iter().map(|v| (v - z).exp()).collect()
}

pub fn e_step(p: &Params, xu: &Mat, xl: &Mat, labels: &[u32]) -> (Mat, Mat) {
    let gu = xu.iter().map(|x| normalize_exp(joint_terms(p, x, None))).collect();
    let gl = xl.iter().zip(labels).map(|(x, &c)| normalize_exp(joint_terms(p, x, Some(c)))).collect();
    (gu, gl)
}

/// Class posteriors `sum_l P(k | l) gamma_l` with unlabeled responsibilities.
pub fn class_posteriors(p: &Params, x: &Mat) -> Mat {
    let k = p.p[0].len();
    x.iter()
        .map(|xi| {
            let g = normalize_exp(joint_terms(p, xi, None));
            (0..k).map(|c| (0..g.len()).map(|l| p.p[l][c] * g[l]).sum()).collect()
        })
        .collect()
}

fn ridge(cov: &mut Mat, eps: f64) {
    let d = cov.len();
    let tr: f64 = (0..d).map(|i| cov[i][i]).sum();
    for i in 0..d {
        cov[i][i] += eps * tr / d as f64;
    }
}

/// Direct transcription of the closed-form updates: pooled means and
/// covariances, weights over all samples, smoothed `P(k | l)` from labeled
/// responsibilities only, then the trace-scaled ridge.
pub fn m_step(gu: &Mat, gl: &Mat, xu: &Mat, xl: &Mat, labels: &[u32], n_classes: usize, eps: f64, delta: f64) -> Params {
    let l_count = gu.first().or(gl.first()).unwrap().len();
    let d = xu.first().or(xl.first()).unwrap().len();
    let n = (xu.len() + xl.len()) as f64;
    let rows: Vec<(&Vec<f64>, &Vec<f64>)> = xu.iter().zip(gu).chain(xl.iter().zip(gl)).collect();
    let mut weights = vec![];
    let mut means = vec![];
    let mut covs = vec![];
    let mut p = vec![];
    for l in 0..l_count {
        let nl: f64 = rows.iter().map(|(_, g)| g[l]).sum();
        let mut mu = vec![0.0; d];
        for (x, g) in &rows {
            for j in 0..d {
                mu[j] += g[l] * x[j];
            }
        }
        for v in &mut mu {
            *v /= nl;
        }
        let mut cov = vec![vec![0.0; d]; d];
        for (x, g) in &rows {
            for a in 0..d {
                for b in 0..d {
                    cov[a][b] += g[l] * (x[a] - mu[a]) * (x[b] - mu[b]);
                }
            }
        }
        for row in &mut cov {
            for v in row.iter_mut() {
                *v /= nl;
            }
        }
        ridge(&mut cov, eps);
        let lab_total: f64 = gl.iter().map(|g| g[l]).sum();
        let pk: Vec<f64> = (1..=n_classes as u32)
            .map(|k| {
                let s: f64 = gl.iter().zip(labels).filter(|(_, &c)| c == k).map(|(g, _)| g[l]).sum();
                (s + delta) / (lab_total + n_classes as f64 * delta)
            })
            .collect();
        weights.push(nl / n);
        means.push(mu);
        covs.push(cov);
        p.push(pk);
    }
    Params { weights, means, covs, p }
}

/// Textbook unsupervised GMM EM with the same ridge; `P(k | l)` is
/// carried along untouched.
pub fn classical_gmm_em(init: &Params, x: &Mat, iterations: usize, eps: f64) -> Params {
    let mut p = init.clone();
    let n = x.len() as f64;
    let d = x[0].len();
    let l_count = p.weights.len();
    for _ in 0..iterations {
        let gamma: Mat = x
            .iter()
            .map(|xi| {
                let dens: Vec<f64> =
                    (0..l_count).map(|l| p.weights[l] * log_normal(xi, &p.means[l], &p.covs[l]).exp()).collect();
                let s: f64 = dens.iter().sum();
                dens.iter().map(|v| v / s).collect()
            })
            .collect();
        for l in 0..l_count {
            let nl: f64 = gamma.iter().map(|g| g[l]).sum();
            let mu: Vec<f64> = (0..d).map(|j| gamma.iter().zip(x).map(|(g, xi)| g[l] * xi[j]).sum::<f64>() / nl).collect();
            let mut cov: Mat = (0..d)
                .map(|a| {
                    (0..d)
                        .map(|b| {
                            gamma.iter().zip(x).map(|(g, xi)| g[l] * (xi[a] - mu[a]) * (xi[b] - mu[b])).sum::<f64>() / nl
                        })
                        .collect()
                })
                .collect();
            ridge(&mut cov, eps);
            p.weights[l] = nl / n;
            p.means[l] = mu;
            p.covs[l] = cov;
        }
    }
    p
}

/// Eigenvalues and eigenvectors (as columns) of a symmetric matrix by
/// cyclic Jacobi rotations.
pub fn jacobi_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.len();
    let mut m = a.clone();
    let mut v: Mat = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| m[i][i]).collect(), v)
}

/// Unbiased sample covariance.
pub fn sample_covariance(x: &Mat) -> Mat {
    let n = x.len();
    let d = x[0].len();
    let mu: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    (0..d)
        .map(|a| (0..d).map(|b| x.iter().map(|r| (r[a] - mu[a]) * (r[b] - mu[b])).sum::<f64>() / (n as f64 - 1.0)).collect())
        .collect()
}

/// Eigenvalues sorted descending.
pub fn sorted_eigenvalues(a: &Mat) -> Vec<f64> {
    let (mut vals, _) = jacobi_eigen(a);
    vals.sort_by(|x, y| y.partial_cmp(x).unwrap());
    vals
}

/// Pseudo-label selection by exhaustive search: for every class, scan all
/// samples and repeatedly extract the best remaining eligible one.
pub fn brute_force_pseudo_labels(proba: &Mat, ids: &[usize], n_classes: usize, tau: f64, alpha: f64) -> (usize, Vec<(usize, u32, f64)>) {
    // argmax with ties to the smaller class, recomputed from scratch
    let argmax = |row: &Vec<f64>| {
        let mut best = 0;
        for k in 0..row.len() {
            if row[k] > row[best] {
                best = k;
            }
        }
        (best + 1, row[best])
    };
    let mut pools: Vec<Vec<(usize, f64)>> = vec![vec![]; n_classes];
    for (row, &id) in proba.iter().zip(ids) {
        let (c, xi) = argmax(row);
        if xi > tau {
            pools[c - 1].push((id, xi));
        }
    }
    let n_final = pools.iter().map(|p| (alpha * p.len() as f64).floor() as usize).min().unwrap_or(0);
    let mut out = vec![];
    for (k, pool) in pools.iter_mut().enumerate() {
        for _ in 0..n_final {
            let mut best = 0;
            for i in 1..pool.len() {
                let (id, xi) = pool[i];
                let (bid, bxi) = pool[best];
                if xi > bxi || (xi == bxi && id < bid) {
                    best = i;
                }
            }
            let (id, xi) = pool.remove(best);
            out.push((id, k as u32 + 1, xi));
        }
    }
    (n_final, out)
}

/// Central finite-difference gradient of `f` at `x`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            xp[i] = x[i] + h;
            let up = f(&xp);
            xp[i] = x[i] - h;
            let down = f(&xp);
            xp[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `||a - b|| / max(||a||, ||b||, floor)`.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(floor)
}

/// Gaussian blob rows around each of `centers`, `per` rows each, unit
/// variance scaled by `sigma`.
pub fn blobs(r: &mut ChaCha8Rng, centers: &Mat, per: usize, sigma: f64) -> (Mat, Vec<u32>) {
    let mut x = vec![];
    let mut y = vec![];
    for _ in 0..per {
        for (k, c) in centers.iter().enumerate() {
            x.push(c.iter().map(|m| m + sigma * normal(r)).collect());
            y.push(k as u32 + 1);
        }
    }
    (x, y)
}

/// Random responsibilities (rows on the simplex, bounded away from zero).
pub fn random_resp(r: &mut ChaCha8Rng, n: usize, l: usize) -> Mat {
    (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..l).map(|_| r.random_range(0.05..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        })
        .collect()
}

pub fn random_rows(r: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> Mat {
    (0..n).map(|_| (0..d).map(|_| scale * normal(r)).collect()).collect()
}

pub fn fm(rows: &Mat, d: usize) -> FeatureMatrix {
    if rows.is_empty() {
        FeatureMatrix::empty(d)
    } else {
        FeatureMatrix::from_rows(rows).unwrap()
    }
}

pub fn row_matrix(rows: &Mat, cols: usize) -> RowMatrix {
    RowMatrix::from_vec(rows.len(), cols, rows.concat())
}

/// Packed random images where `planted` training positions hold exact
/// copies of test images. Returns the file paths and the planted
/// `(train_index, test_index)` pairs sorted by training index.
pub struct DedupFixture {
    pub train: std::path::PathBuf,
    pub test: std::path::PathBuf,
    pub pairs: Vec<(usize, usize)>,
}

pub fn dedup_fixture(
    dir: &std::path::Path,
    manifest: &semioccam::dedup::Manifest,
    n_train: usize,
    n_test: usize,
    planted: usize,
    seed: u64,
) -> DedupFixture {
    use rand::seq::index::sample;
    let mut r = rng(seed);
    let rec = manifest.record_len();
    let image = |r: &mut ChaCha8Rng| (0..rec).map(|_| r.random::<u8>()).collect::<Vec<u8>>();
    let test: Vec<Vec<u8>> = (0..n_test).map(|_| image(&mut r)).collect();
    let mut train: Vec<Vec<u8>> = (0..n_train).map(|_| image(&mut r)).collect();
    let positions = sample(&mut r, n_train, planted).into_vec();
    let sources = sample(&mut r, n_test, planted).into_vec();
    let mut pairs: Vec<(usize, usize)> = positions.into_iter().zip(sources).collect();
    for &(p, s) in &pairs {
        train[p] = test[s].clone();
    }
    pairs.sort();
    let paths = (dir.join("train.bin"), dir.join("test.bin"));
    std::fs::write(&paths.0, train.concat()).unwrap();
    std::fs::write(&paths.1, test.concat()).unwrap();
    DedupFixture { train: paths.0, test: paths.1, pairs }
}
