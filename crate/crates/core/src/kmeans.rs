//! K-means++ seeding followed by Lloyd iterations.

use rand::Rng as _;

use crate::dataio::FeatureMatrix;
use crate::rng::Rng;

pub const MAX_LLOYD_ITER: usize = 300;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest center; ties go to the lower index.
pub fn nearest(x: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// D²-weighted seeding. When every remaining point coincides with a chosen
/// center, the next center is drawn uniformly from the unchosen points.
pub fn plus_plus_seeds(points: &FeatureMatrix, k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let n = points.n();
    assert!(k >= 1 && k <= n, "need 1 <= k <= n");
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centers = vec![points.row(first).to_vec()];
    let mut dist: Vec<f64> = points.rows().map(|x| sq_dist(x, &centers[0])).collect();

    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in dist.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave target >= acc; fall back to the last positive weight
            pick.unwrap_or_else(|| dist.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        let c = points.row(pick).to_vec();
        for (d, x) in dist.iter_mut().zip(points.rows()) {
            *d = d.min(sq_dist(x, &c));
        }
        centers.push(c);
    }
    centers
}

/// Runs Lloyd iterations until assignments stop changing. Empty clusters
/// keep their previous center. Returns final centers and assignments.
pub fn lloyd(points: &FeatureMatrix, mut centers: Vec<Vec<f64>>, max_iter: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let d = points.d();
    let k = centers.len();
    let mut assign: Vec<usize> = points.rows().map(|x| nearest(x, &centers)).collect();
    for _ in 0..max_iter {
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (x, &a) in points.rows().zip(&assign) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(x) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        let next: Vec<usize> = points.rows().map(|x| nearest(x, &centers)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    (centers, assign)
}
