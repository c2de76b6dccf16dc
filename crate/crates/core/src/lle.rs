//! Locally linear embedding with a dense eigensolver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ph::{euclidean, PointCloud};

pub const MAX_LLE_POINTS: usize = 5000;
pub const REGULARIZATION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSpec {
    pub k_neighbors: usize,
    pub target_dim: usize,
}

impl Default for EmbeddingSpec {
    fn default() -> Self {
        Self {
            k_neighbors: 120,
            target_dim: 3,
        }
    }
}

/// Indices of the `k` nearest other points of every point, nearest first
/// (ties broken by index).
pub fn knn(cloud: &PointCloud, k: usize) -> Vec<Vec<usize>> {
    let n = cloud.len();
    (0..n)
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (euclidean(cloud.point(i), cloud.point(j)), j))
                .collect();
            let k = k.min(d.len());
            if k < d.len() {
                d.select_nth_unstable_by(k, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                d.truncate(k);
            }
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().map(|x| x.1).collect()
        })
        .collect()
}

/// Affine reconstruction weights (summing to 1) of every point from its
/// neighbors. The local Gram matrix gets `1e-3 * trace` added to its
/// diagonal when it is singular.
pub fn reconstruction_weights(cloud: &PointCloud, neighbors: &[Vec<usize>]) -> Result<Vec<Vec<f64>>> {
    let d = cloud.dim();
    neighbors
        .iter()
        .enumerate()
        .map(|(i, nb)| {
            let k = nb.len();
            let xi = cloud.point(i);
            let z = DMatrix::from_fn(k, d, |r, c| cloud.point(nb[r])[c] - xi[c]);
            let mut g = &z * z.transpose();
            let trace = g.trace();
            let solve = |g: DMatrix<f64>| -> Option<DVector<f64>> {
                let chol = g.cholesky()?;
                let l = chol.l_dirty();
                let min_pivot = (0..k).map(|j| l[(j, j)] * l[(j, j)]).fold(f64::INFINITY, f64::min);
                if !(min_pivot > 1e-12 * trace.max(f64::MIN_POSITIVE)) {
                    return None;
                }
                Some(chol.solve(&DVector::from_element(k, 1.0)))
            };
            let w = match (k <= d).then(|| solve(g.clone())).flatten() {
                Some(w) => w,
                None => {
                    if !(trace > 0.0) {
                        return Err(Error::SingularNeighborhood { index: i });
                    }
                    for j in 0..k {
                        g[(j, j)] += REGULARIZATION * trace;
                    }
                    g.cholesky()
                        .map(|c| c.solve(&DVector::from_element(k, 1.0)))
                        .ok_or(Error::SingularNeighborhood { index: i })?
                }
            };
            let s = w.sum();
            if !(s.abs() > 0.0) || !s.is_finite() {
                return Err(Error::SingularNeighborhood { index: i });
            }
            Ok(w.iter().map(|x| x / s).collect())
        })
        .collect()
}

/// Embeds the cloud in `target_dim` dimensions using the eigenvectors of
/// `(I - W)^T (I - W)` with the smallest nonzero eigenvalues. Each output
/// coordinate has unit norm over the points and a positive largest entry.
pub fn lle_embed(cloud: &PointCloud, spec: &EmbeddingSpec) -> Result<PointCloud> {
    let n = cloud.len();
    if n > MAX_LLE_POINTS {
        return Err(Error::SizeLimit {
            n,
            max: MAX_LLE_POINTS,
        });
    }
    if spec.k_neighbors == 0 || spec.k_neighbors >= n {
        return Err(Error::InvalidInput(format!(
            "k_neighbors must lie in 1..{n}, got {}",
            spec.k_neighbors
        )));
    }
    if spec.target_dim == 0 || spec.target_dim >= cloud.dim() || spec.target_dim + 1 >= n {
        return Err(Error::InvalidInput(format!(
            "target dimension {} must be >= 1 and below the input dimension {}",
            spec.target_dim,
            cloud.dim()
        )));
    }
    let neighbors = knn(cloud, spec.k_neighbors);
    let weights = reconstruction_weights(cloud, &neighbors)?;
    let mut a = DMatrix::<f64>::identity(n, n);
    for (i, (nb, w)) in neighbors.iter().zip(&weights).enumerate() {
        for (&j, &wj) in nb.iter().zip(w) {
            a[(i, j)] -= wj;
        }
    }
    let m = a.transpose() * &a;
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]).then(x.cmp(&y)));
    let mut coords = vec![0.0; n * spec.target_dim];
    for (c, &col) in order[1..=spec.target_dim].iter().enumerate() {
        let v = eig.eigenvectors.column(col);
        let pivot = (0..n)
            .max_by(|&x, &y| v[x].abs().total_cmp(&v[y].abs()).then(y.cmp(&x)))
            .unwrap_or(0);
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            coords[i * spec.target_dim + c] = sign * v[i];
        }
    }
    PointCloud::from_flat(spec.target_dim, coords)
}

/// Mean over points of `|y_i - sum_j w_ij y_j|^2` for given weights.
pub fn embedding_cost(embedded: &PointCloud, neighbors: &[Vec<usize>], weights: &[Vec<f64>]) -> f64 {
    let n = embedded.len();
    let total: f64 = (0..n)
        .map(|i| {
            let yi = embedded.point(i);
            (0..embedded.dim())
                .map(|c| {
                    let rec: f64 = neighbors[i]
                        .iter()
                        .zip(&weights[i])
                        .map(|(&j, &w)| w * embedded.point(j)[c])
                        .sum();
                    (yi[c] - rec).powi(2)
                })
                .sum::<f64>()
        })
        .sum();
    total / n.max(1) as f64
}

/// Mean fraction of each point's `k` nearest neighbors that remain among its
/// `k` nearest neighbors after embedding.
pub fn neighbor_preservation(original: &PointCloud, embedded: &PointCloud, k: usize) -> f64 {
    let a = knn(original, k);
    let b = knn(embedded, k);
    let n = a.len();
    let kept: usize = a
        .iter()
        .zip(&b)
        .map(|(x, y)| x.iter().filter(|i| y.contains(i)).count())
        .sum();
    kept as f64 / (n * k).max(1) as f64
}
