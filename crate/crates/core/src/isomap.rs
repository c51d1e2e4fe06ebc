//! Isomap: geodesic distances on a symmetric k-nearest-neighbor graph
//! followed by classical multidimensional scaling.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsomapModel {
    pub k_requested: usize,
    /// Neighbor count actually used; larger than requested when the graph had
    /// to be reconnected.
    pub k: usize,
    pub embedding_dim: usize,
    pub n: usize,
    /// Row-major `n x n` geodesic distances.
    pub geodesic: Vec<f64>,
    /// One row of `embedding_dim` coordinates per input point.
    pub embedding: Vec<Vec<f64>>,
    /// Eigenvalues of the double-centered matrix used for the embedding.
    pub eigenvalues: Vec<f64>,
    pub adjustments: Vec<String>,
}

impl IsomapModel {
    pub fn geodesic(&self, i: usize, j: usize) -> f64 {
        self.geodesic[i * self.n + j]
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Edge `i - j` exists when either point lists the other among its `k`
/// nearest neighbors. Ties in distance go to the lower index.
fn knn_graph(dist: &[f64], n: usize, k: usize) -> Vec<f64> {
    let mut graph = vec![f64::INFINITY; n * n];
    for i in 0..n {
        graph[i * n + i] = 0.0;
    }
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| dist[i * n + a].total_cmp(&dist[i * n + b]).then(a.cmp(&b)));
        for &j in others.iter().take(k) {
            graph[i * n + j] = dist[i * n + j];
            graph[j * n + i] = dist[i * n + j];
        }
    }
    graph
}

/// All-pairs shortest paths (Floyd–Warshall), in place.
fn shortest_paths(g: &mut [f64], n: usize) {
    for k in 0..n {
        for i in 0..n {
            let ik = g[i * n + k];
            if !ik.is_finite() {
                continue;
            }
            for j in 0..n {
                let via = ik + g[k * n + j];
                if via < g[i * n + j] {
                    g[i * n + j] = via;
                }
            }
        }
    }
}

/// Classical MDS of a distance matrix. Returns coordinates and the
/// eigenvalues that were used, dropping non-positive ones.
fn classical_mds(
    dist: &[f64],
    n: usize,
    dim: usize,
    notes: &mut Vec<String>,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let d2 = DMatrix::from_fn(n, n, |i, j| dist[i * n + j].powi(2));
    let row_means: Vec<f64> = (0..n).map(|i| d2.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (d2[(i, j)] - row_means[i] - row_means[j] + grand)
    });
    let eig = SymmetricEigen::new(b);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let top = eig.eigenvalues[order[0]];
    let tol = 1e-12 * top.abs().max(f64::MIN_POSITIVE);
    let usable: Vec<usize> = order
        .iter()
        .copied()
        .take(dim)
        .filter(|&c| eig.eigenvalues[c] > tol)
        .collect();
    if usable.is_empty() {
        return Err(Error::Numerical("no positive eigenvalues in MDS".into()));
    }
    if usable.len() < dim {
        notes.push(format!(
            "embedding dimension reduced from {dim} to {}: too few positive eigenvalues",
            usable.len()
        ));
    }

    let mut coords = vec![vec![0.0; usable.len()]; n];
    let mut lambdas = Vec::with_capacity(usable.len());
    for (col, &c) in usable.iter().enumerate() {
        let lambda = eig.eigenvalues[c];
        let v = eig.eigenvectors.column(c);
        // sign convention: the largest-magnitude component is positive
        let pivot = (0..n)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a)))
            .expect("n > 0");
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        let scale = sign * lambda.sqrt();
        for (i, row) in coords.iter_mut().enumerate() {
            row[col] = v[i] * scale;
        }
        lambdas.push(lambda);
    }
    Ok((coords, lambdas))
}

/// Fits Isomap on `points` (one row per sample). If the neighbor graph is
/// disconnected, `k` is raised one step at a time until it is connected.
pub fn fit_isomap(points: &[Vec<f64>], k: usize, embedding_dim: usize) -> Result<IsomapModel> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "k must be in 1..{n}, got {k}"
        )));
    }
    if embedding_dim == 0 || embedding_dim > n - 1 {
        return Err(Error::InvalidParameter(format!(
            "embedding_dim must be in 1..={}, got {embedding_dim}",
            n - 1
        )));
    }
    let width = points[0].len();
    if points.iter().any(|p| p.len() != width) {
        return Err(Error::InvalidParameter("points differ in dimension".into()));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite coordinate".into()));
    }

    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(&points[i], &points[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }

    let mut adjustments = Vec::new();
    let mut k_used = k;
    let geodesic = loop {
        let mut g = knn_graph(&dist, n, k_used);
        shortest_paths(&mut g, n);
        if g.iter().all(|v| v.is_finite()) {
            break g;
        }
        adjustments.push(format!(
            "k={k_used} leaves the neighbor graph disconnected; trying k={}",
            k_used + 1
        ));
        k_used += 1;
    };
    // symmetric up to summation order; take the smaller route
    let mut geodesic = geodesic;
    for i in 0..n {
        for j in (i + 1)..n {
            let m = geodesic[i * n + j].min(geodesic[j * n + i]);
            geodesic[i * n + j] = m;
            geodesic[j * n + i] = m;
        }
    }

    let (embedding, eigenvalues) = classical_mds(&geodesic, n, embedding_dim, &mut adjustments)?;
    Ok(IsomapModel {
        k_requested: k,
        k: k_used,
        embedding_dim: eigenvalues.len(),
        n,
        geodesic,
        embedding,
        eigenvalues,
        adjustments,
    })
}
