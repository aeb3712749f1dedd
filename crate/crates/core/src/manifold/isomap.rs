//! Isomap: k-NN graph geodesics embedded by classical MDS, with a Nyström
//! out-of-sample extension.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_dim, sq_dist, symmetric_eigen_desc, FeatureMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsomapModel {
    pub k_neighbors: usize,
    pub n_components: usize,
    pub n_train: usize,
    pub dim: usize,
    /// n_train x dim, row-major.
    pub train_points: Vec<f64>,
    /// n_train x n_components, row-major.
    pub train_embedding: Vec<f64>,
    /// n_train x n_train shortest-path distances, row-major.
    pub geodesics: Vec<f64>,
    /// Column means of the squared geodesic matrix.
    pub geodesic_sq_col_means: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// n_train x n_components, row-major; column a is eigenvector a.
    pub eigenvectors: Vec<f64>,
    pub residual_variance: f64,
}

/// Indices of the `k` nearest rows of `points` to `x` (ascending distance,
/// ties to the lower index), optionally skipping one index.
fn nearest(points: &FeatureMatrix, x: &[f64], k: usize, skip: Option<usize>) -> Vec<(usize, f64)> {
    let mut d: Vec<(usize, f64)> = points
        .iter_rows()
        .enumerate()
        .filter(|(j, _)| Some(*j) != skip)
        .map(|(j, r)| (j, sq_dist(x, r)))
        .collect();
    let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if k < d.len() {
        d.select_nth_unstable_by(k, cmp);
        d.truncate(k);
    }
    d.sort_by(cmp);
    d.into_iter().map(|(j, s)| (j, s.sqrt())).collect()
}

fn knn_graph(x: &FeatureMatrix, k: usize) -> Vec<Vec<(usize, f64)>> {
    let n = x.rows();
    let lists: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| nearest(x, x.row(i), k, Some(i)))
        .collect();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, list) in lists.iter().enumerate() {
        for &(j, w) in list {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
    }
    for a in &mut adj {
        a.sort_by_key(|p| p.0);
        a.dedup_by_key(|p| p.0);
    }
    adj
}

fn component_sizes(adj: &[Vec<(usize, f64)>]) -> Vec<usize> {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut sizes = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut size = 0;
        while let Some(u) = queue.pop_front() {
            size += 1;
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        sizes.push(size);
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

#[derive(PartialEq)]
struct Frontier(f64, usize);

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::from([Frontier(0.0, source)]);
    while let Some(Frontier(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Frontier(nd, v));
            }
        }
    }
    dist
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// 1 - r^2 between upper-triangular geodesic distances and embedded distances.
fn residual_variance(geodesics: &[f64], embedding: &[f64], n: usize, m: usize) -> f64 {
    let mut geo = Vec::with_capacity(n * (n - 1) / 2);
    let mut emb = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            geo.push(geodesics[i * n + j]);
            emb.push(sq_dist(&embedding[i * m..(i + 1) * m], &embedding[j * m..(j + 1) * m]).sqrt());
        }
    }
    let r = pearson(&geo, &emb);
    (1.0 - r * r).clamp(0.0, 1.0)
}

/// All-pairs shortest paths on the symmetric k-NN graph of `x`.
///
/// Errors with the component sizes when the graph is disconnected.
pub(crate) fn geodesic_matrix(x: &FeatureMatrix, k: usize) -> Result<Vec<f64>> {
    let n = x.rows();
    let adj = knn_graph(x, k);
    let sizes = component_sizes(&adj);
    if sizes.len() > 1 {
        return Err(Error::DisconnectedGraph { component_sizes: sizes });
    }
    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|s| dijkstra(&adj, s)).collect();
    // upper triangle from row i, mirrored, so the matrix is exactly symmetric
    let mut geo = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            geo[i * n + j] = rows[i][j];
            geo[j * n + i] = rows[i][j];
        }
    }
    Ok(geo)
}

/// Fits Isomap with `k` neighbors into `m` output dimensions.
pub fn isomap_fit(x: &FeatureMatrix, k: usize, m: usize) -> Result<IsomapModel> {
    let n = x.rows();
    if k == 0 || n < k + 1 {
        return Err(Error::Config(format!("Isomap needs 1 <= k < N, got k={k}, N={n}")));
    }
    if m == 0 || m > n - 1 {
        return Err(Error::Config(format!(
            "Isomap output dimension must be in 1..={}, got {m}",
            n - 1
        )));
    }
    let geo = geodesic_matrix(x, k)?;

    let sq: Vec<f64> = geo.iter().map(|d| d * d).collect();
    let mut col_means = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            col_means[j] += sq[i * n + j];
        }
    }
    col_means.iter_mut().for_each(|v| *v /= n as f64);
    let grand = col_means.iter().sum::<f64>() / n as f64;
    // the squared-geodesic matrix is symmetric, so row means equal column means
    let b = DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (sq[i * n + j] - col_means[i] - col_means[j] + grand)
    });

    let (values, vectors) = symmetric_eigen_desc(b);
    let scale = values[0].abs().max(f64::MIN_POSITIVE);
    if let Some(a) = (0..m).find(|&a| values[a] <= 1e-12 * scale || values[a] <= 0.0) {
        return Err(Error::Degenerate(format!(
            "eigenvalue {a} of the centered geodesic matrix is non-positive ({:e})",
            values[a]
        )));
    }
    let eigenvalues: Vec<f64> = values[..m].to_vec();
    let mut eigenvectors = vec![0.0; n * m];
    let mut embedding = vec![0.0; n * m];
    for i in 0..n {
        for a in 0..m {
            let v = vectors[(i, a)];
            eigenvectors[i * m + a] = v;
            embedding[i * m + a] = eigenvalues[a].sqrt() * v;
        }
    }
    let residual_variance = residual_variance(&geo, &embedding, n, m);
    Ok(IsomapModel {
        k_neighbors: k,
        n_components: m,
        n_train: n,
        dim: x.cols(),
        train_points: x.data().to_vec(),
        train_embedding: embedding,
        geodesics: geo,
        geodesic_sq_col_means: col_means,
        eigenvalues,
        eigenvectors,
        residual_variance,
    })
}

impl IsomapModel {
    pub fn embedding_row(&self, i: usize) -> &[f64] {
        &self.train_embedding[i * self.n_components..(i + 1) * self.n_components]
    }

    pub fn geodesic(&self, i: usize, j: usize) -> f64 {
        self.geodesics[i * self.n_train + j]
    }

    fn train_matrix(&self) -> FeatureMatrix {
        FeatureMatrix {
            rows: self.n_train,
            cols: self.dim,
            data: self.train_points.clone(),
            row_ids: Vec::new(),
        }
    }

    /// Out-of-sample embedding of `x`.
    ///
    /// Geodesics from `x` are routed through its k nearest training points and
    /// the result is embedded with the Nyström formula; training points map to
    /// their own embedding.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        let points = self.train_matrix();
        let near = nearest(&points, x, self.k_neighbors, None);
        let n = self.n_train;
        let mut geo_sq = vec![0.0; n];
        for (j, g) in geo_sq.iter_mut().enumerate() {
            let d = near
                .iter()
                .map(|&(v, dv)| dv + self.geodesic(v, j))
                .fold(f64::INFINITY, f64::min);
            *g = d * d;
        }
        let m = self.n_components;
        Ok((0..m)
            .map(|a| {
                let s: f64 = (0..n)
                    .map(|i| self.eigenvectors[i * m + a] * (self.geodesic_sq_col_means[i] - geo_sq[i]))
                    .sum();
                s / (2.0 * self.eigenvalues[a].sqrt())
            })
            .collect())
    }

    pub fn transform_matrix(&self, x: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        x.iter_rows().map(|r| self.transform(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_collinear_points() {
        let x = FeatureMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let model = isomap_fit(&x, 2, 1).unwrap();
        let e: Vec<f64> = (0..3).map(|i| model.embedding_row(i)[0]).collect();
        assert!(e[1].abs() < 1e-9, "middle point at the centroid: {e:?}");
        assert!(((e[0] - e[1]).abs() - 1.0).abs() < 1e-9);
        assert!(((e[2] - e[0]).abs() - 2.0).abs() < 1e-9);
        assert!(model.residual_variance < 1e-9);
    }

    #[test]
    fn disconnected_graph_names_components() {
        let mut rows = Vec::new();
        for i in 0..4 {
            rows.push(vec![i as f64 * 0.1, 0.0]);
        }
        for i in 0..3 {
            rows.push(vec![100.0 + i as f64 * 0.1, 0.0]);
        }
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        match isomap_fit(&x, 2, 1) {
            Err(Error::DisconnectedGraph { component_sizes }) => assert_eq!(component_sizes, vec![4, 3]),
            other => panic!("expected disconnected graph, got {other:?}"),
        }
    }

    #[test]
    fn parameter_checks() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        assert!(isomap_fit(&x, 3, 1).is_err());
        assert!(isomap_fit(&x, 0, 1).is_err());
        assert!(isomap_fit(&x, 2, 3).is_err());
    }

    #[test]
    fn degenerate_geometry_is_error() {
        let x = FeatureMatrix::from_rows(&vec![vec![1.0, 1.0]; 4]).unwrap();
        assert!(matches!(isomap_fit(&x, 2, 1), Err(Error::Degenerate(_))));
    }

    #[test]
    fn training_points_map_to_their_embedding() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let t = i as f64 * 0.2;
                vec![t.cos() * (1.0 + 0.1 * t), t.sin() * (1.0 + 0.1 * t), 0.05 * t]
            })
            .collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let model = isomap_fit(&x, 4, 2).unwrap();
        for i in 0..x.rows() {
            let y = model.transform(x.row(i)).unwrap();
            for (a, b) in y.iter().zip(model.embedding_row(i)) {
                assert!((a - b).abs() < 1e-6);
            }
        }
        assert!(model.transform(&[0.0, 0.0]).is_err());
    }
}
