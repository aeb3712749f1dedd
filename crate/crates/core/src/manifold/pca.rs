use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{check_dim, symmetric_eigen_desc, FeatureMatrix};
use crate::error::{Error, Result};

/// Principal directions of a centered sample covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// m x d, row-major; rows are orthonormal principal directions.
    pub components: Vec<f64>,
    pub n_components: usize,
    pub dim: usize,
    /// Covariance eigenvalues of the kept components, non-increasing.
    pub eigenvalues: Vec<f64>,
}

/// Fits PCA on the rows of `x`, keeping the top `m` components.
///
/// Covariance uses the unbiased `1/(N-1)` normalization. Each component's
/// largest-magnitude entry is made positive.
pub fn pca_fit(x: &FeatureMatrix, m: usize) -> Result<PcaModel> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::Config(format!("PCA needs at least 2 samples, got {n}")));
    }
    if m == 0 || m > (n - 1).min(d) {
        return Err(Error::Config(format!(
            "PCA components must be in 1..={}, got {m}",
            (n - 1).min(d)
        )));
    }
    let mut mean = vec![0.0; d];
    for row in x.iter_rows() {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n as f64);

    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0.0; d];
    for row in x.iter_rows() {
        for (c, (v, mu)) in centered.iter_mut().zip(row.iter().zip(&mean)) {
            *c = v - mu;
        }
        for a in 0..d {
            let ca = centered[a];
            if ca == 0.0 {
                continue;
            }
            for b in a..d {
                cov[(a, b)] += ca * centered[b];
            }
        }
    }
    let scale = 1.0 / (n - 1) as f64;
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] * scale;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    let (values, vectors) = symmetric_eigen_desc(cov);
    let mut components = Vec::with_capacity(m * d);
    for k in 0..m {
        components.extend(vectors.column(k).iter());
    }
    Ok(PcaModel {
        mean,
        components,
        n_components: m,
        dim: d,
        eigenvalues: values[..m].iter().map(|&v| v.max(0.0)).collect(),
    })
}

impl PcaModel {
    pub fn component(&self, k: usize) -> &[f64] {
        &self.components[k * self.dim..(k + 1) * self.dim]
    }

    /// Projects `(x - mean)` onto the components.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        Ok((0..self.n_components)
            .map(|k| {
                self.component(k)
                    .iter()
                    .zip(x.iter().zip(&self.mean))
                    .map(|(c, (v, mu))| c * (v - mu))
                    .sum()
            })
            .collect())
    }

    pub fn transform_matrix(&self, x: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        x.iter_rows().map(|r| self.transform(r)).collect()
    }

    /// Maps a projection back to input space.
    pub fn inverse_transform(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n_components, y.len())?;
        let mut out = self.mean.clone();
        for (k, &coef) in y.iter().enumerate() {
            for (o, c) in out.iter_mut().zip(self.component(k)) {
                *o += coef * c;
            }
        }
        Ok(out)
    }
}
