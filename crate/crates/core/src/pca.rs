//! Centred principal component projection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::linalg::sorted_symmetric_eigen;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Component `k` is `components[k]`, unit length.
    pub components: Vec<Vec<f64>>,
    /// Score variances, descending.
    pub variances: Vec<f64>,
}

impl Pca {
    pub fn fit(data: &PointCloud, target_dim: usize) -> Result<Self> {
        let dim = data.dim();
        if target_dim == 0 || target_dim >= dim {
            return Err(Error::input(format!(
                "target dimension must satisfy 1 <= k < {dim}, got {target_dim}"
            )));
        }
        let n = data.len();
        if n < 2 {
            return Err(Error::input("PCA needs at least two points"));
        }
        let mut mean = DVector::zeros(dim);
        for p in data.iter() {
            mean += DVector::from_column_slice(p);
        }
        mean /= n as f64;
        let mut cov = DMatrix::zeros(dim, dim);
        for p in data.iter() {
            let c = DVector::from_column_slice(p) - &mean;
            cov.ger(1.0, &c, &c, 1.0);
        }
        cov /= (n - 1) as f64;
        let (values, vectors) = sorted_symmetric_eigen(&cov)?;
        Ok(Self {
            mean: mean.as_slice().to_vec(),
            components: (0..target_dim).map(|k| vectors.column(k).iter().copied().collect()).collect(),
            variances: values.iter().take(target_dim).map(|v| v.max(0.0)).collect(),
        })
    }

    pub fn transform(&self, data: &PointCloud) -> Result<PointCloud> {
        if data.dim() != self.mean.len() {
            return Err(Error::input("dimension mismatch in PCA transform"));
        }
        data.map_points(|p| {
            self.components
                .iter()
                .map(|c| c.iter().zip(p.iter().zip(&self.mean)).map(|(a, (x, m))| a * (x - m)).sum())
                .collect()
        })
    }

    pub fn back_project(&self, scores: &PointCloud) -> Result<PointCloud> {
        if scores.dim() != self.components.len() {
            return Err(Error::input("dimension mismatch in PCA back-projection"));
        }
        scores.map_points(|s| {
            let mut x = self.mean.clone();
            for (k, c) in self.components.iter().enumerate() {
                for (xi, ci) in x.iter_mut().zip(c) {
                    *xi += s[k] * ci;
                }
            }
            x
        })
    }
}

pub fn pca_reduce(data: &PointCloud, target_dim: usize) -> Result<(PointCloud, Pca)> {
    let pca = Pca::fit(data, target_dim)?;
    Ok((pca.transform(data)?, pca))
}
