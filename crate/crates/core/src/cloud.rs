use nalgebra::DVector;

use crate::error::{Error, Result};

/// An ordered set of points in `R^D`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    /// Builds a cloud from a flat row-major buffer.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("point dimension must be at least 1"));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::input(format!(
                "buffer of length {} does not hold a whole number of {dim}-dimensional points",
                coords.len()
            )));
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::input(format!("non-finite coordinate in point {}", pos / dim)));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::input(format!("point {i} has dimension {}, expected {dim}", r.len())));
            }
            coords.extend_from_slice(r);
        }
        Self::new(dim, coords)
    }

    pub fn from_vectors(points: &[DVector<f64>]) -> Result<Self> {
        let rows: Vec<&[f64]> = points.iter().map(|p| p.as_slice()).collect();
        Self::from_rows(&rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vector(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(self.point(i))
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn to_vectors(&self) -> Vec<DVector<f64>> {
        self.iter().map(DVector::from_column_slice).collect()
    }

    /// Applies `f` to every point, keeping the dimension.
    pub fn map_points(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let rows: Vec<Vec<f64>> = self.iter().map(&mut f).collect();
        Self::from_rows(&rows)
    }

    /// Points at the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let rows: Vec<&[f64]> = indices.iter().map(|&i| self.point(i)).collect();
        Self::from_rows(&rows)
    }
}
