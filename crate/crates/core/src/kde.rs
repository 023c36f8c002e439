//! Gaussian kernel density estimate with analytic gradient and Hessian.
//!
//! The estimate is left unnormalised:
//!
//! ```text
//! p(x) = 1/n * sum_i 1/s * exp(-|x - x_i|^2 / (2 s))
//! ```
//!
//! where `s = sigma^2` is the stored bandwidth. Gradient and Hessian are the
//! exact derivatives of `p`. Everything downstream only uses directions,
//! eigenvectors and ratios, so the missing normalising constant is harmless.
//!
//! Note on bandwidths: the model stores the squared length `sigma^2`.
//! [`bandwidth_heuristic`] returns a length and must be squared before it is
//! handed to [`DensityModel::new`].

use nalgebra::{DMatrix, DVector};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::linalg::{dist_sq, sorted_symmetric_eigen};

#[derive(Clone, Debug)]
pub struct DensityModel {
    data: PointCloud,
    bandwidth: f64,
    cutoff_sigmas: Option<f64>,
}

/// Density derivatives divided by the density itself. These stay finite far
/// away from the data where the raw kernel sums underflow.
#[derive(Clone, Debug)]
pub struct LocalMoments {
    pub log_density: f64,
    /// `sigma^2 * g(x) / p(x)`: the mean-shift vector, in length units.
    pub mean_shift: DVector<f64>,
    /// `H(x) / p(x)`. Shares its eigenvectors with the raw Hessian.
    pub hessian_ratio: Option<DMatrix<f64>>,
}

struct KernelSums {
    min_d2: f64,
    s0: f64,
    s1: DVector<f64>,
    s2: Option<DMatrix<f64>>,
}

impl DensityModel {
    /// `bandwidth` is `sigma^2`, in squared length units.
    pub fn new(data: PointCloud, bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::input(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(Self {
            data,
            bandwidth,
            cutoff_sigmas: None,
        })
    }

    /// Skips kernel terms further than `radius * sigma` from the query.
    pub fn with_cutoff(mut self, radius: f64) -> Self {
        self.cutoff_sigmas = Some(radius);
        self
    }

    pub fn data(&self) -> &PointCloud {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Kernel length scale `sigma`.
    pub fn sigma(&self) -> f64 {
        self.bandwidth.sqrt()
    }

    pub(crate) fn check_query(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::input(format!(
                "query has dimension {}, model has {}",
                x.len(),
                self.dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite query {x:?}")));
        }
        Ok(())
    }

    fn sums(&self, x: &[f64], second: bool) -> KernelSums {
        let dim = self.dim();
        let s = self.bandwidth;
        let coords = self.data.as_slice();
        let min_d2 = coords.chunks_exact(dim).map(|p| dist_sq(x, p)).fold(f64::INFINITY, f64::min);
        let mut limit = f64::INFINITY;
        if let Some(c) = self.cutoff_sigmas {
            let r2 = c * c * s;
            if min_d2 <= r2 {
                limit = r2;
            }
        }
        // Terms below exp(-46) relative to the nearest one cannot move a sum
        // of at most a few million terms in double precision.
        limit = limit.min(min_d2 + 92.0 * s);
        let mut s0 = 0.0;
        let mut s1 = vec![0.0; dim];
        let mut s2 = if second { vec![0.0; dim * dim] } else { Vec::new() };
        let mut u = vec![0.0; dim];
        for p in coords.chunks_exact(dim) {
            let dd = dist_sq(x, p);
            if dd > limit {
                continue;
            }
            let w = (-(dd - min_d2) / (2.0 * s)).exp();
            s0 += w;
            for k in 0..dim {
                u[k] = x[k] - p[k];
                s1[k] += w * u[k];
            }
            if second {
                for a in 0..dim {
                    let wa = w * u[a];
                    let row = &mut s2[a * dim..(a + 1) * dim];
                    for b in a..dim {
                        row[b] += wa * u[b];
                    }
                }
            }
        }
        let s2 = second.then(|| DMatrix::from_fn(dim, dim, |a, b| s2[a.min(b) * dim + a.max(b)]));
        KernelSums {
            min_d2,
            s0,
            s1: DVector::from_vec(s1),
            s2,
        }
    }

    fn scale(&self, k: &KernelSums) -> f64 {
        let n = self.data.len() as f64;
        (-k.min_d2 / (2.0 * self.bandwidth)).exp() / (n * self.bandwidth)
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        self.check_query(x)?;
        let k = self.sums(x, false);
        Ok(self.scale(&k) * k.s0)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_query(x)?;
        let k = self.sums(x, false);
        Ok(&k.s1 * (-self.scale(&k) / self.bandwidth))
    }

    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_query(x)?;
        let k = self.sums(x, true);
        let s = self.bandwidth;
        let dim = self.dim();
        let m = k.s2.as_ref().expect("second moments requested") / (s * s) - DMatrix::identity(dim, dim) * (k.s0 / s);
        Ok(m * self.scale(&k))
    }

    /// Sorted eigen-decomposition of the Hessian with the leading `d`
    /// eigenvectors as the parallel (tangent) block.
    pub fn spectrum(&self, x: &[f64], d: usize) -> Result<HessianSpectrum> {
        if d == 0 || d >= self.dim() {
            return Err(Error::input(format!(
                "intrinsic dimension must satisfy 1 <= d < {}, got {d}",
                self.dim()
            )));
        }
        let h = self.hessian(x)?;
        HessianSpectrum::from_hessian(&h, (0..d).collect()).map_err(|_| Error::numerical("Hessian eigen-decomposition failed", x))
    }

    /// Density-normalised derivatives. Unchecked: callers validate `x`.
    pub fn local_moments(&self, x: &[f64], second: bool) -> LocalMoments {
        let k = self.sums(x, second);
        let s = self.bandwidth;
        let n = self.data.len() as f64;
        let mean_shift = &k.s1 * (-1.0 / k.s0);
        let hessian_ratio = k.s2.as_ref().map(|m| {
            let dim = self.dim();
            m / (s * s * k.s0) - DMatrix::identity(dim, dim) / s
        });
        LocalMoments {
            log_density: k.s0.ln() - k.min_d2 / (2.0 * s) - (n * s).ln(),
            mean_shift,
            hessian_ratio,
        }
    }
}

/// Hessian eigenpairs sorted by descending eigenvalue, split into a parallel
/// block (the listed columns) and an orthogonal block (all other columns, in
/// descending order).
///
/// Exactly repeated eigenvalues get an arbitrary orthonormal basis of their
/// eigenspace, so callers must not rely on a particular vector inside a
/// degenerate eigenspace.
#[derive(Clone, Debug)]
pub struct HessianSpectrum {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
    pub parallel: Vec<usize>,
}

impl HessianSpectrum {
    pub fn from_hessian(h: &DMatrix<f64>, parallel: Vec<usize>) -> Result<Self> {
        let (eigenvalues, eigenvectors) = sorted_symmetric_eigen(h)?;
        Ok(Self {
            eigenvalues,
            eigenvectors,
            parallel,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Intrinsic dimension `d`.
    pub fn d(&self) -> usize {
        self.parallel.len()
    }

    pub fn perp_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|i| !self.parallel.contains(i)).collect()
    }

    pub fn q_par(&self) -> DMatrix<f64> {
        self.eigenvectors.select_columns(self.parallel.iter())
    }

    pub fn q_perp(&self) -> DMatrix<f64> {
        self.eigenvectors.select_columns(self.perp_indices().iter())
    }

    pub fn perp_eigenvalues(&self) -> Vec<f64> {
        self.perp_indices().iter().map(|&i| self.eigenvalues[i]).collect()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.eigenvectors * DMatrix::from_diagonal(&self.eigenvalues) * self.eigenvectors.transpose()
    }
}

/// Mean distance from each point to its `k`-th nearest neighbour. This is a
/// kernel length `h`; use `h * h` as the model bandwidth.
pub fn bandwidth_heuristic(data: &PointCloud, k: usize) -> Result<f64> {
    let n = data.len();
    if k == 0 || n <= k {
        return Err(Error::input(format!("need more points than neighbours (n = {n}, k = {k})")));
    }
    let mut total = 0.0;
    let mut row = Vec::with_capacity(n - 1);
    for i in 0..n {
        row.clear();
        let p = data.point(i);
        row.extend(data.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, q)| dist_sq(p, q)));
        let (_, kth, _) = row.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
        total += kth.sqrt();
    }
    Ok(total / n as f64)
}
