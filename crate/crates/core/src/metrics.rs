//! Agreement measures between recovered and true coordinates.

use nalgebra::{DMatrix, DVector};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::input(format!(
            "need two equally long samples of length >= 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
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
        return Err(Error::input("correlation undefined for a constant sample"));
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Ranks starting at 1, ties get their average rank.
pub fn ranks(a: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| a[i].total_cmp(&a[j]));
    let mut r = vec![0.0; a.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && a[order[j + 1]] == a[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    pearson(&ranks(a), &ranks(b))
}

/// Kendall's tau-b.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let (mut conc, mut ties_a, mut ties_b) = (0.0f64, 0.0f64, 0.0f64);
    let mut pairs = 0.0f64;
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            let da = (a[i] - a[j]).signum() * ((a[i] != a[j]) as i32 as f64);
            let db = (b[i] - b[j]).signum() * ((b[i] != b[j]) as i32 as f64);
            pairs += 1.0;
            if da == 0.0 {
                ties_a += 1.0;
            }
            if db == 0.0 {
                ties_b += 1.0;
            }
            conc += da * db;
        }
    }
    let denom = ((pairs - ties_a) * (pairs - ties_b)).sqrt();
    if denom == 0.0 {
        return Err(Error::input("kendall tau undefined for a constant sample"));
    }
    Ok(conc / denom)
}

/// Best rigid fit `y ~ R x + t` (R orthogonal, reflections allowed).
#[derive(Clone, Debug)]
pub struct ProcrustesFit {
    pub rotation: DMatrix<f64>,
    pub translation: DVector<f64>,
    pub rms: f64,
}

impl ProcrustesFit {
    pub fn apply(&self, x: &[f64]) -> DVector<f64> {
        &self.rotation * DVector::from_column_slice(x) + &self.translation
    }
}

pub fn procrustes(x: &PointCloud, y: &PointCloud) -> Result<ProcrustesFit> {
    if x.len() != y.len() || x.dim() != y.dim() {
        return Err(Error::input("procrustes needs point sets of equal shape"));
    }
    let n = x.len();
    let d = x.dim();
    let to_mat = |c: &PointCloud| DMatrix::from_row_slice(n, d, c.as_slice());
    let (xm, ym) = (to_mat(x), to_mat(y));
    let cx = xm.row_mean();
    let cy = ym.row_mean();
    let mut xc = xm.clone();
    let mut yc = ym.clone();
    for i in 0..n {
        let mut r = xc.row_mut(i);
        r -= &cx;
        let mut r = yc.row_mut(i);
        r -= &cy;
    }
    // Rows are points: maximise tr(R^T Y^T X) over orthogonal R.
    let m = yc.transpose() * &xc;
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let rotation = u * vt;
    let translation = cy.transpose() - &rotation * cx.transpose();
    let fitted = &xc * rotation.transpose();
    let rms = ((&fitted - &yc).norm_squared() / n as f64).sqrt();
    Ok(ProcrustesFit {
        rotation,
        translation,
        rms,
    })
}

/// Largest distance between any two points.
pub fn diameter(x: &PointCloud) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            best = best.max(crate::linalg::dist(x.point(i), x.point(j)));
        }
    }
    best
}

/// Mean of `(|p| - 1)^2`: squared distance to the unit sphere.
pub fn sphere_mse(points: &[DVector<f64>]) -> f64 {
    if points.is_empty() {
        return f64::NAN;
    }
    points.iter().map(|p| (p.norm() - 1.0).powi(2)).sum::<f64>() / points.len() as f64
}
