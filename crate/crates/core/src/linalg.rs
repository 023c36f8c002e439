//! Small dense linear algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// descending order and a deterministic sign per eigenvector: the entry of
/// largest magnitude is positive (first such entry on ties).
pub fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite matrix entry", &[]));
    }
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::numerical("symmetric eigensolver did not converge", &[]))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        canonical_sign(&mut col);
        vectors.set_column(dst, &col);
    }
    Ok((values, vectors))
}

/// Flips `v` so that its entry of largest magnitude is positive.
pub fn canonical_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Orthogonal polar factor `U V^T` of a square matrix and its smallest
/// singular value.
pub fn polar_factor(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd with u");
    let vt = svd.v_t.expect("svd with v_t");
    let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    (u * vt, smin)
}

/// Moves an orthonormal frame into the column space of `target` (also
/// orthonormal, same width) by the rotation closest to the projection
/// `target target^T frame`. Returns the new frame and the smallest singular
/// value of `target^T frame`, which measures how degenerate the step was.
pub fn transport_frame(frame: &DMatrix<f64>, target: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let overlap = target.transpose() * frame;
    let (r, smin) = polar_factor(&overlap);
    (target * r, smin)
}

/// Orthonormal basis of the orthogonal complement of the columns of `a`
/// (`D x k`, assumed full column rank), computed from a full SVD so the
/// result is deterministic for a given input.
pub fn orthogonal_complement(a: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.nrows();
    let k = a.ncols();
    if k == 0 {
        return DMatrix::identity(d, d);
    }
    // Projector onto the complement; its leading eigenvectors span it.
    let q = a.clone().qr().q();
    let proj = DMatrix::identity(d, d) - &q * q.transpose();
    let (_, vecs) = sorted_symmetric_eigen(&proj).expect("finite projector");
    vecs.columns(0, d - k).into_owned()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}
