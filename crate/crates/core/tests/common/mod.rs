#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use ridge_core::PointCloud;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(r: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(r)
}

pub fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

/// Random rotation of R^dim (QR of a Gaussian matrix with sign fix).
pub fn random_rotation(dim: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let a = DMatrix::from_fn(dim, dim, |_, _| gauss(&mut r));
    let qr = a.qr();
    let (mut q, rr) = (qr.q(), qr.r());
    for j in 0..dim {
        if rr[(j, j)] < 0.0 {
            let mut c = q.column_mut(j);
            c *= -1.0;
        }
    }
    q
}

/// Three overlapping Gaussian blobs in the plane z = 0 of R^3, along the x
/// axis, then rigidly moved by `rot` and `shift`. Returns the points and the
/// planar coordinates they came from.
pub fn flat_strip(n_per_blob: usize, seed: u64, rot: &DMatrix<f64>, shift: &[f64]) -> (PointCloud, PointCloud) {
    let mut r = rng(seed);
    let mut pts = Vec::new();
    let mut truth = Vec::new();
    for c in [0.0, 2.5, 5.0] {
        for _ in 0..n_per_blob {
            let x = c + 0.7 * gauss(&mut r);
            let y = 0.5 * gauss(&mut r);
            let p = rot * v(&[x, y, 0.0]) + v(shift);
            pts.extend_from_slice(p.as_slice());
            truth.extend_from_slice(&[x, y]);
        }
    }
    (PointCloud::new(3, pts).unwrap(), PointCloud::new(2, truth).unwrap())
}

/// Largest relative change of any pairwise distance.
pub fn max_distortion(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            let da = (&a[i] - &a[j]).norm();
            let db = (&b[i] - &b[j]).norm();
            if da > 1e-9 {
                worst = worst.max((da - db).abs() / da);
            }
        }
    }
    worst
}

pub fn uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    r.gen_range(lo..hi)
}
