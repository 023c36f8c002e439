//! Projection of points onto the `d`-dimensional density ridge.
//!
//! A point is moved along `dy/dt = V V^T g(y)` where `V = Q_perp(y)` spans the
//! normal (most negative curvature) eigenvectors of the Hessian. The field is
//! integrated in density-normalised form, `V V^T sigma^2 g / p`, which traces
//! the same curve with a time scale that does not depend on the magnitude of
//! the unnormalised density.

use std::cell::RefCell;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::kde::{DensityModel, HessianSpectrum};
use crate::linalg::{dist_sq, sorted_symmetric_eigen};
use crate::ode::{integrate, IvpProblem, SolverConfig, Termination, Trajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RidgeConfig {
    /// Bound on `|Q_perp^T g| / max(|g|, grad_eps)` for a converged point.
    pub ridge_tol: f64,
    pub grad_eps: f64,
    /// A normalised gradient `sigma |g| / p` below this counts as zero: the
    /// point sits on a mode, which satisfies the ridge condition trivially.
    pub mode_tol: f64,
    /// Relative eigenvalue gap below which eigenvectors on both sides of the
    /// parallel/normal split are re-matched against the previous step.
    pub tie_tol: f64,
    /// Project onto the 1-D ridge whose tangent is eigenvector `j` (0-based,
    /// descending eigenvalues) instead of the leading `d` eigenvectors.
    pub orthogonal_index: Option<usize>,
    pub solver: SolverConfig,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self {
            ridge_tol: 1e-4,
            grad_eps: 1e-12,
            mode_tol: 1e-6,
            tie_tol: 1e-6,
            orthogonal_index: None,
            solver: SolverConfig::default(),
        }
    }
}

impl RidgeConfig {
    /// Indices of the eigenvectors spanning the tangent space.
    pub fn parallel_indices(&self, dim: usize, d: usize) -> Result<Vec<usize>> {
        if d == 0 || d >= dim {
            return Err(Error::input(format!(
                "intrinsic dimension must satisfy 1 <= d < {dim}, got {d}"
            )));
        }
        match self.orthogonal_index {
            None => Ok((0..d).collect()),
            Some(j) if d != 1 => Err(Error::input(format!("orthogonal ridge {j} requires d = 1, got d = {d}"))),
            Some(j) if j >= dim => Err(Error::input(format!(
                "orthogonal ridge index {j} out of range for dimension {dim}"
            ))),
            Some(j) => Ok(vec![j]),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RidgePoint {
    pub position: DVector<f64>,
    pub origin_index: usize,
    pub spectrum: HessianSpectrum,
    pub gradient: DVector<f64>,
    pub converged: bool,
    pub residual: f64,
    pub steps: usize,
    pub failure: Option<String>,
}

/// Ridge condition evaluated at one point.
#[derive(Clone, Copy, Debug)]
pub struct RidgeCheck {
    pub residual: f64,
    /// `sigma |g| / p`.
    pub gradient_norm: f64,
    pub perp_negative: bool,
    pub all_negative: bool,
}

impl RidgeCheck {
    /// Both conditions of the ridge definition: the gradient is orthogonal to
    /// the normal block (or vanishes) and the normal eigenvalues are negative.
    pub fn on_ridge(&self, cfg: &RidgeConfig) -> bool {
        (self.residual < cfg.ridge_tol && self.perp_negative) || (self.gradient_norm < cfg.mode_tol && self.all_negative)
    }
}

/// Splits sorted eigenpairs into a normal basis, keeping continuity with
/// `prev` inside clusters of (nearly) tied eigenvalues that straddle the split.
fn normal_basis(
    values: &DVector<f64>,
    vectors: &DMatrix<f64>,
    parallel: &[usize],
    prev: Option<&DMatrix<f64>>,
    tie_tol: f64,
) -> DMatrix<f64> {
    let dim = values.len();
    let perp: Vec<usize> = (0..dim).filter(|i| !parallel.contains(i)).collect();
    let Some(prev) = prev else {
        return vectors.select_columns(perp.iter());
    };
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut clusters: Vec<Vec<usize>> = vec![vec![0]];
    for i in 1..dim {
        if (values[i - 1] - values[i]).abs() <= tie_tol * scale {
            clusters.last_mut().unwrap().push(i);
        } else {
            clusters.push(vec![i]);
        }
    }
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(perp.len());
    for cluster in clusters {
        let m = cluster.iter().filter(|i| perp.contains(i)).count();
        if m == 0 {
            continue;
        }
        if m == cluster.len() {
            cols.extend(cluster.iter().map(|&i| vectors.column(i).into_owned()));
            continue;
        }
        // Rotate inside the degenerate eigenspace towards the previous normal
        // space: leading eigenvectors of C^T P P^T C.
        let c = vectors.select_columns(cluster.iter());
        let overlap = c.transpose() * prev;
        let gram = &overlap * overlap.transpose();
        match sorted_symmetric_eigen(&gram) {
            Ok((_, u)) => {
                for j in 0..m {
                    cols.push(&c * u.column(j));
                }
            }
            Err(_) => cols.extend(
                cluster
                    .iter()
                    .filter(|i| perp.contains(i))
                    .map(|&i| vectors.column(i).into_owned()),
            ),
        }
    }
    DMatrix::from_columns(&cols)
}

fn check_from_moments(
    model: &DensityModel,
    mean_shift: &DVector<f64>,
    values: &DVector<f64>,
    perp: &DMatrix<f64>,
    parallel: &[usize],
    cfg: &RidgeConfig,
) -> RidgeCheck {
    let g = mean_shift / model.sigma();
    let gn = g.norm();
    let residual = (perp.transpose() * &g).norm() / gn.max(cfg.grad_eps);
    let perp_negative = (0..values.len()).filter(|i| !parallel.contains(i)).all(|i| values[i] < 0.0);
    RidgeCheck {
        residual,
        gradient_norm: gn,
        perp_negative,
        all_negative: values.iter().all(|&v| v < 0.0),
    }
}

/// Evaluates the ridge condition at `x` for the given tangent selection.
pub fn ridge_check(model: &DensityModel, x: &[f64], parallel: &[usize], cfg: &RidgeConfig) -> Result<RidgeCheck> {
    model.check_query(x)?;
    let lm = model.local_moments(x, true);
    let h = lm.hessian_ratio.expect("second moments requested");
    let (values, vectors) = sorted_symmetric_eigen(&h).map_err(|_| Error::numerical("eigensolver failed", x))?;
    let perp = normal_basis(&values, &vectors, parallel, None, cfg.tie_tol);
    Ok(check_from_moments(model, &lm.mean_shift, &values, &perp, parallel, cfg))
}

/// Orthonormal tangent basis `Q_par(x)` (`D x d`).
pub fn tangent_basis(model: &DensityModel, x: &[f64], parallel: &[usize]) -> Result<DMatrix<f64>> {
    model.check_query(x)?;
    let lm = model.local_moments(x, true);
    let h = lm.hessian_ratio.expect("second moments requested");
    let (_, vectors) = sorted_symmetric_eigen(&h).map_err(|_| Error::numerical("eigensolver failed", x))?;
    Ok(vectors.select_columns(parallel.iter()))
}

/// Integrates the subspace-constrained flow from `x` until the ridge
/// condition holds or the solver gives up. Non-convergence is reported through
/// the `converged` flag, not as an error.
pub fn project_to_ridge(model: &DensityModel, x: &[f64], d: usize, cfg: &RidgeConfig) -> Result<RidgePoint> {
    model.check_query(x)?;
    let parallel = cfg.parallel_indices(model.dim(), d)?;
    project_with_selection(model, x, &parallel, cfg, 0)
}

struct FieldCache {
    prev_perp: Option<DMatrix<f64>>,
    last_check: Option<(DVector<f64>, RidgeCheck)>,
}

fn flow_with_selection(model: &DensityModel, x: &[f64], parallel: &[usize], cfg: &RidgeConfig) -> Result<Trajectory> {
    let cache = RefCell::new(FieldCache {
        prev_perp: None,
        last_check: None,
    });
    let field = |y: &DVector<f64>| -> Result<DVector<f64>> {
        let lm = model.local_moments(y.as_slice(), true);
        let h = lm.hessian_ratio.expect("second moments requested");
        let (values, vectors) = sorted_symmetric_eigen(&h).map_err(|_| Error::numerical("eigensolver failed", y.as_slice()))?;
        let mut c = cache.borrow_mut();
        let perp = normal_basis(&values, &vectors, parallel, c.prev_perp.as_ref(), cfg.tie_tol);
        let check = check_from_moments(model, &lm.mean_shift, &values, &perp, parallel, cfg);
        let dy = &perp * (perp.transpose() * &lm.mean_shift);
        c.prev_perp = Some(perp);
        c.last_check = Some((y.clone(), check));
        Ok(dy)
    };
    let stop = |y: &DVector<f64>, _dy: &DVector<f64>| -> bool {
        let c = cache.borrow();
        match &c.last_check {
            Some((at, check)) if at == y => {
                check.residual < cfg.ridge_tol || (check.gradient_norm < cfg.mode_tol && check.all_negative)
            }
            _ => false,
        }
    };
    integrate(IvpProblem {
        vector_field: field,
        initial_state: DVector::from_column_slice(x),
        stop_test: stop,
        t_end: None,
        config: cfg.solver.clone(),
    })
}

/// Accepted states of the ridge projection flow started at `x`.
pub fn ridge_trajectory(model: &DensityModel, x: &[f64], d: usize, cfg: &RidgeConfig) -> Result<Trajectory> {
    model.check_query(x)?;
    let parallel = cfg.parallel_indices(model.dim(), d)?;
    flow_with_selection(model, x, &parallel, cfg)
}

fn project_with_selection(
    model: &DensityModel,
    x: &[f64],
    parallel: &[usize],
    cfg: &RidgeConfig,
    origin_index: usize,
) -> Result<RidgePoint> {
    let traj = flow_with_selection(model, x, parallel, cfg)?;
    let position = traj.last().clone();
    let check = ridge_check(model, position.as_slice(), parallel, cfg)?;
    let h = model.hessian(position.as_slice())?;
    let spectrum = HessianSpectrum::from_hessian(&h, parallel.to_vec())
        .map_err(|_| Error::numerical("eigensolver failed", position.as_slice()))?;
    Ok(RidgePoint {
        gradient: model.gradient(position.as_slice())?,
        converged: traj.terminated == Termination::Converged && check.on_ridge(cfg),
        residual: check.residual,
        steps: traj.states.len() - 1,
        position,
        origin_index,
        spectrum,
        failure: None,
    })
}

fn failed_point(model: &DensityModel, x: &[f64], parallel: &[usize], origin_index: usize, err: Error) -> RidgePoint {
    let dim = model.dim();
    let h = model.hessian(x).unwrap_or_else(|_| DMatrix::zeros(dim, dim));
    let spectrum = HessianSpectrum::from_hessian(&h, parallel.to_vec())
        .or_else(|_| HessianSpectrum::from_hessian(&DMatrix::zeros(dim, dim), parallel.to_vec()))
        .expect("zero matrix decomposes");
    RidgePoint {
        position: DVector::from_column_slice(x),
        origin_index,
        spectrum,
        gradient: model.gradient(x).unwrap_or_else(|_| DVector::zeros(dim)),
        converged: false,
        residual: f64::NAN,
        steps: 0,
        failure: Some(err.to_string()),
    }
}

/// Ridge projections of a whole cloud together with the model and settings
/// that produced them.
#[derive(Clone, Debug)]
pub struct RidgeEstimate<'m> {
    pub model: &'m DensityModel,
    pub points: Vec<RidgePoint>,
    pub d: usize,
    pub parallel: Vec<usize>,
    pub config: RidgeConfig,
}

impl<'m> RidgeEstimate<'m> {
    /// Wraps already-projected points (e.g. loaded from disk).
    pub fn from_points(model: &'m DensityModel, points: Vec<RidgePoint>, d: usize, config: RidgeConfig) -> Result<Self> {
        let parallel = config.parallel_indices(model.dim(), d)?;
        Ok(Self {
            model,
            points,
            d,
            parallel,
            config,
        })
    }

    pub fn converged_indices(&self) -> Vec<usize> {
        (0..self.points.len()).filter(|&i| self.points[i].converged).collect()
    }

    pub fn converged_fraction(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        self.converged_indices().len() as f64 / self.points.len() as f64
    }

    pub fn positions(&self) -> PointCloud {
        let rows: Vec<&[f64]> = self.points.iter().map(|p| p.position.as_slice()).collect();
        PointCloud::from_rows(&rows).expect("ridge positions are finite")
    }

    /// Index of the converged ridge point closest to `x`.
    pub fn nearest_converged(&self, x: &[f64]) -> Option<usize> {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.converged)
            .map(|(i, p)| (i, dist_sq(p.position.as_slice(), x)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
    }

    pub fn tangent_basis(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        tangent_basis(self.model, x, &self.parallel)
    }

    pub fn check(&self, x: &[f64]) -> Result<RidgeCheck> {
        ridge_check(self.model, x, &self.parallel, &self.config)
    }

    /// Re-projects `x` with the estimate's settings.
    pub fn project(&self, x: &[f64]) -> Result<RidgePoint> {
        self.model.check_query(x)?;
        project_with_selection(self.model, x, &self.parallel, &self.config, usize::MAX)
    }
}

/// Projects every point of `data`. Points are independent and processed in
/// parallel; a failing point is flagged, never fatal for the batch.
pub fn project_cloud<'m>(model: &'m DensityModel, data: &PointCloud, d: usize, cfg: &RidgeConfig) -> Result<RidgeEstimate<'m>> {
    if data.dim() != model.dim() {
        return Err(Error::input(format!(
            "data dimension {} does not match model dimension {}",
            data.dim(),
            model.dim()
        )));
    }
    let parallel = cfg.parallel_indices(model.dim(), d)?;
    cfg.solver.validate()?;
    let points = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let x = data.point(i);
            project_with_selection(model, x, &parallel, cfg, i).unwrap_or_else(|e| failed_point(model, x, &parallel, i, e))
        })
        .collect();
    Ok(RidgeEstimate {
        model,
        points,
        d,
        parallel,
        config: cfg.clone(),
    })
}

/// Fast projection of an off-ridge point: start at the nearest ridge point and
/// walk in the local tangent space, `x_r += alpha Q_par Q_par^T (x_o - x_r)`,
/// until the update is below `1e-6` or `max_iters` is reached.
pub fn out_of_sample_project(estimate: &RidgeEstimate<'_>, x_o: &[f64], alpha: f64, max_iters: usize) -> Result<DVector<f64>> {
    estimate.model.check_query(x_o)?;
    let start = estimate
        .nearest_converged(x_o)
        .ok_or_else(|| Error::input("ridge estimate has no converged points"))?;
    let target = DVector::from_column_slice(x_o);
    let mut x_r = estimate.points[start].position.clone();
    for _ in 0..max_iters {
        let q = estimate.tangent_basis(x_r.as_slice())?;
        let update = &q * (q.transpose() * (&target - &x_r)) * alpha;
        x_r += &update;
        if update.norm() < 1e-6 {
            break;
        }
    }
    Ok(x_r)
}
