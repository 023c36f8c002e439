//! Gradient flow along the ridge: modes, attraction basins and arc-length
//! coordinates for one-dimensional ridges.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::kde::DensityModel;
use crate::linalg::{dist, sorted_symmetric_eigen};
use crate::ode::{integrate, IvpProblem, SolverConfig, Termination, Trajectory};
use crate::ridge::{project_cloud, tangent_basis, RidgeConfig, RidgeEstimate};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    /// Normalised gradient `sigma |g| / p` at which a flow counts as arrived.
    pub mode_tol: f64,
    /// Below this normalised gradient the flow switches to Newton steps.
    pub newton_switch: f64,
    /// Endpoint merge radius in units of the kernel length scale.
    pub merge_radius_sigmas: f64,
    pub newton_max_iters: usize,
    pub solver: SolverConfig,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            mode_tol: 1e-6,
            newton_switch: 1e-3,
            merge_radius_sigmas: 0.1,
            newton_max_iters: 50,
            solver: SolverConfig::default(),
        }
    }
}

/// A local density maximum with its attraction basin.
#[derive(Clone, Debug)]
pub struct Mode {
    pub position: DVector<f64>,
    /// Indices into the ridge estimate, ascending.
    pub basin: Vec<usize>,
    /// `D x d` tangent basis at the mode.
    pub basis: DMatrix<f64>,
}

/// Per-chart coordinates. `indices[k]` is the ridge point whose coordinate is
/// `coords[k]`; `lengths[k]` is its flow arc length (or tangent norm).
#[derive(Clone, Debug)]
pub struct ChartCoords {
    pub mode_id: usize,
    pub indices: Vec<usize>,
    pub coords: Vec<DVector<f64>>,
    pub lengths: Vec<f64>,
}

/// Outcome of a single flow, reduced to what the charts need.
#[derive(Clone, Debug)]
pub struct FlowSummary {
    pub endpoint: DVector<f64>,
    pub length: f64,
    /// Direction from which the flow enters the mode.
    pub approach: DVector<f64>,
    pub steps: usize,
}

/// Modes and basins of a ridge estimate, plus 1-D charts when `d = 1`.
#[derive(Clone, Debug)]
pub struct LocalUnwrap {
    pub modes: Vec<Mode>,
    /// One entry per ridge point; `None` for excluded points.
    pub flows: Vec<Option<FlowSummary>>,
    /// Mode id of every ridge point, `None` when excluded.
    pub labels: Vec<Option<usize>>,
    /// Ridge points left out: not converged to the ridge, or flow failed.
    pub excluded: Vec<usize>,
    /// Arc-length charts, filled for `d = 1` only.
    pub charts: Vec<ChartCoords>,
}

fn gradient_norm(model: &DensityModel, y: &[f64]) -> f64 {
    model.local_moments(y, false).mean_shift.norm() / model.sigma()
}

/// One Newton step on the log-density. `None` when the Hessian is not
/// negative definite or the step does not increase the density.
fn newton_step(model: &DensityModel, y: &DVector<f64>) -> Option<DVector<f64>> {
    let lm = model.local_moments(y.as_slice(), true);
    // Hessian of log p is H/p - (g/p)(g/p)^T.
    let g = &lm.mean_shift / model.bandwidth();
    let h = lm.hessian_ratio? - &g * g.transpose();
    let (values, vectors) = sorted_symmetric_eigen(&h).ok()?;
    if values[0] >= 0.0 {
        return None;
    }
    let coeffs = vectors.transpose() * &g;
    let scaled = DVector::from_iterator(values.len(), coeffs.iter().zip(values.iter()).map(|(c, v)| c / v));
    let mut step = -(&vectors * scaled);
    let cap = model.sigma();
    if step.norm() > cap {
        step *= cap / step.norm();
    }
    for _ in 0..20 {
        let next = y + &step;
        let ln = model.local_moments(next.as_slice(), false).log_density;
        if ln >= lm.log_density {
            return Some(next);
        }
        step *= 0.5;
    }
    None
}

/// Follows the gradient from `start` to a local mode. The mean-shift form of
/// the gradient field is integrated until the normalised gradient drops below
/// `newton_switch`, then Newton steps finish the approach to `mode_tol`.
pub fn flow_to_mode(model: &DensityModel, start: &[f64], cfg: &FlowConfig) -> Result<Trajectory> {
    model.check_query(start)?;
    let sigma = model.sigma();
    let switch = cfg.newton_switch.max(cfg.mode_tol);
    let mut traj = integrate(IvpProblem {
        vector_field: |y: &DVector<f64>| Ok(model.local_moments(y.as_slice(), false).mean_shift),
        initial_state: DVector::from_column_slice(start),
        stop_test: |_: &DVector<f64>, dy: &DVector<f64>| dy.norm() / sigma < switch,
        t_end: None,
        config: cfg.solver.clone(),
    })?;
    if traj.terminated != Termination::Converged {
        return Ok(traj);
    }

    let mut y = traj.last().clone();
    let mut t = *traj.times.last().unwrap();
    for _ in 0..cfg.newton_max_iters {
        if gradient_norm(model, y.as_slice()) < cfg.mode_tol {
            return Ok(traj);
        }
        let Some(next) = newton_step(model, &y) else {
            break;
        };
        t += dist(next.as_slice(), y.as_slice());
        y = next;
        traj.states.push(y.clone());
        traj.times.push(t);
    }
    if gradient_norm(model, y.as_slice()) < cfg.mode_tol {
        return Ok(traj);
    }

    // Newton stalled: keep integrating the plain flow down to mode_tol.
    let rest = integrate(IvpProblem {
        vector_field: |y: &DVector<f64>| Ok(model.local_moments(y.as_slice(), false).mean_shift),
        initial_state: y,
        stop_test: |_: &DVector<f64>, dy: &DVector<f64>| dy.norm() / sigma < cfg.mode_tol,
        t_end: None,
        config: cfg.solver.clone(),
    })?;
    traj.states.extend(rest.states.into_iter().skip(1));
    traj.times.extend(rest.times.into_iter().skip(1).map(|s| s + t));
    traj.terminated = rest.terminated;
    Ok(traj)
}

/// Polyline length of the trajectory.
pub fn arc_length(trajectory: &Trajectory) -> f64 {
    polyline_length(&trajectory.states)
}

pub fn polyline_length(states: &[DVector<f64>]) -> f64 {
    states.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum()
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi] = lo;
        }
    }
}

/// Single-linkage clustering of flow endpoints. `origins[i]` is the ridge
/// index that produced `endpoints[i]`. Modes come out ordered by their
/// smallest origin index; their bases are left empty.
pub fn cluster_modes(endpoints: &[DVector<f64>], origins: &[usize], merge_radius: f64) -> Vec<Mode> {
    assert_eq!(endpoints.len(), origins.len(), "one origin per endpoint");
    let n = endpoints.len();
    let mut uf = UnionFind((0..n).collect());
    for i in 0..n {
        for j in (i + 1)..n {
            if dist(endpoints[i].as_slice(), endpoints[j].as_slice()) <= merge_radius {
                uf.union(i, j);
            }
        }
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = uf.find(i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push((r, Vec::new()));
        }
        groups[slot[r]].1.push(i);
    }
    let mut modes: Vec<Mode> = groups
        .into_iter()
        .map(|(_, members)| {
            let dim = endpoints[members[0]].len();
            let mut mean = DVector::zeros(dim);
            for &m in &members {
                mean += &endpoints[m];
            }
            mean /= members.len() as f64;
            let mut basin: Vec<usize> = members.iter().map(|&m| origins[m]).collect();
            basin.sort_unstable();
            Mode {
                position: mean,
                basin,
                basis: DMatrix::zeros(dim, 0),
            }
        })
        .collect();
    modes.sort_by_key(|m| m.basin[0]);
    modes
}

fn approach_vector(traj: &Trajectory, sigma: f64) -> DVector<f64> {
    let end = traj.last();
    traj.states
        .iter()
        .rev()
        .find(|s| dist(s.as_slice(), end.as_slice()) >= 0.1 * sigma)
        .unwrap_or(&traj.states[0])
        - end
}

/// Flows every converged ridge point to its mode and groups the endpoints.
pub fn find_modes(model: &DensityModel, estimate: &RidgeEstimate<'_>, cfg: &FlowConfig) -> Result<LocalUnwrap> {
    cfg.solver.validate()?;
    let sigma = model.sigma();
    let flows: Vec<Option<FlowSummary>> = estimate
        .points
        .par_iter()
        .map(|p| {
            if !p.converged {
                return None;
            }
            let traj = flow_to_mode(model, p.position.as_slice(), cfg).ok()?;
            if traj.terminated != Termination::Converged {
                return None;
            }
            Some(FlowSummary {
                endpoint: traj.last().clone(),
                length: arc_length(&traj),
                approach: approach_vector(&traj, sigma),
                steps: traj.states.len() - 1,
            })
        })
        .collect();

    let origins: Vec<usize> = (0..flows.len()).filter(|&i| flows[i].is_some()).collect();
    let excluded: Vec<usize> = (0..flows.len()).filter(|&i| flows[i].is_none()).collect();
    if origins.is_empty() {
        return Err(Error::Numerical {
            reason: "no ridge point reached a mode".into(),
            point: Vec::new(),
        });
    }
    let endpoints: Vec<DVector<f64>> = origins.iter().map(|&i| flows[i].as_ref().unwrap().endpoint.clone()).collect();
    let merge_radius = cfg.merge_radius_sigmas * sigma;
    let mut modes = cluster_modes(&endpoints, &origins, merge_radius);
    for mode in &mut modes {
        // Polish the averaged position back onto the maximum.
        if let Ok(traj) = flow_to_mode(model, mode.position.as_slice(), cfg) {
            if traj.terminated == Termination::Converged && dist(traj.last().as_slice(), mode.position.as_slice()) <= merge_radius
            {
                mode.position = traj.last().clone();
            }
        }
        mode.basis = tangent_basis(model, mode.position.as_slice(), &estimate.parallel)?;
    }
    let mut labels = vec![None; flows.len()];
    for (id, mode) in modes.iter().enumerate() {
        for &i in &mode.basin {
            labels[i] = Some(id);
        }
    }
    Ok(LocalUnwrap {
        modes,
        flows,
        labels,
        excluded,
        charts: Vec::new(),
    })
}

/// Arc-length charts for a one-dimensional ridge. A point's coordinate is its
/// flow length to the mode, negative when the flow enters the mode from the
/// side opposite the mode's basis vector.
pub fn unwrap_local_1d(model: &DensityModel, estimate: &RidgeEstimate<'_>, cfg: &FlowConfig) -> Result<LocalUnwrap> {
    if estimate.d != 1 {
        return Err(Error::input(format!(
            "arc-length unwrapping needs d = 1, got d = {}",
            estimate.d
        )));
    }
    let mut out = find_modes(model, estimate, cfg)?;
    out.charts = out
        .modes
        .iter()
        .enumerate()
        .map(|(id, mode)| {
            let axis = mode.basis.column(0);
            let mut chart = ChartCoords {
                mode_id: id,
                indices: mode.basin.clone(),
                coords: Vec::with_capacity(mode.basin.len()),
                lengths: Vec::with_capacity(mode.basin.len()),
            };
            for &i in &mode.basin {
                let f = out.flows[i].as_ref().expect("basin members have flows");
                let sign = if f.approach.dot(&axis) < 0.0 { -1.0 } else { 1.0 };
                chart.coords.push(DVector::from_element(1, sign * f.length));
                chart.lengths.push(f.length);
            }
            chart
        })
        .collect();
    Ok(out)
}

/// Unwraps `data` along the `j`-th orthogonal one-dimensional ridge, the
/// ridge whose tangent is Hessian eigenvector `j` (descending order).
pub fn orthogonal_unwrap_1d(
    model: &DensityModel,
    data: &PointCloud,
    j: usize,
    ridge_cfg: &RidgeConfig,
    cfg: &FlowConfig,
) -> Result<LocalUnwrap> {
    if model.dim() < 2 || j >= model.dim() {
        return Err(Error::input(format!(
            "orthogonal ridge index {j} out of range for dimension {}",
            model.dim()
        )));
    }
    let rc = RidgeConfig {
        orthogonal_index: Some(j),
        ..ridge_cfg.clone()
    };
    let estimate = project_cloud(model, data, 1, &rc)?;
    unwrap_local_1d(model, &estimate, cfg)
}
