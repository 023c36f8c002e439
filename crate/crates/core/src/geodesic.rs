//! Ridge-constrained shortest paths by alternating path shortening and
//! re-projection onto the ridge.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::polyline_length;
use crate::graph::NeighborGraph;
use crate::ridge::{out_of_sample_project, RidgeEstimate};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeodesicConfig {
    pub n_waypoints: usize,
    /// Outer iteration budget per resolution level.
    pub max_outer_iters: usize,
    /// Laplacian smoothing step; `0.25` keeps the explicit step stable.
    pub step: f64,
    /// Stop once the relative length decrease of one outer iteration is
    /// below this.
    pub rel_tol: f64,
    /// Relative objective increase tolerated before an iteration is rejected.
    pub objective_slack: f64,
    pub oos_alpha: f64,
    pub oos_max_iters: usize,
    /// Solve on a coarse path first (waypoint spacing about this many kernel
    /// length scales) and refine by doubling. Low-frequency kinks of the
    /// graph path decay very slowly on a fine path alone.
    pub coarse_spacing_sigmas: Option<f64>,
    /// Stopping tolerance on coarse levels.
    pub coarse_rel_tol: f64,
}

impl Default for GeodesicConfig {
    fn default() -> Self {
        Self {
            n_waypoints: 50,
            max_outer_iters: 200,
            step: 0.25,
            rel_tol: 1e-5,
            objective_slack: 1e-6,
            oos_alpha: 1.0,
            oos_max_iters: 200,
            coarse_spacing_sigmas: Some(4.0),
            coarse_rel_tol: 1e-9,
        }
    }
}

impl GeodesicConfig {
    fn validate(&self) -> Result<()> {
        if self.n_waypoints < 2 {
            return Err(Error::input("a geodesic needs at least 2 waypoints"));
        }
        if !(self.step > 0.0 && self.step <= 0.5) {
            return Err(Error::input(format!(
                "smoothing step must lie in (0, 0.5], got {}",
                self.step
            )));
        }
        if !(self.rel_tol > 0.0 && self.coarse_rel_tol > 0.0 && self.objective_slack >= 0.0) {
            return Err(Error::input("geodesic tolerances must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GeodesicPath {
    pub waypoints: Vec<DVector<f64>>,
    pub length: f64,
    /// Length of the graph path the solve started from.
    pub initial_length: f64,
    pub iterations_used: usize,
    pub converged: bool,
    /// `sum |g_l - g_(l-1)|^2` after every accepted iteration of the finest
    /// level, starting with its initial value.
    pub objective_history: Vec<f64>,
    /// Largest ridge residual over the interior waypoints.
    pub max_residual: f64,
}

impl GeodesicPath {
    pub fn reversed(&self) -> GeodesicPath {
        let mut r = self.clone();
        r.waypoints.reverse();
        r
    }
}

fn objective(w: &[DVector<f64>]) -> f64 {
    w.windows(2).map(|p| (&p[1] - &p[0]).norm_squared()).sum()
}

/// Resamples a polyline at `m` equally spaced arc-length fractions. The end
/// points are copied exactly.
pub fn resample(poly: &[DVector<f64>], m: usize) -> Vec<DVector<f64>> {
    assert!(!poly.is_empty() && m >= 2);
    let total = polyline_length(poly);
    let first = poly[0].clone();
    let last = poly[poly.len() - 1].clone();
    if total == 0.0 {
        return vec![first; m];
    }
    let mut out = Vec::with_capacity(m);
    out.push(first);
    let mut seg = 0;
    let mut acc = 0.0;
    for i in 1..m - 1 {
        let target = total * i as f64 / (m - 1) as f64;
        loop {
            let len = (&poly[seg + 1] - &poly[seg]).norm();
            if acc + len >= target || seg + 2 == poly.len() {
                let f = if len > 0.0 {
                    ((target - acc) / len).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                out.push(&poly[seg] + (&poly[seg + 1] - &poly[seg]) * f);
                break;
            }
            acc += len;
            seg += 1;
        }
    }
    out.push(last);
    out
}

fn reproject(estimate: &RidgeEstimate<'_>, x: &DVector<f64>, cfg: &GeodesicConfig) -> DVector<f64> {
    let limit = 10.0 * estimate.config.ridge_tol;
    let start = match out_of_sample_project(estimate, x.as_slice(), cfg.oos_alpha, cfg.oos_max_iters) {
        Ok(y) if estimate.check(y.as_slice()).is_ok_and(|c| c.residual <= limit) => return y,
        // The tangent-space estimate is still the better starting point.
        Ok(y) => y,
        Err(_) => x.clone(),
    };
    match estimate.project(start.as_slice()) {
        Ok(p) if p.converged => p.position,
        _ => match estimate.project(x.as_slice()) {
            Ok(p) if p.converged => p.position,
            _ => start,
        },
    }
}

struct LevelOutcome {
    waypoints: Vec<DVector<f64>>,
    history: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn solve_level(estimate: &RidgeEstimate<'_>, mut w: Vec<DVector<f64>>, rel_tol: f64, cfg: &GeodesicConfig) -> LevelOutcome {
    let m = w.len();
    let mut e = objective(&w);
    let mut len = polyline_length(&w);
    let mut history = vec![e];
    if m <= 2 {
        return LevelOutcome {
            waypoints: w,
            history,
            iterations: 0,
            converged: true,
        };
    }
    for it in 1..=cfg.max_outer_iters {
        let smoothed: Vec<DVector<f64>> = (1..m - 1)
            .map(|l| &w[l] + (&w[l - 1] - &w[l] * 2.0 + &w[l + 1]) * cfg.step)
            .collect();
        let projected: Vec<DVector<f64>> = smoothed.par_iter().map(|x| reproject(estimate, x, cfg)).collect();
        let mut next = Vec::with_capacity(m);
        next.push(w[0].clone());
        next.extend(projected);
        next.push(w[m - 1].clone());
        let e_new = objective(&next);
        if e_new > e * (1.0 + cfg.objective_slack) {
            return LevelOutcome {
                waypoints: w,
                history,
                iterations: it,
                converged: false,
            };
        }
        let len_new = polyline_length(&next);
        let decrease = (len - len_new) / len.max(f64::MIN_POSITIVE);
        w = next;
        e = e_new;
        len = len_new;
        history.push(e);
        if decrease < rel_tol {
            return LevelOutcome {
                waypoints: w,
                history,
                iterations: it,
                converged: true,
            };
        }
    }
    LevelOutcome {
        waypoints: w,
        history,
        iterations: cfg.max_outer_iters,
        converged: false,
    }
}

/// Approximate geodesic between graph nodes `source` and `target`, started
/// from the graph shortest path.
pub fn geodesic(
    estimate: &RidgeEstimate<'_>,
    graph: &NeighborGraph,
    source: usize,
    target: usize,
    cfg: &GeodesicConfig,
) -> Result<GeodesicPath> {
    cfg.validate()?;
    let (path, initial_length) = graph.shortest_path(source, target)?;
    let poly = graph.path_positions(&path);
    geodesic_from_polyline(estimate, &poly, initial_length, cfg)
}

/// Same as [`geodesic`] but starting from an explicit polyline whose end
/// points are kept fixed.
pub fn geodesic_from_polyline(
    estimate: &RidgeEstimate<'_>,
    poly: &[DVector<f64>],
    initial_length: f64,
    cfg: &GeodesicConfig,
) -> Result<GeodesicPath> {
    cfg.validate()?;
    if poly.is_empty() {
        return Err(Error::input("empty initial path"));
    }
    let n = cfg.n_waypoints;
    let mut levels = Vec::new();
    if let Some(spacing) = cfg.coarse_spacing_sigmas {
        let h = spacing * estimate.model.sigma();
        let mut m = ((initial_length / h).ceil() as usize + 1).max(3);
        while m < n {
            levels.push(m);
            m = 2 * (m - 1) + 1;
        }
    }
    levels.push(n);

    let mut current = poly.to_vec();
    let mut outcome = None;
    let mut iterations = 0;
    for (k, &m) in levels.iter().enumerate() {
        let finest = k + 1 == levels.len();
        // Resampled points lie on chords; put them back on the ridge so the
        // level starts from a feasible path.
        let mut start = resample(&current, m);
        let interior: Vec<DVector<f64>> = start[1..m - 1].par_iter().map(|x| reproject(estimate, x, cfg)).collect();
        start.splice(1..m - 1, interior);
        let tol = if finest { cfg.rel_tol } else { cfg.coarse_rel_tol };
        let o = solve_level(estimate, start, tol, cfg);
        iterations += o.iterations;
        current = o.waypoints.clone();
        if finest {
            outcome = Some(o);
        }
    }
    let o = outcome.expect("at least one level");
    let max_residual = o.waypoints[1..o.waypoints.len() - 1]
        .iter()
        .filter_map(|x| estimate.check(x.as_slice()).ok())
        .map(|c| c.residual)
        .fold(0.0, f64::max);
    Ok(GeodesicPath {
        length: polyline_length(&o.waypoints),
        waypoints: o.waypoints,
        initial_length,
        iterations_used: iterations,
        converged: o.converged,
        objective_history: o.history,
        max_residual,
    })
}
