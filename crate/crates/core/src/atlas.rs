//! Local charts at the modes and their assembly into global coordinates.
//!
//! One-dimensional charts are shifted along graph shortest paths. Charts of
//! dimension `d >= 2` are carried along ridge geodesics to a reference mode
//! and placed by walking the geodesic in the reference tangent frame.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::flow::{LocalUnwrap, Mode};
use crate::geodesic::{geodesic, GeodesicConfig, GeodesicPath};
use crate::graph::NeighborGraph;
use crate::linalg::transport_frame;
use crate::ridge::RidgeEstimate;

/// Smallest singular value of `Q_t^T F` accepted during transport.
const MIN_FRAME_OVERLAP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartSource {
    ArcLength,
    TangentProjection,
}

/// How a tangent frame follows a path.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportMode {
    /// Rotate the frame onto each new tangent space by the closest
    /// orthogonal map. Exactly isometric.
    #[default]
    Frame,
    /// Translate the chart points by each path increment and project them
    /// onto the next tangent space. Shrinks the chart by the cosine of the
    /// tangent-space angle at every waypoint.
    Projection,
}

#[derive(Clone, Debug)]
pub struct Chart {
    pub mode_id: usize,
    pub mode: Mode,
    /// Ridge indices of the chart points, aligned with `local_coords`.
    pub indices: Vec<usize>,
    pub local_coords: Vec<DVector<f64>>,
    pub source: ChartSource,
}

impl Chart {
    pub fn d(&self) -> usize {
        self.mode.basis.ncols()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OrientationReport {
    pub chart: usize,
    /// Basis column `k` was matched to reference column `permutation[k]`.
    pub permutation: Vec<usize>,
    pub flipped: Vec<bool>,
    /// The matched basis still disagrees in orientation with the reference.
    pub orientation_mismatch: bool,
}

#[derive(Clone, Debug)]
pub struct Atlas {
    pub charts: Vec<Chart>,
    pub reference_mode_id: usize,
    /// Path from each chart's mode to the reference; `None` for the reference
    /// chart and for one-dimensional atlases.
    pub geodesics: Vec<Option<GeodesicPath>>,
    /// Position of each chart origin in global coordinates.
    pub offsets: Vec<DVector<f64>>,
    /// Per ridge point; `None` for points outside every basin.
    pub global_coords: Vec<Option<DVector<f64>>>,
    pub orientation: Vec<OrientationReport>,
    /// Neighbour count of the graph the charts were connected on (0 when no
    /// graph was needed).
    pub graph_k: usize,
}

impl Atlas {
    /// Global coordinates of the covered points as `(ridge index, coords)`.
    pub fn covered(&self) -> Vec<(usize, &DVector<f64>)> {
        self.global_coords
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|c| (i, c)))
            .collect()
    }

    /// Chart id of every ridge point.
    pub fn chart_labels(&self) -> Vec<Option<usize>> {
        let mut labels = vec![None; self.global_coords.len()];
        for (c, chart) in self.charts.iter().enumerate() {
            for &i in &chart.indices {
                labels[i] = Some(c);
            }
        }
        labels
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AtlasConfig {
    pub knn: usize,
    /// The graph is widened by doubling `knn` up to this value when the
    /// modes are not all connected.
    pub knn_max: usize,
    /// Reference mode; defaults to the mode with the largest basin.
    pub reference: Option<usize>,
    pub transport: TransportMode,
    pub geodesic: GeodesicConfig,
}

impl Default for AtlasConfig {
    fn default() -> Self {
        Self {
            knn: 12,
            knn_max: 96,
            reference: None,
            transport: TransportMode::Frame,
            geodesic: GeodesicConfig::default(),
        }
    }
}

/// Neighbour graph over the ridge points that belong to a basin, followed by
/// the modes.
#[derive(Clone, Debug)]
pub struct RidgeGraph {
    pub graph: NeighborGraph,
    /// Ridge index of node `i` for `i < ridge_index.len()`.
    pub ridge_index: Vec<usize>,
    /// Node of mode `j` is `mode_nodes[j]`.
    pub mode_nodes: Vec<usize>,
}

impl RidgeGraph {
    pub fn build(estimate: &RidgeEstimate<'_>, local: &LocalUnwrap, k: usize) -> Result<Self> {
        let ridge_index: Vec<usize> = (0..local.labels.len()).filter(|&i| local.labels[i].is_some()).collect();
        let mut rows: Vec<&[f64]> = ridge_index.iter().map(|&i| estimate.points[i].position.as_slice()).collect();
        rows.extend(local.modes.iter().map(|m| m.position.as_slice()));
        let nodes = PointCloud::from_rows(&rows)?;
        let k = k.min(nodes.len().saturating_sub(1)).max(1);
        let graph = NeighborGraph::build_knn(nodes, k)?;
        let mode_nodes = (0..local.modes.len()).map(|j| ridge_index.len() + j).collect();
        Ok(Self {
            graph,
            ridge_index,
            mode_nodes,
        })
    }

    /// Builds with `k`, doubling it up to `k_max` until every mode is in the
    /// same component.
    pub fn build_connected(estimate: &RidgeEstimate<'_>, local: &LocalUnwrap, k: usize, k_max: usize) -> Result<Self> {
        let mut k = k;
        loop {
            let g = Self::build(estimate, local, k)?;
            match g.check_modes_connected() {
                Ok(()) => return Ok(g),
                Err(e) if 2 * k > k_max.max(k) || g.graph.k + 1 >= g.graph.len() => return Err(e),
                Err(_) => k *= 2,
            }
        }
    }

    /// Fails with a connectivity error unless all modes share a component.
    pub fn check_modes_connected(&self) -> Result<()> {
        let labels = self.graph.connected_components();
        let comps: Vec<usize> = self.mode_nodes.iter().map(|&n| labels[n]).collect();
        if comps.iter().any(|&c| c != comps[0]) {
            let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
            for (m, &c) in comps.iter().enumerate() {
                match groups.iter_mut().find(|g| g.0 == c) {
                    Some(g) => g.1.push(m),
                    None => groups.push((c, vec![m])),
                }
            }
            let desc: Vec<String> = groups.iter().map(|(c, ms)| format!("component {c}: modes {ms:?}")).collect();
            return Err(Error::Connectivity(format!(
                "ridge is disconnected ({}); increase k or unwrap the components separately",
                desc.join("; ")
            )));
        }
        Ok(())
    }
}

fn default_reference(modes: &[Mode], requested: Option<usize>) -> Result<usize> {
    match requested {
        Some(r) if r >= modes.len() => Err(Error::input(format!(
            "reference mode {r} out of range for {} modes",
            modes.len()
        ))),
        Some(r) => Ok(r),
        None => Ok((0..modes.len())
            .max_by(|&a, &b| modes[a].basin.len().cmp(&modes[b].basin.len()).then(b.cmp(&a)))
            .ok_or_else(|| Error::input("no modes"))?),
    }
}

/// Tangent-space chart at a mode: `Q_par(m)^T (x_i - m)` for its basin.
pub fn build_tangent_chart(estimate: &RidgeEstimate<'_>, mode: &Mode, mode_id: usize) -> Chart {
    let coords = mode
        .basin
        .iter()
        .map(|&i| mode.basis.transpose() * (&estimate.points[i].position - &mode.position))
        .collect();
    Chart {
        mode_id,
        mode: mode.clone(),
        indices: mode.basin.clone(),
        local_coords: coords,
        source: ChartSource::TangentProjection,
    }
}

/// Matches the chart basis columns to `target` (the reference basis carried
/// to this chart) by maximal absolute overlap, flipping signs where needed,
/// and rewrites the chart coordinates accordingly.
pub fn orientation_align(chart: &mut Chart, target: &DMatrix<f64>) -> OrientationReport {
    let d = chart.d();
    let overlap = chart.mode.basis.transpose() * target;
    let mut permutation = vec![usize::MAX; d];
    let mut used_rows = vec![false; d];
    let mut used_cols = vec![false; d];
    for _ in 0..d {
        let mut best = (0, 0, -1.0);
        for r in 0..d {
            for c in 0..d {
                if !used_rows[r] && !used_cols[c] && overlap[(r, c)].abs() > best.2 {
                    best = (r, c, overlap[(r, c)].abs());
                }
            }
        }
        used_rows[best.0] = true;
        used_cols[best.1] = true;
        permutation[best.0] = best.1;
    }
    let flipped: Vec<bool> = (0..d).map(|r| overlap[(r, permutation[r])] < 0.0).collect();
    // New column c is old column r (with sign) where permutation[r] == c.
    let mut map = DMatrix::zeros(d, d);
    for r in 0..d {
        map[(r, permutation[r])] = if flipped[r] { -1.0 } else { 1.0 };
    }
    chart.mode.basis = &chart.mode.basis * &map;
    for c in &mut chart.local_coords {
        *c = map.transpose() * &*c;
    }
    let det = (chart.mode.basis.transpose() * target).determinant();
    OrientationReport {
        chart: chart.mode_id,
        permutation,
        flipped,
        orientation_mismatch: det < 0.0,
    }
}

/// Carries a tangent chart along `path` (starting at the chart's mode) and
/// returns its coordinates in `destination`, an orthonormal basis of the
/// tangent space at the path's end.
pub fn parallel_transport(
    estimate: &RidgeEstimate<'_>,
    chart: &Chart,
    path: &[DVector<f64>],
    destination: &DMatrix<f64>,
    mode: TransportMode,
) -> Result<Vec<DVector<f64>>> {
    match mode {
        TransportMode::Frame => {
            let mut frame = chart.mode.basis.clone();
            for (t, w) in path.iter().enumerate().skip(1) {
                let q = estimate.tangent_basis(w.as_slice())?;
                let (next, smin) = transport_frame(&frame, &q);
                if smin < MIN_FRAME_OVERLAP {
                    return Err(Error::numerical(
                        format!("tangent spaces nearly orthogonal at waypoint {t}"),
                        w.as_slice(),
                    ));
                }
                frame = next;
            }
            let rot = destination.transpose() * frame;
            Ok(chart.local_coords.iter().map(|a| &rot * a).collect())
        }
        TransportMode::Projection => {
            let origin = path.first().unwrap_or(&chart.mode.position).clone();
            let mut pts: Vec<DVector<f64>> = chart.local_coords.iter().map(|a| &origin + &chart.mode.basis * a).collect();
            for t in 1..path.len() {
                let q = estimate.tangent_basis(path[t].as_slice())?;
                let step = &path[t] - &path[t - 1];
                for p in &mut pts {
                    let rel = &*p + &step - &path[t];
                    *p = &path[t] + &q * (q.transpose() * rel);
                }
            }
            let end = path.last().unwrap_or(&origin);
            Ok(pts.iter().map(|p| destination.transpose() * (p - end)).collect())
        }
    }
}

/// Walks `reversed` (reference mode first) in the reference tangent frame.
/// Returns the end point in reference coordinates and the reference frame
/// carried to the end of the path.
pub fn unfold_offset(
    estimate: &RidgeEstimate<'_>,
    reversed: &[DVector<f64>],
    reference_basis: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let d = reference_basis.ncols();
    let mut frame = reference_basis.clone();
    let mut offset = DVector::zeros(d);
    for t in 1..reversed.len() {
        let delta = &reversed[t] - &reversed[t - 1];
        let len = delta.norm();
        if len > 0.0 {
            let xi = frame.transpose() * &delta;
            let xn = xi.norm();
            if xn < MIN_FRAME_OVERLAP * len {
                return Err(Error::numerical(
                    format!("path step {t} is normal to the ridge"),
                    reversed[t].as_slice(),
                ));
            }
            offset += xi * (len / xn);
        }
        let q = estimate.tangent_basis(reversed[t].as_slice())?;
        let (next, smin) = transport_frame(&frame, &q);
        if smin < MIN_FRAME_OVERLAP {
            return Err(Error::numerical(
                format!("tangent spaces nearly orthogonal at waypoint {t}"),
                reversed[t].as_slice(),
            ));
        }
        frame = next;
    }
    Ok((offset, frame))
}

/// Global coordinates for `d >= 2`: tangent charts, geodesics to the
/// reference mode, transport, and unfolding.
pub fn unfold(estimate: &RidgeEstimate<'_>, local: &LocalUnwrap, cfg: &AtlasConfig) -> Result<Atlas> {
    if local.modes.is_empty() {
        return Err(Error::input("no modes to build charts from"));
    }
    let reference = default_reference(&local.modes, cfg.reference)?;
    let rg = RidgeGraph::build_connected(estimate, local, cfg.knn, cfg.knn_max)?;
    let ref_mode = &local.modes[reference];
    let ref_basis = ref_mode.basis.clone();

    struct Placed {
        chart: Chart,
        path: Option<GeodesicPath>,
        offset: DVector<f64>,
        coords: Vec<DVector<f64>>,
        report: OrientationReport,
    }
    let placed: Vec<Result<Placed>> = local
        .modes
        .par_iter()
        .enumerate()
        .map(|(id, mode)| {
            let mut chart = build_tangent_chart(estimate, mode, id);
            if id == reference {
                let report = orientation_align(&mut chart, &ref_basis);
                let coords = chart.local_coords.clone();
                return Ok(Placed {
                    chart,
                    path: None,
                    offset: DVector::zeros(ref_basis.ncols()),
                    coords,
                    report,
                });
            }
            let path = geodesic(
                estimate,
                &rg.graph,
                rg.mode_nodes[id],
                rg.mode_nodes[reference],
                &cfg.geodesic,
            )?;
            let reversed: Vec<DVector<f64>> = path.waypoints.iter().rev().cloned().collect();
            let (offset, carried) = unfold_offset(estimate, &reversed, &ref_basis)?;
            let report = orientation_align(&mut chart, &carried);
            let moved = parallel_transport(estimate, &chart, &path.waypoints, &ref_basis, cfg.transport)?;
            let coords = moved.into_iter().map(|b| &offset + b).collect();
            Ok(Placed {
                chart,
                path: Some(path),
                offset,
                coords,
                report,
            })
        })
        .collect();

    let n = local.labels.len();
    let mut atlas = Atlas {
        charts: Vec::new(),
        reference_mode_id: reference,
        geodesics: Vec::new(),
        offsets: Vec::new(),
        global_coords: vec![None; n],
        orientation: Vec::new(),
        graph_k: rg.graph.k,
    };
    for p in placed {
        let p = p?;
        for (&i, c) in p.chart.indices.iter().zip(p.coords) {
            atlas.global_coords[i] = Some(c);
        }
        atlas.charts.push(p.chart);
        atlas.geodesics.push(p.path);
        atlas.offsets.push(p.offset);
        atlas.orientation.push(p.report);
    }
    Ok(atlas)
}

fn departure_direction(positions: &[DVector<f64>], min_arc: f64) -> DVector<f64> {
    let mut acc = 0.0;
    for t in 1..positions.len() {
        acc += (&positions[t] - &positions[t - 1]).norm();
        if acc >= min_arc {
            return &positions[t] - &positions[0];
        }
    }
    positions.last().unwrap() - &positions[0]
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Stitches one-dimensional arc-length charts into a single coordinate. The
/// reference is the largest basin; the positive direction points towards the
/// mode closest to it along the graph, and every other chart is shifted by
/// its graph distance to the reference.
pub fn translate_1d(estimate: &RidgeEstimate<'_>, local: &LocalUnwrap, cfg: &AtlasConfig) -> Result<Atlas> {
    if estimate.d != 1 || local.charts.len() != local.modes.len() {
        return Err(Error::input("translation needs one arc-length chart per mode on a 1-D ridge"));
    }
    let reference = default_reference(&local.modes, cfg.reference)?;
    let n = local.labels.len();
    let charts: Vec<Chart> = local
        .charts
        .iter()
        .map(|c| Chart {
            mode_id: c.mode_id,
            mode: local.modes[c.mode_id].clone(),
            indices: c.indices.clone(),
            local_coords: c.coords.clone(),
            source: ChartSource::ArcLength,
        })
        .collect();
    let m = local.modes.len();
    let mut offsets = vec![DVector::zeros(1); m];
    let mut scale = vec![1.0; m];
    let mut graph_k = 0;

    if m > 1 {
        let rg = RidgeGraph::build_connected(estimate, local, cfg.knn, cfg.knn_max)?;
        graph_k = rg.graph.k;
        let sigma = estimate.model.sigma();
        let (dist, _) = rg.graph.distances_from(rg.mode_nodes[reference])?;
        let closest = (0..m)
            .filter(|&j| j != reference)
            .min_by(|&a, &b| dist[rg.mode_nodes[a]].total_cmp(&dist[rg.mode_nodes[b]]).then(a.cmp(&b)))
            .expect("at least two modes");
        let paths: Vec<(Vec<DVector<f64>>, f64)> = (0..m)
            .map(|j| {
                if j == reference {
                    return Ok((vec![local.modes[j].position.clone()], 0.0));
                }
                let (p, len) = rg.graph.shortest_path(rg.mode_nodes[reference], rg.mode_nodes[j])?;
                Ok((rg.graph.path_positions(&p), len))
            })
            .collect::<Result<_>>()?;
        let dep = |j: usize| {
            let (p, len) = &paths[j];
            departure_direction(p, sigma.min(len / 2.0))
        };
        let positive = dep(closest);
        let ref_axis = local.modes[reference].basis.column(0).into_owned();
        scale[reference] = sign(ref_axis.dot(&positive));
        for j in (0..m).filter(|&j| j != reference) {
            let (p, len) = &paths[j];
            let s = sign(dep(j).dot(&positive));
            let rev: Vec<DVector<f64>> = p.iter().rev().cloned().collect();
            let arrival = -departure_direction(&rev, sigma.min(len / 2.0));
            let o = sign(local.modes[j].basis.column(0).dot(&arrival));
            offsets[j] = DVector::from_element(1, s * len);
            scale[j] = s * o;
        }
    }

    let mut global = vec![None; n];
    for chart in &charts {
        let j = chart.mode_id;
        for (&i, u) in chart.indices.iter().zip(&chart.local_coords) {
            global[i] = Some(&offsets[j] + u * scale[j]);
        }
    }
    Ok(Atlas {
        charts,
        reference_mode_id: reference,
        geodesics: vec![None; m],
        offsets,
        global_coords: global,
        orientation: Vec::new(),
        graph_k,
    })
}
