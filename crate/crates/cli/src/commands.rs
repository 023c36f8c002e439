use std::fs;
use std::path::Path;

use ridge_core::atlas::{translate_1d, unfold, AtlasConfig};
use ridge_core::datasets::{DatasetSpec, LabeledDataset};
use ridge_core::eval::{sphere_mse_table, MseSweepConfig};
use ridge_core::flow::{find_modes, unwrap_local_1d};
use ridge_core::geodesic::geodesic as solve_geodesic;
use ridge_core::metrics::{diameter, procrustes, spearman, sphere_mse};
use ridge_core::pca::pca_reduce;
use ridge_core::ridge::project_cloud;
use ridge_core::{
    bandwidth_heuristic, Atlas, DensityModel, FlowConfig, LocalUnwrap, NeighborGraph, PointCloud, RidgeConfig, RidgeEstimate,
    TransportMode, VERSION,
};
use serde_json::json;

use crate::config::{Bandwidth, RunConfig};
use crate::error::CliError;
use crate::io::{names, num, read_cloud, read_table, write_cloud, write_csv, write_json};
use crate::plot::{project2, Scatter};
use crate::{
    DataArgs, EvalArgs, GenerateArgs, GeodesicArgs, ModelArgs, OutArgs, PcaArgs, PlotArgs, ProjectArgs, Transport, UnwrapArgs,
};

struct Data {
    points: PointCloud,
    dataset: Option<LabeledDataset>,
}

fn base_config(command: &str, out: &OutArgs) -> RunConfig {
    RunConfig {
        version: VERSION.to_string(),
        command: command.to_string(),
        dataset: None,
        input: None,
        seed: 0,
        bandwidth: Bandwidth::Heuristic { k: 12, scale: 1.0 },
        resolved_sigma2: None,
        cutoff: None,
        dim: 0,
        knn: 12,
        ridge: RidgeConfig::default(),
        flow: FlowConfig::default(),
        atlas: AtlasConfig::default(),
        endpoints: None,
        target_dim: None,
        sweep: None,
        threads: out.threads,
        out: out.out.clone(),
    }
}

fn setup(out: &OutArgs) -> Result<(), CliError> {
    if let Some(t) = out.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    fs::create_dir_all(&out.out)?;
    Ok(())
}

fn load(args: &DataArgs, cfg: &mut RunConfig) -> Result<Data, CliError> {
    cfg.seed = args.seed;
    match (&args.dataset, &args.input) {
        (Some(name), None) => {
            let mut spec = DatasetSpec::by_name(name)?;
            if let Some(n) = args.n {
                spec.set_n(n);
            }
            if let Some(sd) = args.noise {
                spec.set_noise(sd);
            }
            let ds = spec.generate(args.seed)?;
            cfg.dataset = Some(spec);
            Ok(Data {
                points: ds.points.clone(),
                dataset: Some(ds),
            })
        }
        (None, Some(path)) => {
            if args.n.is_some() || args.noise.is_some() {
                return Err(CliError::Usage("--n and --noise apply to --dataset only".into()));
            }
            cfg.input = Some(path.clone());
            Ok(Data {
                points: read_cloud(path)?,
                dataset: None,
            })
        }
        _ => Err(CliError::Usage("give exactly one of --dataset or --input".into())),
    }
}

fn apply_model_args(m: &ModelArgs, cfg: &mut RunConfig) {
    cfg.dim = m.dim;
    cfg.cutoff = m.cutoff;
    cfg.bandwidth = match m.bandwidth {
        Some(s2) => Bandwidth::Explicit { sigma2: s2 },
        None => Bandwidth::Heuristic {
            k: m.bandwidth_k.unwrap_or(12),
            scale: m.bandwidth_scale,
        },
    };
    let r = &mut cfg.ridge;
    if let Some(x) = m.ridge_tol {
        r.ridge_tol = x;
    }
    if let Some(x) = m.mode_tol {
        r.mode_tol = x;
        cfg.flow.mode_tol = x;
    }
    for s in [&mut r.solver, &mut cfg.flow.solver] {
        if let Some(x) = m.abs_tol {
            s.abs_tol = x;
        }
        if let Some(x) = m.rel_tol {
            s.rel_tol = x;
        }
        if let Some(x) = m.max_steps {
            s.max_steps = x;
        }
    }
}

fn build_model(points: &PointCloud, cfg: &mut RunConfig) -> Result<DensityModel, CliError> {
    let s2 = match cfg.bandwidth {
        Bandwidth::Explicit { sigma2 } => sigma2,
        Bandwidth::Heuristic { k, scale } => {
            let h = bandwidth_heuristic(points, k)? * scale;
            h * h
        }
    };
    cfg.resolved_sigma2 = Some(s2);
    let mut model = DensityModel::new(points.clone(), s2)?;
    if let Some(c) = cfg.cutoff {
        if c.is_nan() || c <= 0.0 {
            return Err(CliError::Usage("--cutoff must be positive".into()));
        }
        model = model.with_cutoff(c);
    }
    Ok(model)
}

fn write_ridge(dir: &Path, est: &RidgeEstimate<'_>) -> Result<(), CliError> {
    let dim = est.model.dim();
    let mut header: Vec<String> = ["index", "converged", "residual", "steps"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(names("x", dim));
    let rows: Vec<Vec<String>> = est
        .points
        .iter()
        .map(|p| {
            let mut r = vec![
                p.origin_index.to_string(),
                (p.converged as u8).to_string(),
                num(p.residual),
                p.steps.to_string(),
            ];
            r.extend(p.position.iter().map(|&x| num(x)));
            r
        })
        .collect();
    write_csv(&dir.join("ridge.csv"), &header, &rows)
}

fn ridge_metrics(est: &RidgeEstimate<'_>, data: &Data) -> serde_json::Value {
    let conv: Vec<_> = est.points.iter().filter(|p| p.converged).collect();
    let max_residual = conv.iter().map(|p| p.residual).fold(0.0, f64::max);
    let mut m = json!({
        "version": VERSION,
        "n": est.points.len(),
        "converged": conv.len(),
        "converged_fraction": est.converged_fraction(),
        "max_residual_converged": max_residual,
        "mean_steps": est.points.iter().map(|p| p.steps as f64).sum::<f64>() / est.points.len() as f64,
    });
    if let Some(ds) = &data.dataset {
        let mse = conv
            .iter()
            .map(|p| {
                p.position
                    .iter()
                    .zip(ds.clean_points.point(p.origin_index))
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / conv.len().max(1) as f64;
        m["mse_to_clean"] = json!(mse);
        if ds.name == "sphere" || ds.name == "hemisphere" {
            let pos: Vec<_> = conv.iter().map(|p| p.position.clone()).collect();
            m["sphere_mse"] = json!(sphere_mse(&pos));
        }
    }
    m
}

pub fn generate(a: GenerateArgs) -> Result<(), CliError> {
    setup(&a.out)?;
    let mut cfg = base_config("generate", &a.out);
    if a.data.input.is_some() {
        return Err(CliError::Usage("generate needs --dataset".into()));
    }
    let data = load(&a.data, &mut cfg)?;
    let ds = data.dataset.expect("generated");
    let dir = &a.out.out;
    write_cloud(&dir.join("points.csv"), "x", &ds.points)?;
    write_cloud(&dir.join("truth.csv"), "t", &ds.truth)?;
    write_cloud(&dir.join("clean.csv"), "x", &ds.clean_points)?;
    write_json(&dir.join("config.json"), &cfg)
}

pub fn project(a: ProjectArgs) -> Result<(), CliError> {
    setup(&a.out)?;
    let mut cfg = base_config("project", &a.out);
    let data = load(&a.data, &mut cfg)?;
    apply_model_args(&a.model, &mut cfg);
    let model = build_model(&data.points, &mut cfg)?;
    let est = project_cloud(&model, &data.points, cfg.dim, &cfg.ridge)?;
    let dir = &a.out.out;
    write_ridge(dir, &est)?;
    write_json(&dir.join("metrics.json"), &ridge_metrics(&est, &data))?;
    write_json(&dir.join("config.json"), &cfg)
}

fn write_coords(dir: &Path, n: usize, d: usize, local: &LocalUnwrap, atlas: &Atlas) -> Result<(), CliError> {
    let mut header = vec!["index".to_string(), "chart".to_string()];
    header.extend(names("l", d));
    header.extend(names("g", d));
    let mut rows: Vec<Vec<String>> = (0..n)
        .map(|i| {
            let mut r = vec![i.to_string(), String::new()];
            r.extend(std::iter::repeat_n(String::new(), 2 * d));
            r
        })
        .collect();
    for chart in &atlas.charts {
        for (&i, u) in chart.indices.iter().zip(&chart.local_coords) {
            rows[i][1] = chart.mode_id.to_string();
            for k in 0..d {
                rows[i][2 + k] = num(u[k]);
            }
        }
    }
    for (i, g) in atlas.global_coords.iter().enumerate() {
        if let Some(g) = g {
            for k in 0..d {
                rows[i][2 + d + k] = num(g[k]);
            }
        }
    }
    debug_assert_eq!(local.labels.len(), n);
    write_csv(&dir.join("coords.csv"), &header, &rows)
}

fn write_modes(dir: &Path, local: &LocalUnwrap, atlas: &Atlas) -> Result<(), CliError> {
    let modes: Vec<_> = local
        .modes
        .iter()
        .enumerate()
        .map(|(id, m)| {
            json!({
                "id": id,
                "position": m.position.as_slice(),
                "basin_size": m.basin.len(),
                "basis": m.basis.column_iter().map(|c| c.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
                "offset": atlas.offsets[id].as_slice(),
                "geodesic_length": atlas.geodesics[id].as_ref().map(|g| g.length),
            })
        })
        .collect();
    write_json(
        &dir.join("modes.json"),
        &json!({
            "version": VERSION,
            "reference": atlas.reference_mode_id,
            "graph_k": atlas.graph_k,
            "excluded": local.excluded,
            "modes": modes,
            "orientation": atlas.orientation,
        }),
    )
}

pub fn unwrap(a: UnwrapArgs) -> Result<(), CliError> {
    setup(&a.out)?;
    let mut cfg = base_config("unwrap", &a.out);
    let data = load(&a.data, &mut cfg)?;
    apply_model_args(&a.model, &mut cfg);
    cfg.knn = a.geo.knn;
    cfg.atlas.knn = a.geo.knn;
    cfg.atlas.knn_max = cfg.atlas.knn_max.max(a.geo.knn);
    cfg.atlas.reference = a.reference;
    cfg.atlas.transport = match a.transport {
        Transport::Frame => TransportMode::Frame,
        Transport::Projection => TransportMode::Projection,
    };
    if let Some(w) = a.geo.waypoints {
        cfg.atlas.geodesic.n_waypoints = w;
    }
    if let Some(it) = a.geo.geodesic_iters {
        cfg.atlas.geodesic.max_outer_iters = it;
    }
    let model = build_model(&data.points, &mut cfg)?;
    let est = project_cloud(&model, &data.points, cfg.dim, &cfg.ridge)?;
    let (local, atlas) = if cfg.dim == 1 {
        let local = unwrap_local_1d(&model, &est, &cfg.flow)?;
        let atlas = translate_1d(&est, &local, &cfg.atlas)?;
        (local, atlas)
    } else {
        let local = find_modes(&model, &est, &cfg.flow)?;
        let atlas = unfold(&est, &local, &cfg.atlas)?;
        (local, atlas)
    };
    let dir = &a.out.out;
    write_ridge(dir, &est)?;
    write_coords(dir, data.points.len(), cfg.dim, &local, &atlas)?;
    write_modes(dir, &local, &atlas)?;

    let mut m = ridge_metrics(&est, &data);
    let covered = atlas.covered();
    m["charts"] = json!(atlas.charts.len());
    m["covered"] = json!(covered.len());
    if let (Some(ds), false) = (&data.dataset, covered.is_empty()) {
        let idx: Vec<usize> = covered.iter().map(|c| c.0).collect();
        if cfg.dim == 1 {
            let g: Vec<f64> = covered.iter().map(|c| c.1[0]).collect();
            let t: Vec<f64> = idx.iter().map(|&i| ds.truth.point(i)[0]).collect();
            if let Ok(s) = spearman(&g, &t) {
                m["spearman_truth"] = json!(s);
            }
            let span = g.iter().cloned().fold(f64::MIN, f64::max) - g.iter().cloned().fold(f64::MAX, f64::min);
            m["span"] = json!(span);
        } else if ds.truth.dim() == cfg.dim && covered.len() > cfg.dim {
            let rows: Vec<_> = covered.iter().map(|c| c.1.clone()).collect();
            let got = PointCloud::from_vectors(&rows)?;
            let want = ds.truth.select(&idx)?;
            let fit = procrustes(&got, &want)?;
            let diam = diameter(&data.points);
            m["procrustes_rms"] = json!(fit.rms);
            m["data_diameter"] = json!(diam);
            m["relative_rms"] = json!(fit.rms / diam);
        }
    }
    write_json(&dir.join("metrics.json"), &m)?;
    write_json(&dir.join("config.json"), &cfg)
}

pub fn geodesic(a: GeodesicArgs) -> Result<(), CliError> {
    setup(&a.out)?;
    let mut cfg = base_config("geodesic", &a.out);
    let data = load(&a.data, &mut cfg)?;
    apply_model_args(&a.model, &mut cfg);
    cfg.knn = a.geo.knn;
    cfg.endpoints = Some((a.from, a.to));
    let gc = &mut cfg.atlas.geodesic;
    if let Some(w) = a.geo.waypoints {
        gc.n_waypoints = w;
    }
    if let Some(it) = a.geo.geodesic_iters {
        gc.max_outer_iters = it;
    }
    let n = data.points.len();
    if a.from >= n || a.to >= n {
        return Err(CliError::Usage(format!("endpoint index out of range for {n} points")));
    }
    let model = build_model(&data.points, &mut cfg)?;
    let est = project_cloud(&model, &data.points, cfg.dim, &cfg.ridge)?;
    let keep = est.converged_indices();
    let node = |i: usize| {
        keep.binary_search(&i).map_err(|_| {
            CliError::Core(ridge_core::Error::Numerical {
                reason: format!("point {i} did not converge to the ridge"),
                point: est.points[i].position.as_slice().to_vec(),
            })
        })
    };
    let (s, t) = (node(a.from)?, node(a.to)?);
    let rows: Vec<&[f64]> = keep.iter().map(|&i| est.points[i].position.as_slice()).collect();
    let graph = NeighborGraph::build_knn(PointCloud::from_rows(&rows)?, cfg.knn)?;
    let path = solve_geodesic(&est, &graph, s, t, &cfg.atlas.geodesic)?;

    let dir = &a.out.out;
    write_ridge(dir, &est)?;
    let wp = PointCloud::from_vectors(&path.waypoints)?;
    write_cloud(&dir.join("geodesic.csv"), "x", &wp)?;
    let euclid = (&path.waypoints[path.waypoints.len() - 1] - &path.waypoints[0]).norm();
    write_json(
        &dir.join("metrics.json"),
        &json!({
            "version": VERSION,
            "length": path.length,
            "initial_length": path.initial_length,
            "euclidean": euclid,
            "iterations": path.iterations_used,
            "converged": path.converged,
            "max_residual": path.max_residual,
            "objective_history": path.objective_history,
        }),
    )?;
    let sc = Scatter {
        title: "geodesic",
        points: keep.iter().map(|&i| project2(est.points[i].position.as_slice())).collect(),
        labels: None,
        overlay: Some(path.waypoints.iter().map(|w| project2(w.as_slice())).collect()),
    };
    fs::write(dir.join("geodesic.svg"), sc.render())?;
    write_json(&dir.join("config.json"), &cfg)
}

pub fn eval_mse(a: EvalArgs) -> Result<(), CliError> {
    setup(&a.out)?;
    let mut cfg = base_config("eval-mse", &a.out);
    let mut sweep = MseSweepConfig {
        n: a.n,
        bandwidths: a.bandwidths.clone(),
        noise_levels: a.noise.clone(),
        seed: a.seed,
        ..Default::default()
    };
    if let Some(t) = a.ridge_tol {
        sweep.ridge.ridge_tol = t;
    }
    cfg.seed = a.seed;
    cfg.dim = sweep.d;
    cfg.ridge = sweep.ridge.clone();
    cfg.sweep = Some(sweep.clone());
    let cells = sphere_mse_table(&sweep)?;
    let header: Vec<String> = ["sigma2", "noise", "mse", "converged_fraction", "reference"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                num(c.bandwidth),
                num(c.noise),
                num(c.mse),
                num(c.converged_fraction),
                c.reference.map(num).unwrap_or_default(),
            ]
        })
        .collect();
    let dir = &a.out.out;
    write_csv(&dir.join("mse.csv"), &header, &rows)?;
    let mut columns = Vec::new();
    for &e in &sweep.noise_levels {
        let col: Vec<_> = cells.iter().filter(|c| c.noise == e).collect();
        let best = col.iter().min_by(|x, y| x.mse.total_cmp(&y.mse)).map(|c| c.bandwidth);
        let upper: Vec<f64> = col.iter().filter(|c| c.bandwidth >= 0.5).map(|c| c.mse).collect();
        columns.push(json!({
            "noise": e,
            "argmin_sigma2": best,
            "increasing_from_0_5": upper.windows(2).all(|w| w[1] > w[0]),
        }));
    }
    write_json(
        &dir.join("metrics.json"),
        &json!({ "version": VERSION, "cells": cells, "columns": columns }),
    )?;
    write_json(&dir.join("config.json"), &cfg)
}

fn column(header: &[String], name: &str) -> Option<usize> {
    header.iter().position(|h| h == name)
}

fn prefixed(header: &[String], prefix: &str) -> Vec<usize> {
    header
        .iter()
        .enumerate()
        .filter(|(_, h)| {
            h.strip_prefix(prefix)
                .is_some_and(|r| !r.is_empty() && r.chars().all(|c| c.is_ascii_digit()))
        })
        .map(|(i, _)| i)
        .collect()
}

fn parse_row(row: &[String], cols: &[usize]) -> Option<Vec<f64>> {
    cols.iter().map(|&c| row[c].parse().ok()).collect()
}

pub fn plot(a: PlotArgs) -> Result<(), CliError> {
    let dir = &a.dir;
    let out = a.out.clone().unwrap_or_else(|| dir.clone());
    let has = |f: &str| dir.join(f).is_file();
    if !dir.is_dir() || !(has("points.csv") || has("ridge.csv")) {
        return Err(CliError::Usage(format!("{} holds no points.csv or ridge.csv", dir.display())));
    }
    fs::create_dir_all(&out)?;
    if has("points.csv") {
        let (h, rows) = read_table(&dir.join("points.csv"))?;
        let cols = prefixed(&h, "x");
        let pts = rows
            .iter()
            .filter_map(|r| parse_row(r, &cols))
            .map(|p| project2(&p))
            .collect();
        let sc = Scatter {
            title: "data",
            points: pts,
            labels: None,
            overlay: None,
        };
        fs::write(out.join("points.svg"), sc.render())?;
    }
    if has("ridge.csv") {
        let (h, rows) = read_table(&dir.join("ridge.csv"))?;
        let cols = prefixed(&h, "x");
        let ridge: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| parse_row(r, &cols))
            .map(|p| project2(&p))
            .collect();
        let overlay = if has("geodesic.csv") {
            let (gh, grows) = read_table(&dir.join("geodesic.csv"))?;
            let gc = prefixed(&gh, "x");
            Some(grows.iter().filter_map(|r| parse_row(r, &gc)).map(|p| project2(&p)).collect())
        } else {
            None
        };
        let sc = Scatter {
            title: "ridge",
            points: ridge.clone(),
            labels: None,
            overlay,
        };
        fs::write(out.join("ridge.svg"), sc.render())?;

        if has("coords.csv") {
            let (ch, crows) = read_table(&dir.join("coords.csv"))?;
            let chart_col = column(&ch, "chart").ok_or_else(|| CliError::Usage("coords.csv lacks a chart column".into()))?;
            let labels: Vec<Option<usize>> = crows.iter().map(|r| r[chart_col].parse().ok()).collect();
            if labels.len() != ridge.len() {
                return Err(CliError::Usage("coords.csv and ridge.csv differ in row count".into()));
            }
            let sc = Scatter {
                title: "basins",
                points: ridge,
                labels: Some(labels.clone()),
                overlay: None,
            };
            fs::write(out.join("basins.svg"), sc.render())?;

            let gcols = prefixed(&ch, "g");
            let (mut pts, mut lab) = (Vec::new(), Vec::new());
            for (r, l) in crows.iter().zip(&labels) {
                if let Some(g) = parse_row(r, &gcols) {
                    // One-dimensional coordinates are spread out by chart.
                    pts.push(if g.len() == 1 {
                        (g[0], l.unwrap_or(0) as f64)
                    } else {
                        project2(&g)
                    });
                    lab.push(*l);
                }
            }
            let sc = Scatter {
                title: "global coordinates",
                points: pts,
                labels: Some(lab),
                overlay: None,
            };
            fs::write(out.join("global.svg"), sc.render())?;
        }
    }
    Ok(())
}

pub fn pca(a: PcaArgs) -> Result<(), CliError> {
    setup(&a.out)?;
    let mut cfg = base_config("pca", &a.out);
    let data = load(&a.data, &mut cfg)?;
    cfg.target_dim = Some(a.target_dim);
    let (scores, fit) = pca_reduce(&data.points, a.target_dim)?;
    let dir = &a.out.out;
    write_cloud(&dir.join("scores.csv"), "pc", &scores)?;
    write_json(&dir.join("pca.json"), &json!({ "version": VERSION, "pca": fit }))?;
    write_json(&dir.join("config.json"), &cfg)
}
