//! Bias of the ridge estimate on a noisy unit sphere as a function of the
//! kernel bandwidth and the noise level.

use serde::{Deserialize, Serialize};

use crate::datasets::{make_sphere, SphereConfig};
use crate::error::Result;
use crate::kde::DensityModel;
use crate::metrics::sphere_mse;
use crate::ridge::{project_cloud, RidgeConfig};

/// Published MSE values: `(bandwidth, noise, mse)`.
pub const REFERENCE_TABLE: [(f64, f64, f64); 12] = [
    (0.1, 0.05, 0.0103),
    (0.25, 0.05, 0.0079),
    (0.5, 0.05, 0.0140),
    (0.7, 0.05, 0.0347),
    (1.0, 0.05, 0.1256),
    (2.0, 0.05, 0.2046),
    (0.1, 0.1, 0.0973),
    (0.25, 0.1, 0.0909),
    (0.5, 0.1, 0.0969),
    (0.7, 0.1, 0.1267),
    (1.0, 0.1, 0.1901),
    (2.0, 0.1, 0.2738),
];

pub fn reference_value(bandwidth: f64, noise: f64) -> Option<f64> {
    REFERENCE_TABLE
        .iter()
        .find(|(b, e, _)| (b - bandwidth).abs() < 1e-12 && (e - noise).abs() < 1e-12)
        .map(|t| t.2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MseSweepConfig {
    pub n: usize,
    /// Kernel variances `sigma^2`.
    pub bandwidths: Vec<f64>,
    /// Noise standard deviations.
    pub noise_levels: Vec<f64>,
    pub d: usize,
    pub seed: u64,
    pub ridge: RidgeConfig,
}

impl Default for MseSweepConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            bandwidths: vec![0.1, 0.25, 0.5, 0.7, 1.0, 2.0],
            noise_levels: vec![0.05, 0.1],
            d: 2,
            seed: 2016,
            ridge: RidgeConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MseCell {
    pub bandwidth: f64,
    pub noise: f64,
    pub mse: f64,
    pub converged_fraction: f64,
    pub reference: Option<f64>,
}

/// One cell: sample the sphere, project onto the ridge, average the squared
/// radial error of the converged points.
pub fn sphere_mse_cell(cfg: &MseSweepConfig, bandwidth: f64, noise: f64) -> Result<MseCell> {
    let data = make_sphere(
        &SphereConfig {
            n: cfg.n,
            noise_sd: noise,
            hemisphere: false,
        },
        cfg.seed,
    )?;
    let model = DensityModel::new(data.points.clone(), bandwidth)?;
    let est = project_cloud(&model, &data.points, cfg.d, &cfg.ridge)?;
    let conv: Vec<_> = est
        .points
        .iter()
        .filter(|p| p.converged)
        .map(|p| p.position.clone())
        .collect();
    Ok(MseCell {
        bandwidth,
        noise,
        mse: sphere_mse(&conv),
        converged_fraction: est.converged_fraction(),
        reference: reference_value(bandwidth, noise),
    })
}

/// Full grid, noise-major.
pub fn sphere_mse_table(cfg: &MseSweepConfig) -> Result<Vec<MseCell>> {
    let mut out = Vec::new();
    for &e in &cfg.noise_levels {
        for &b in &cfg.bandwidths {
            out.push(sphere_mse_cell(cfg, b, e)?);
        }
    }
    Ok(out)
}
