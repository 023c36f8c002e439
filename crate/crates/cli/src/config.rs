use std::path::PathBuf;

use ridge_core::atlas::AtlasConfig;
use ridge_core::datasets::DatasetSpec;
use ridge_core::eval::MseSweepConfig;
use ridge_core::{FlowConfig, RidgeConfig};
use serde::{Deserialize, Serialize};

/// How the kernel variance was chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bandwidth {
    /// Kernel variance `sigma^2` given directly.
    Explicit { sigma2: f64 },
    /// `(scale * h)^2` where `h` is the mean distance to the `k`-th neighbour.
    Heuristic { k: usize, scale: f64 },
}

/// Everything a run depends on, written next to its outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: String,
    pub command: String,
    pub dataset: Option<DatasetSpec>,
    pub input: Option<PathBuf>,
    pub seed: u64,
    pub bandwidth: Bandwidth,
    /// Kernel variance actually used, filled in once known.
    pub resolved_sigma2: Option<f64>,
    pub cutoff: Option<f64>,
    pub dim: usize,
    pub knn: usize,
    pub ridge: RidgeConfig,
    pub flow: FlowConfig,
    pub atlas: AtlasConfig,
    pub endpoints: Option<(usize, usize)>,
    pub target_dim: Option<usize>,
    pub sweep: Option<MseSweepConfig>,
    pub threads: Option<usize>,
    pub out: PathBuf,
}
