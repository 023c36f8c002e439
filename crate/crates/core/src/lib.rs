//! Density ridge estimation and manifold unwrapping.
//!
//! Noisy samples of a low-dimensional manifold are first projected onto the
//! `d`-dimensional ridge of a Gaussian kernel density estimate by integrating
//! a subspace-constrained gradient flow. The ridge is then cut into attraction
//! basins of the density modes, each basin gets a local chart, and the charts
//! are stitched into one global coordinate system:
//!
//! * for `d = 1`, chart coordinates are arc lengths along the gradient flow and
//!   charts are translated along shortest paths on a neighbour graph;
//! * for `d >= 2`, basins are projected onto the tangent space at their mode,
//!   then transported along ridge-constrained geodesics to a reference mode and
//!   unfolded there.
//!
//! Subspace convention: at every point the Hessian eigenpairs are sorted by
//! descending eigenvalue. The `d` leading eigenvectors span the tangent
//! (parallel) space `Q_par`, the remaining `D - d` (most negative curvature)
//! span the normal space `Q_perp`. A point is on the ridge when the gradient
//! is orthogonal to `Q_perp` and the `Q_perp` eigenvalues are negative.

pub mod atlas;
pub mod cloud;
pub mod datasets;
pub mod error;
pub mod eval;
pub mod flow;
pub mod geodesic;
pub mod graph;
pub mod kde;
pub mod linalg;
pub mod metrics;
pub mod ode;
pub mod pca;
pub mod ridge;

pub use atlas::{Atlas, Chart, ChartSource, TransportMode};
pub use cloud::PointCloud;
pub use error::{Error, Result};
pub use flow::{ChartCoords, FlowConfig, LocalUnwrap, Mode};
pub use geodesic::{GeodesicConfig, GeodesicPath};
pub use graph::NeighborGraph;
pub use kde::{bandwidth_heuristic, DensityModel, HessianSpectrum};
pub use ode::{SolverConfig, Termination, Trajectory};
pub use ridge::{RidgeConfig, RidgeEstimate, RidgePoint};

/// Crate version, written into every output bundle.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
