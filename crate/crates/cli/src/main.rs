mod commands;
mod config;
mod error;
mod io;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "ridge", version, about = "Density ridge estimation and manifold unwrapping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset with its ground truth.
    Generate(GenerateArgs),
    /// Project every point onto the density ridge.
    Project(ProjectArgs),
    /// Project, split into basins and stitch one global coordinate system.
    Unwrap(UnwrapArgs),
    /// Ridge-constrained geodesic between two points.
    Geodesic(GeodesicArgs),
    /// Ridge bias on the noisy unit sphere over a bandwidth/noise grid.
    EvalMse(EvalArgs),
    /// SVG scatter plots of a result directory.
    Plot(PlotArgs),
    /// Principal component scores.
    Pca(PcaArgs),
}

#[derive(Args, Clone, Debug)]
pub struct DataArgs {
    /// Built-in dataset name.
    #[arg(long, conflicts_with = "input")]
    pub dataset: Option<String>,
    /// CSV file with a header row, one point per row.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Number of points to generate.
    #[arg(long)]
    pub n: Option<usize>,
    /// Noise standard deviation for generated data.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Clone, Debug)]
pub struct OutArgs {
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads for per-point work (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Clone, Debug)]
pub struct ModelArgs {
    /// Kernel variance sigma^2.
    #[arg(long, conflicts_with = "bandwidth_k")]
    pub bandwidth: Option<f64>,
    /// Neighbour rank for the bandwidth heuristic (default 12).
    #[arg(long)]
    pub bandwidth_k: Option<usize>,
    /// Multiplier on the heuristic kernel length.
    #[arg(long, default_value_t = 1.0)]
    pub bandwidth_scale: f64,
    /// Ignore kernels farther than this many sigma.
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Intrinsic dimension d.
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub ridge_tol: Option<f64>,
    #[arg(long)]
    pub mode_tol: Option<f64>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
}

#[derive(Args, Clone, Debug)]
pub struct GeoArgs {
    /// Neighbour count of the ridge graph.
    #[arg(long, default_value_t = 12)]
    pub knn: usize,
    #[arg(long)]
    pub waypoints: Option<usize>,
    #[arg(long)]
    pub geodesic_iters: Option<usize>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct ProjectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Transport {
    Frame,
    Projection,
}

#[derive(Args, Debug)]
pub struct UnwrapArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub geo: GeoArgs,
    #[arg(long, value_enum, default_value = "frame")]
    pub transport: Transport,
    /// Reference mode id (default: largest basin).
    #[arg(long)]
    pub reference: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct GeodesicArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub geo: GeoArgs,
    /// Index of the start point in the input.
    #[arg(long)]
    pub from: usize,
    /// Index of the end point in the input.
    #[arg(long)]
    pub to: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Kernel variances, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.25, 0.5, 0.7, 1.0, 2.0])]
    pub bandwidths: Vec<f64>,
    /// Noise standard deviations, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.1])]
    pub noise: Vec<f64>,
    #[arg(long, default_value_t = 2016)]
    pub seed: u64,
    #[arg(long)]
    pub ridge_tol: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Result directory written by another command.
    #[arg(long)]
    pub dir: PathBuf,
    /// Where to write the plots (default: the result directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PcaArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of components kept.
    #[arg(long)]
    pub target_dim: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let res = match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Project(a) => commands::project(a),
        Command::Unwrap(a) => commands::unwrap(a),
        Command::Geodesic(a) => commands::geodesic(a),
        Command::EvalMse(a) => commands::eval_mse(a),
        Command::Plot(a) => commands::plot(a),
        Command::Pca(a) => commands::pca(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
