use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "poi",
    version,
    about = "Functional linear regression with points of impact"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate curves and responses and write a curve bundle.
    Simulate(SimulateArgs),
    /// Detect points of impact in a curve bundle with responses.
    Detect(DetectArgs),
    /// Fit the augmented model with BIC selection.
    Fit(FitArgs),
    /// Leave-one-out prediction error of the three model kinds.
    Cv(CvArgs),
    /// Run a seeded simulation study.
    Study(StudyArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; without it the main result goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExclusionArg {
    /// Radius sqrt(delta) / 2.
    Sqrt,
    /// Radius delta |log delta|.
    Dlogd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProcessArg {
    Bm,
    Fbm,
    Ou,
}

#[derive(Debug, Args)]
pub struct Input {
    /// Curve bundle (CSV); falls back to `data.path` in the config.
    pub data: Option<PathBuf>,
    /// Cases with more missing curve values than this are dropped.
    #[arg(long)]
    pub max_missing: Option<usize>,
}

#[derive(Debug, Args)]
pub struct Detection {
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long = "cutoff-A")]
    pub cutoff_a: Option<f64>,
    #[arg(long, value_enum)]
    pub exclusion: Option<ExclusionArg>,
    #[arg(long)]
    pub max_candidates: Option<usize>,
}

#[derive(Debug, Args)]
pub struct Selection {
    /// Comma-separated windows or lo:hi:count.
    #[arg(long)]
    pub delta_grid: Option<String>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub max_vars: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub process: Option<ProcessArg>,
    #[arg(long)]
    pub hurst: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub sigma_u: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    /// Impact locations, comma-separated.
    #[arg(long)]
    pub taus: Option<String>,
    /// Impact coefficients, comma-separated.
    #[arg(long)]
    pub betas: Option<String>,
    /// Polynomial slope coefficients in ascending order.
    #[arg(long)]
    pub slope: Option<String>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    /// Write curves without the response column.
    #[arg(long)]
    pub no_response: bool,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub detection: Detection,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub detection: Detection,
    #[command(flatten)]
    pub selection: Selection,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub input: Input,
    #[command(flatten)]
    pub detection: Detection,
    #[command(flatten)]
    pub selection: Selection,
    /// Reselect the model inside every fold.
    #[arg(long)]
    pub nested: bool,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub detection: Detection,
    #[command(flatten)]
    pub selection: Selection,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Run replications one after another.
    #[arg(long)]
    pub serial: bool,
}
