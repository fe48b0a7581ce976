use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "curvemeas", version, about = "Approximate probability measures by measures on curves")]
pub struct Cli {
    /// Worker threads (default: all cores). CURVEMEAS_THREADS takes precedence.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Minimize W_p^p + Λℒ for one Λ
    Solve(SolveArgs),
    /// Solve over a decreasing list of Λ with warm starts
    Sweep(SweepArgs),
    /// Length functional of a curve measure
    Length(LengthArgs),
    /// Uniform approximation of a curve measure by a longer tree
    Approx(ApproxArgs),
    /// Optimal transport between two discrete measures
    Transport(TransportArgs),
    /// Run a validation suite
    Validate(ValidateArgs),
    /// Draw samples from a density family
    Sample(SampleArgs),
}

pub fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be > 0"))
    }
}

fn exponent(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v >= 1.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("p = {v} must be >= 1"))
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ModeArg {
    Uniform,
    Relaxed,
}

impl From<ModeArg> for curvemeas::Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Uniform => curvemeas::Mode::Uniform,
            ModeArg::Relaxed => curvemeas::Mode::Relaxed,
        }
    }
}

/// Solver flags shared by `solve` and `sweep`.
#[derive(Args, Debug, Clone)]
pub struct SolverFlags {
    /// Measure file (.json or .csv)
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 2.0, value_parser = exponent)]
    pub p: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Relaxed)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(2..))]
    pub vertices: u64,
    /// Quadrature sites per unit length
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub quadrature: u64,
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Disable leaf pruning and edge splitting
    #[arg(long)]
    pub no_topology: bool,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Also write an SVG picture (planar inputs only)
    #[arg(long)]
    pub svg: bool,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub solver: SolverFlags,
    #[arg(long, value_parser = positive_f64)]
    pub lambda: f64,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false, id = "grid")]
pub struct LambdaGrid {
    /// Comma-separated values
    #[arg(long, value_delimiter = ',', value_parser = positive_f64)]
    pub lambdas: Option<Vec<f64>>,
    /// `lo:hi:n`, geometrically spaced
    #[arg(long)]
    pub lambda_range: Option<String>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub solver: SolverFlags,
    #[command(flatten)]
    pub grid: LambdaGrid,
}

#[derive(Args, Debug)]
pub struct LengthArgs {
    /// Curve measure file
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Args, Debug)]
pub struct ApproxArgs {
    /// Curve measure file
    #[arg(long)]
    pub input: PathBuf,
    /// Cubes of side 1/n
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 2.0, value_parser = exponent)]
    pub p: f64,
    /// Output directory (report goes to stdout otherwise)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TransportArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, default_value_t = 2.0, value_parser = exponent)]
    pub p: f64,
    /// Output directory (summary goes to stdout otherwise)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Suite {
    TwoDirac,
    Invariants,
    All,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    /// Quadrature sites per unit length for solver runs
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub quadrature: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (report goes to stdout otherwise)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// Density family JSON, e.g. {"family":"gaussian","mean":[0,0],"cov":[[1,0],[0,1]]}
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Measure file to write
    #[arg(long)]
    pub output: PathBuf,
}
