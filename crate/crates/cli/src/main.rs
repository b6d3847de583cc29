//! `curveflow` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use curveflow::energies::EnergyKind;
use curveflow::metrics::MetricSpec;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "curveflow", version, about = "Distances, flows and smoothing for closed curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a canonical test curve as curve JSON (or CSV by extension).
    Gen(GenArgs),
    /// Geodesic distance estimate by path optimization.
    Dist(DistArgs),
    /// Fréchet distance between two curves.
    Frechet(FrechetArgs),
    /// Run a gradient flow.
    Flow(FlowArgs),
    /// Energy gradient under a metric.
    Grad(GradArgs),
    /// Smoothing homotopies.
    Smooth(SmoothArgs),
    /// Run the inequality checks.
    Verify(VerifyArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Shape {
    Circle,
    Ellipse,
    RoundedSquare,
    FlatSegment,
    PerturbedCircle,
    Stadium,
    Random,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(value_enum)]
    shape: Shape,
    #[arg(long, default_value_t = 256)]
    n: usize,
    /// Radius of circles, scale of the other shapes.
    #[arg(long, alias = "radius", default_value_t = 1.0)]
    size: f64,
    /// Translation applied after construction, e.g. `--center 1,0`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    center: Option<Vec<f64>>,
    /// Seed for `random`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fourier modes of `random` curves.
    #[arg(long, default_value_t = 5)]
    modes: usize,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum MetricKind {
    H0,
    Hj,
    HjTilde,
    ConformalH0,
    MmHa,
}

#[derive(Args, Debug, Clone)]
struct MetricArgs {
    #[arg(long, value_enum, default_value = "hj")]
    metric: MetricKind,
    #[arg(long, default_value_t = 1)]
    j: u32,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Curvature weight of `mm-ha`.
    #[arg(long, default_value_t = 1.0)]
    a: f64,
}

impl MetricArgs {
    fn spec(&self) -> MetricSpec {
        match self.metric {
            MetricKind::H0 => MetricSpec::H0,
            MetricKind::Hj => MetricSpec::hj(self.j, self.lambda),
            MetricKind::HjTilde => MetricSpec::hj_tilde(self.j, self.lambda),
            MetricKind::ConformalH0 => MetricSpec::ConformalH0,
            MetricKind::MmHa => MetricSpec::MmHa { a: self.a },
        }
    }

    fn header(&self) -> String {
        format!("metric={} j={} lambda={}", self.spec().name(), self.j, self.lambda)
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum EnergyName {
    Length,
    Elastic,
    CenterOfMass,
    StdDev,
}

#[derive(Args, Debug, Clone)]
struct EnergyArgs {
    #[arg(long, value_enum, default_value = "length")]
    energy: EnergyName,
    /// Target point of `center-of-mass`; the origin by default.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    target: Option<Vec<f64>>,
}

impl EnergyArgs {
    fn kind(&self, dim: usize) -> EnergyKind {
        match self.energy {
            EnergyName::Length => EnergyKind::Length,
            EnergyName::Elastic => EnergyKind::Elastic,
            EnergyName::CenterOfMass => EnergyKind::CenterOfMass {
                target: self.target.clone().unwrap_or_else(|| vec![0.0; dim]),
            },
            EnergyName::StdDev => EnergyKind::StdDev,
        }
    }
}

#[derive(Args, Debug)]
struct DistArgs {
    #[arg(value_name = "A")]
    first: PathBuf,
    #[arg(value_name = "B")]
    second: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
    /// Resample both inputs to this many samples first.
    #[arg(long)]
    n: Option<usize>,
    /// Number of path steps K.
    #[arg(long, default_value_t = 16)]
    k_rows: usize,
    #[arg(long, default_value_t = 40)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Fourier band of the interior rows.
    #[arg(long, default_value_t = 3)]
    band: usize,
    /// Number of best cyclic alignments that are optimized.
    #[arg(long, default_value_t = 3)]
    shifts: usize,
    #[arg(long)]
    allow_reversal: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// JSON report with the distance, bounds and optimizer state.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the optimized path, one curve per line.
    #[arg(long)]
    path_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FrechetArgs {
    #[arg(value_name = "A")]
    first: PathBuf,
    #[arg(value_name = "B")]
    second: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    /// Also allow orientation reversal.
    #[arg(long)]
    both: bool,
    /// Also compute the sup-norm path length over the optimal correspondence.
    #[arg(long)]
    dinf: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Toggle {
    Auto,
    On,
    Off,
}

#[derive(Args, Debug)]
struct FlowArgs {
    curve: PathBuf,
    #[command(flatten)]
    energy: EnergyArgs,
    #[command(flatten)]
    metric: MetricArgs,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// Time step, or the largest step with adaptive stepping.
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Keep `dt` fixed instead of halving on energy increase.
    #[arg(long)]
    fixed: bool,
    /// Stop at this time.
    #[arg(long)]
    until: Option<f64>,
    /// Scale the velocity by 1/length; `auto` turns it on for `h0`.
    #[arg(long, value_enum, default_value = "auto")]
    conformal: Toggle,
    /// Drop the tangential part of the velocity.
    #[arg(long)]
    normal: bool,
    #[arg(long, default_value_t = 10)]
    resample_every: usize,
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GradArgs {
    curve: PathBuf,
    #[command(flatten)]
    energy: EnergyArgs,
    #[command(flatten)]
    metric: MetricArgs,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SmoothMethod {
    Direction,
    Fourier,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum DecayName {
    Abs,
    Log2,
}

#[derive(Args, Debug)]
struct SmoothArgs {
    curve: PathBuf,
    #[arg(long, value_enum, default_value = "direction")]
    method: SmoothMethod,
    #[arg(long)]
    n: Option<usize>,
    /// Fourier cutoff of the direction function.
    #[arg(long, default_value_t = 16)]
    cutoff: usize,
    #[arg(long, default_value_t = 16)]
    k_rows: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, value_enum, default_value = "abs")]
    decay: DecayName,
    /// Decreasing smoothing times.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.02,0.01")]
    schedule: Vec<f64>,
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    draws: usize,
    #[arg(long, default_value_t = 10_000)]
    sandwich_draws: usize,
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 1e-8, allow_hyphen_values = true)]
    slack: f64,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn init_threads() -> Result<(), commands::CliError> {
    let Ok(v) = std::env::var("CURVEFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| commands::CliError::Usage(format!("CURVEFLOW_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| commands::CliError::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Dist(a) => commands::dist(a),
        Command::Frechet(a) => commands::frechet(a),
        Command::Flow(a) => commands::flow(a),
        Command::Grad(a) => commands::grad(a),
        Command::Smooth(a) => commands::smooth(a),
        Command::Verify(a) => commands::verify(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
