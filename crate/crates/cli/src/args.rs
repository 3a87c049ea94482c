use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "ssmfrc", version, about = "Forced response curves of mechanical systems through spectral submanifold reduction")]
pub struct Cli {
    /// Configuration file (JSON); flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for the parallel regions.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Only report errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    /// More log output; repeat for debug level.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Builtin model generators.
    #[command(subcommand)]
    Model(ModelCommand),
    /// Eigenvalue table of the linearization.
    Eig(EigArgs),
    /// Inner resonance sets and the external resonance vector.
    Resonance(ReductionArgs),
    /// Autonomous SSM and its normal-form reduced dynamics.
    Ssm(SsmArgs),
    /// Forced response curve by continuation of slow-phase equilibria.
    Frc(FrcArgs),
    /// Periodic orbit of the full system.
    Oracle(OracleArgs),
    /// Compares FRC points against full-system orbits.
    Validate(ValidateArgs),
    /// Repeats the FRC at increasing SSM orders until it stops changing.
    Converge(ConvergeArgs),
}

#[derive(Subcommand, Debug)]
pub enum ModelCommand {
    /// Writes a builtin model to the model file format.
    Gen(GenArgs),
    /// Lists builtin generators and their parameter defaults.
    List(OutputArgs),
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Generator name (chain, hc-beam, moving-beam).
    #[arg(long)]
    pub name: String,

    /// Generator parameter as `key=value`; the value is read as JSON when possible.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,

    /// Generator parameters as one JSON object; `--param` entries override it.
    #[arg(long = "params", value_name = "JSON")]
    pub params_json: Option<String>,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Model file, or `builtin:<name>` for a generated model.
    #[arg(long)]
    pub model: String,

    /// JSON object of generator parameters for a builtin model.
    #[arg(long, value_name = "JSON")]
    pub model_params: Option<String>,
}

#[derive(Args, Debug)]
pub struct EigArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Number of eigenvalue pairs; all of them by default.
    #[arg(long)]
    pub count: Option<usize>,

    #[arg(long, default_value = "text", value_parser = ["text", "json"])]
    pub format: String,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct ReductionArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Zero-based ordinals of the master eigenvalue pairs, e.g. `0,1`.
    #[arg(long, value_delimiter = ',')]
    pub master: Vec<usize>,

    /// SSM truncation order.
    #[arg(long, default_value_t = 3)]
    pub order: u32,

    /// Highest degree searched for inner resonances; the SSM order by default.
    #[arg(long)]
    pub max_res_order: Option<u32>,

    /// Resonance tolerance; 5% of the smallest master frequency by default.
    #[arg(long)]
    pub res_tol: Option<f64>,

    /// Frequency fixing the external resonance vector; the middle of the
    /// frequency range, or the first master frequency, by default.
    #[arg(long)]
    pub omega_ref: Option<f64>,

    /// Largest denominator tried for the external resonance ratios.
    #[arg(long, default_value_t = 12)]
    pub max_denominator: i64,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct SsmArgs {
    #[command(flatten)]
    pub reduction: ReductionArgs,

    /// Include every nonzero manifold coefficient in the output.
    #[arg(long)]
    pub coefficients: bool,
}

#[derive(Args, Debug, Clone)]
pub struct BranchArgs {
    /// Frequency range `lo:hi`.
    #[arg(long, value_name = "LO:HI")]
    pub omega_range: String,

    #[arg(long)]
    pub epsilon: f64,

    /// Slow-phase coordinates (polar, cartesian).
    #[arg(long, default_value = "cartesian")]
    pub coords: String,

    /// Initial equilibrium strategy (root-find, forward-simulate).
    #[arg(long, default_value = "root-find")]
    pub seed_strategy: String,

    /// Frequency of the initial equilibrium; the lower range end by default.
    #[arg(long)]
    pub seed_omega: Option<f64>,

    /// Initial guess file: `{"coords": ..., "values": [...]}` or an `oracle` report.
    #[arg(long, value_name = "FILE")]
    pub seed_guess: Option<PathBuf>,

    /// Largest continuation step in the scaled (state, parameter) metric.
    #[arg(long, default_value_t = 0.05)]
    pub h_max: f64,

    #[arg(long, default_value_t = 20_000)]
    pub max_steps: usize,

    /// Zero-based DOF indices reported in the amplitude columns; all by default.
    #[arg(long, value_delimiter = ',')]
    pub dofs: Vec<usize>,

    /// Samples per period for amplitudes.
    #[arg(long, default_value_t = 128)]
    pub samples: usize,

    /// Leave out the non-autonomous correction of the reconstruction.
    #[arg(long)]
    pub skip_x0: bool,

    /// Re-solve the branch at this many uniformly spaced frequencies.
    #[arg(long)]
    pub resample: Option<usize>,
}

#[derive(Args, Debug)]
pub struct FrcArgs {
    #[command(flatten)]
    pub reduction: ReductionArgs,

    #[command(flatten)]
    pub branch: BranchArgs,

    /// Plot data file: per-DOF (omega, amplitude) blocks split by stability.
    #[arg(long, value_name = "FILE")]
    pub plot_data: Option<PathBuf>,

    /// Branch summary (JSON).
    #[arg(long, value_name = "FILE")]
    pub summary: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[command(flatten)]
    pub reduction: ReductionArgs,

    #[arg(long)]
    pub omega: Option<f64>,

    #[arg(long)]
    pub epsilon: Option<f64>,

    /// Orbit solver (shoot, colloc, forward).
    #[arg(long, default_value = "colloc")]
    pub method: String,

    /// FRC row used as the initial guess, as `FILE:ROW` with zero-based data rows.
    #[arg(long, value_name = "FILE:ROW")]
    pub seed_from: Option<String>,

    /// Orbit period in forcing periods when no master set is given.
    #[arg(long, default_value_t = 1)]
    pub period_multiple: u32,

    #[arg(long, default_value_t = 128)]
    pub samples: usize,

    /// Collocation subintervals.
    #[arg(long, default_value_t = 10)]
    pub intervals: usize,

    /// Forward integration: periods before giving up.
    #[arg(long, default_value_t = 5000)]
    pub max_periods: usize,

    /// Forward integration: relative Poincare criterion.
    #[arg(long, default_value_t = 1e-3)]
    pub steady_tol: f64,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub reduction: ReductionArgs,

    #[command(flatten)]
    pub branch: BranchArgs,

    /// Number of sampled branch points.
    #[arg(long, default_value_t = 10)]
    pub points: usize,

    /// Orbit solver (shoot, colloc, forward).
    #[arg(long, default_value = "shoot")]
    pub method: String,

    /// Largest accepted relative amplitude difference.
    #[arg(long, default_value_t = 0.02)]
    pub tol: f64,

    /// Smallest hyperbolicity margin of a sampled point.
    #[arg(long, default_value_t = 0.1)]
    pub margin: f64,

    /// Smallest reported amplitude relative to the largest one at a sampled point.
    #[arg(long, default_value_t = 1e-2)]
    pub floor: f64,
}

#[derive(Args, Debug)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub reduction: ReductionArgs,

    #[command(flatten)]
    pub branch: BranchArgs,

    /// Orders `first:last:step`.
    #[arg(long, default_value = "3:9:2", value_name = "FIRST:LAST:STEP")]
    pub orders: String,

    /// Largest accepted FRC change between consecutive orders.
    #[arg(long, default_value_t = 0.02)]
    pub tol: f64,
}
