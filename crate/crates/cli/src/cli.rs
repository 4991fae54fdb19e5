use std::path::PathBuf;

use clap::{ArgGroup, Args, CommandFactory, Parser, Subcommand, ValueEnum};

/// Seed used whenever `--seed` is not given.
pub const DEFAULT_SEED: u64 = 12345;

#[derive(Debug, Parser)]
#[command(
    name = "heavytail",
    version,
    about = "Tail estimation, simulation and extremal analysis for heavy-tailed time series"
)]
pub struct Cli {
    /// Number of worker threads (default: one per core). Output does not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,

    /// JSON object of flag values for the subcommand; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

/// The clap command tree with every argument allowed to repeat (last one wins).
pub fn command() -> clap::Command {
    fn apply(c: clap::Command) -> clap::Command {
        c.args_override_self(true).mut_subcommands(apply)
    }
    apply(Cli::command())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a series and print it as CSV (`t,x`).
    Simulate(SimulateArgs),
    /// Hill or Weissman estimate from a series in a CSV file.
    Estimate(EstimateArgs),
    /// Closed-form asymptotics for linear processes.
    #[command(subcommand)]
    Theory(TheoryCommand),
    /// Monte Carlo extremal functionals of a stochastic recurrence equation.
    #[command(subcommand)]
    Extremal(ExtremalCommand),
    /// Residual randomness tests on a series in a CSV file.
    Diagnose(DiagnoseArgs),
    /// Run one of the simulation-study presets and write plot-ready files.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelPreset {
    /// Linear AR(1), phi = 0.8, unshifted Pareto innovations (gamma 0.5).
    LinearA,
    /// Linear AR(1), phi = 0.8, shifted Pareto innovations (gamma 0.3).
    LinearB,
    /// Log-perturbed AR(1), phi = 0.8, delta = 0.6, unshifted innovations.
    NonlinearA,
    /// Log-perturbed AR(1), phi = 0.8, delta = 0.6, shifted innovations.
    NonlinearB,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["model", "preset"])))]
pub struct SimulateArgs {
    /// Series model as JSON, inline or a file path.
    #[arg(long, value_name = "JSON")]
    pub model: Option<String>,
    #[arg(long, value_enum)]
    pub preset: Option<ModelPreset>,
    /// Number of observations to output.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Override the burn-in of the model.
    #[arg(long)]
    pub burnin: Option<usize>,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Hill,
    WeissmanDirect,
    WeissmanModel,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// CSV file; a header row is optional.
    #[arg(long)]
    pub input: PathBuf,
    /// Column to read (default: `x` if present, else the last column).
    #[arg(long)]
    pub column: Option<String>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Number of upper order statistics.
    #[arg(long)]
    pub k: usize,
    /// Exceedance probability of the target quantile (Weissman methods).
    #[arg(long)]
    pub t: Option<f64>,
    /// Use absolute values (of the data, or of the residuals for weissman-model).
    #[arg(long)]
    pub abs: bool,
    /// Fit the AR(1) coefficient without centering.
    #[arg(long)]
    pub no_center: bool,
    /// Lower bound for 1 - |phi|^(1/gamma) in the model-based estimator.
    #[arg(long, default_value_t = heavytail::estimators::DEFAULT_TAIL_FACTOR_FLOOR)]
    pub floor: f64,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("coefficients").required(true).args(["phi", "psi"])))]
pub struct CoefArgs {
    /// AR(1) coefficient; the MA weights are phi^j.
    #[arg(long, allow_negative_numbers = true)]
    pub phi: Option<f64>,
    /// Explicit one-sided MA weights psi_0,psi_1,...
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub psi: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
pub enum TheoryCommand {
    /// Limit of P(X > x) / P(Z > x).
    TailRatio {
        #[command(flatten)]
        coef: CoefArgs,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
    },
    /// Asymptotic variance of the Hill estimator on |X|.
    HillAvar {
        #[command(flatten)]
        coef: CoefArgs,
        #[arg(long)]
        gamma: f64,
    },
    /// Ratio of minimal asymptotic RMSEs, residual-based over direct.
    RmseRatio {
        #[arg(long, allow_negative_numbers = true)]
        phi: f64,
        #[arg(long)]
        gamma: f64,
    },
    /// Leading and second-order constants of the tail of X.
    SecondOrder {
        #[command(flatten)]
        coef: CoefArgs,
        #[arg(long)]
        gamma: f64,
        /// Right-tail weight, used for the shifted-Pareto defaults of c, d, c~, d~.
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, requires_all = ["d", "c_tilde", "d_tilde"])]
        c: Option<f64>,
        #[arg(long, allow_negative_numbers = true, requires = "c")]
        d: Option<f64>,
        #[arg(long, requires = "c")]
        c_tilde: Option<f64>,
        #[arg(long, allow_negative_numbers = true, requires = "c")]
        d_tilde: Option<f64>,
    },
}

#[derive(Debug, Args)]
pub struct WalkArgs {
    /// SRE driver as JSON, inline or a file path.
    #[arg(long, value_name = "JSON")]
    pub driver: String,
    /// `auto` solves E A^kappa = 1; otherwise a positive number.
    #[arg(long, default_value = "auto")]
    pub kappa: String,
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    /// Walk length J.
    #[arg(long, default_value_t = 200)]
    pub horizon: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    All,
    Some,
}

#[derive(Debug, Subcommand)]
pub enum ExtremalCommand {
    /// Extremal index.
    Theta {
        #[command(flatten)]
        walk: WalkArgs,
    },
    /// Cluster size probabilities pi_1..pi_kmax.
    Cluster {
        #[command(flatten)]
        walk: WalkArgs,
        #[arg(long, default_value_t = 20)]
        kmax: usize,
    },
    /// Asymptotic variance of the Hill estimator.
    HillAvar {
        #[command(flatten)]
        walk: WalkArgs,
        /// Largest admissible bound on the truncated tail of the series.
        #[arg(long, default_value_t = heavytail::extremal::DEFAULT_HORIZON_TOL)]
        tol: f64,
    },
    /// Joint exceedance limit for thresholds x_0,...,x_{k-1}.
    Joint {
        #[command(flatten)]
        walk: WalkArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<f64>,
        #[arg(long, value_enum, default_value_t = ModeArg::All)]
        mode: ModeArg,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestArg {
    /// Turning point test.
    Tp,
    /// Difference-sign test.
    Ds,
    /// Ljung-Box portmanteau test.
    Lb,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "tp,ds,lb")]
    pub tests: Vec<TestArg>,
    /// Portmanteau lag.
    #[arg(long, default_value_t = heavytail::diagnostics::DEFAULT_LB_LAG)]
    pub h: usize,
    /// Test the residuals of a fitted AR(1) instead of the series itself.
    #[arg(long)]
    pub ar1_residuals: bool,
    /// Extreme value index of the innovations, if known; gamma >= 1/2 means
    /// infinite variance and triggers a warning for the portmanteau test.
    #[arg(long)]
    pub innovation_gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Table1,
    Table2,
    Figure1,
    Figure3,
    Figure4,
    #[value(name = "figure2-scatter")]
    Figure2Scatter,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    /// Ground truth from 50 series of length 10^6.
    Desk,
    /// Ground truth from 200 series of length 9 * 10^6.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum InnovationLabel {
    /// Unshifted two-sided Pareto, gamma = 0.5.
    A,
    /// Shifted two-sided Pareto, gamma = 0.3.
    B,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub preset: Preset,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Monte Carlo replicates (default 500, or 2000 for `power`).
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Scale::Desk)]
    pub scale: Scale,
    /// Innovation laws to run (default: a,b; only b for figure4, figure2-scatter and power).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub models: Option<Vec<InnovationLabel>>,
    /// Series length.
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Exceedance probability of the target quantile.
    #[arg(long, default_value_t = 0.001)]
    pub t: f64,
    #[arg(long, default_value_t = 10)]
    pub k_min: usize,
    #[arg(long, default_value_t = 1000)]
    pub k_max: usize,
    #[arg(long, default_value_t = 5)]
    pub k_step: usize,
    /// Known true quantile; skips the ground-truth simulation (single model only).
    #[arg(long)]
    pub true_value: Option<f64>,
    /// Override the number of ground-truth series.
    #[arg(long)]
    pub truth_reps: Option<usize>,
    /// Override the length of each ground-truth series.
    #[arg(long)]
    pub truth_length: Option<usize>,
    /// Use absolute values in both estimators.
    #[arg(long)]
    pub abs: bool,
    /// k of the direct estimator for figure4 (default: its RMSE-optimal k).
    #[arg(long)]
    pub k_direct: Option<usize>,
    /// k of the model-based estimator for figure4 (default: its RMSE-optimal k).
    #[arg(long)]
    pub k_model: Option<usize>,
}
