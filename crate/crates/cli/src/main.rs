//! `armle`: simulate AR(p) data under correlated Gaussian noise, run the
//! whitening filter, estimate, test, and run Monte Carlo experiments.
//!
//! Exit codes: 0 success, 2 usage or configuration, 3 data or format,
//! 4 numerical degeneracy. Set `ARMLE_LOG` (e.g. `warn`, `debug`) to change
//! the verbosity of progress output on stderr.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use armle::{CovarianceKernel, Error, ParamVector};

#[derive(Debug, Parser)]
#[command(name = "armle", version, about = "Exact MLE and LR testing for AR(p) with correlated noise")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate X_1..X_n from rest and write `t,x` CSV.
    Simulate(SimulateArgs),
    /// Inspect the whitening filter.
    #[command(subcommand)]
    Filter(FilterCommand),
    /// Maximum-likelihood estimate of theta.
    Estimate(EstimateArgs),
    /// Likelihood-ratio test of theta = theta0.
    Test(TestArgs),
    /// Local expansion of the log-likelihood at theta0 + u / sqrt(n).
    Lan(LanArgs),
    /// Run a Monte Carlo experiment.
    Experiment(ExperimentArgs),
    /// Run the filter on a kernel and summarise its decay.
    ValidateKernel(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// AR order; must match the length of --theta.
    #[arg(long)]
    pub p: Option<usize>,
    /// Comma-separated coefficients, e.g. `0.5,-0.2`.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: ParamVector,
    /// `white`, `ar1:<a>`, `fgn:<hurst>` or the JSON form.
    #[arg(long)]
    pub kernel: CovarianceKernel,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the noise path as `xi` CSV.
    #[arg(long)]
    pub noise_out: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Subcommand)]
pub enum FilterCommand {
    /// `n,beta,sigma2` for steps 1..=n.
    Dump {
        #[arg(long)]
        kernel: CovarianceKernel,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        output: Output,
    },
    /// The filtered 2p-dimensional process of an observed series.
    Zeta {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV with a column named `x`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub p: usize,
    #[arg(long, default_value = "white")]
    pub kernel: CovarianceKernel,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Level of the reported confidence ellipsoid.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub theta0: ParamVector,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct LanArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub theta0: ParamVector,
    #[arg(long, allow_hyphen_values = true)]
    pub u: ParamVector,
    #[arg(long, default_value = "white")]
    pub kernel: CovarianceKernel,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// JSON config; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// consistency, clt, qsl, lil, lan_remainder, test_size or test_power.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<ParamVector>,
    #[arg(long)]
    pub kernel: Option<CovarianceKernel>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Local shift for lan_remainder and test_power.
    #[arg(long, allow_hyphen_values = true)]
    pub u: Option<ParamVector>,
    /// Direction for lil.
    #[arg(long, allow_hyphen_values = true)]
    pub direction: Option<ParamVector>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Directory for report.json, raw.csv and curves.csv; the report is
    /// printed to stdout when omitted.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub kernel: CovarianceKernel,
    #[arg(long, default_value_t = 1000)]
    pub horizon: usize,
    #[command(flatten)]
    pub output: Output,
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Format(_) | Error::TooShort { .. } => 3,
        e if e.is_numeric() => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("ARMLE_LOG", "info"))
        .format_timestamp(None)
        .format_target(false)
        .init();
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
