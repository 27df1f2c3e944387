mod commands;
mod dataset;
mod failure;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dataset::CsvFlags;

/// Fairness-accuracy certificates and Wasserstein-regularized fair regression.
///
/// Outputs go to $FAIRREG_OUT/<command>/<name> (default root ./fairreg-out).
/// Datasets are CSV paths or generator specs such as
/// gen:example2:n=100000,d=10,seed=0, gen:example1:n=1000 or
/// gen:lawschool:n=1823,shift=0.15.
#[derive(Parser, Debug, Serialize)]
#[command(name = "fairreg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// W_p, CDF-form W_1 and KS distance between two samples.
    Metrics(MetricsArgs),
    /// Every certificate for a dataset's group target distributions.
    Bounds(BoundsArgs),
    /// Train a baseline or adversarial model over one or more seeds.
    Train(TrainArgs),
    /// Baseline plus a tau sweep, reported as a mean±std panel.
    Sweep(SweepArgs),
    /// Run the property suites.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Serialize)]
struct MetricsArgs {
    /// Two sample files, one number per line.
    #[arg(num_args = 0..=2)]
    samples: Vec<PathBuf>,
    /// Dataset whose two groups are compared instead of sample files.
    #[arg(long, conflicts_with = "samples")]
    data: Option<String>,
    /// Column compared with --data: `y` (target, original units) or `f<k>`.
    #[arg(long, default_value = "y")]
    column: String,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[command(flatten)]
    csv: CsvFlags,
    /// Run directory name.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct CertFlags {
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    /// Density bound C on predictor outputs; estimated (heuristically) when absent.
    #[arg(long)]
    density_bound: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct BoundsArgs {
    data: String,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Overrides the empirical Pr(A = 0).
    #[arg(long)]
    alpha: Option<f64>,
    #[command(flatten)]
    cert: CertFlags,
    #[command(flatten)]
    csv: CsvFlags,
    #[arg(long)]
    name: Option<String>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Baseline,
    Adversarial,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Loss {
    Pooled,
    Balanced,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
enum OptimizerChoice {
    Adadelta,
    Sgd,
}

#[derive(Args, Debug, Serialize)]
struct TrainFlags {
    #[arg(long, default_value_t = 1.0)]
    lr: f64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    /// Parameter box for predictor and critic; defaults to tau.
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long, default_value_t = 1)]
    adversary_steps: usize,
    /// Loss order.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Training loss; pooled for baselines and balanced for adversarial runs by default.
    #[arg(long, value_enum)]
    loss: Option<Loss>,
    #[arg(long, value_enum, default_value_t = OptimizerChoice::Adadelta)]
    optimizer: OptimizerChoice,
    #[arg(long, value_delimiter = ',', default_value = "50,20")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    adversary_hidden: usize,
    #[arg(long, value_delimiter = ',', conflicts_with = "seed")]
    seeds: Vec<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fraction of rows used for training; metrics are measured on the rest.
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    /// Train and evaluate on the full dataset.
    #[arg(long)]
    no_split: bool,
}

#[derive(Args, Debug, Serialize)]
struct TrainArgs {
    data: String,
    #[arg(long, value_enum, default_value_t = Mode::Adversarial)]
    mode: Mode,
    /// Weight of the critic gap (adversarial mode).
    #[arg(long)]
    tau: Option<f64>,
    #[command(flatten)]
    train: TrainFlags,
    #[command(flatten)]
    cert: CertFlags,
    #[command(flatten)]
    csv: CsvFlags,
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    data: String,
    #[arg(long, value_delimiter = ',', required = true)]
    taus: Vec<f64>,
    #[command(flatten)]
    train: TrainFlags,
    #[command(flatten)]
    cert: CertFlags,
    #[command(flatten)]
    csv: CsvFlags,
    #[arg(long)]
    name: Option<String>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
enum SuiteArg {
    Metrics,
    Bounds,
    Nn,
    All,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = SuiteArg::All)]
    suite: SuiteArg,
    /// Time budget in seconds; properties not started in time count as failures.
    #[arg(long, default_value_t = 300.0)]
    budget: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    name: Option<String>,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::run(&cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("fairreg: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
