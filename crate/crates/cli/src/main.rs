//! `ethnoname`: prepare data, train, distill, predict and benchmark from
//! the command line.
//!
//! Exit codes: 0 on success, 1 on data or runtime failure, 2 on usage
//! errors.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use ethnoname_core::Mode;

#[derive(Debug, Parser)]
#[command(name = "ethnoname", version, about = "Ethnicity prediction from personal names")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean, balance, split and encode a labelled name list.
    Prep(PrepArgs),
    /// Train a model on a prepared dataset.
    Train(TrainArgs),
    /// Distill a trained teacher into a smaller student.
    Distill(DistillArgs),
    /// Predict ethnicity for the names in a CSV file.
    Predict(PredictArgs),
    /// Time batch prediction at several thread counts.
    Bench(BenchArgs),
    /// Compare backprop against finite differences on a small model.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Lastname,
    Fullname,
}

impl From<Method> for Mode {
    fn from(m: Method) -> Self {
        match m {
            Method::Lastname => Mode::LastName,
            Method::Fullname => Mode::FullName,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    Teacher,
    Student,
    Toy,
}

#[derive(Debug, Args)]
struct PrepArgs {
    /// CSV with header `first,last,race,gender`.
    #[arg(long, conflicts_with = "toy", required_unless_present = "toy")]
    input: Option<PathBuf>,
    /// Use the built-in synthetic corpus instead of --input.
    #[arg(long)]
    toy: bool,
    /// Directory receiving train.csv, test.csv and manifest.json.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "lastname")]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = ethnoname_core::dataprep::DEFAULT_TEST_FRACTION)]
    test_fraction: f64,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Directory written by `prep`.
    #[arg(long)]
    data: PathBuf,
    /// Output model file. The loss history and evaluation report are
    /// written next to it as `<stem>.history.csv` and `<stem>.eval.json`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to 30 for the toy preset and 10 otherwise.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Defaults to 0.01 for the toy preset and 0.001 otherwise.
    #[arg(long)]
    lr: Option<f64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    fit: FitArgs,
    /// `toy` selects the small teacher architecture.
    #[arg(long, value_enum, default_value = "teacher")]
    preset: Preset,
}

#[derive(Debug, Args)]
struct DistillArgs {
    #[command(flatten)]
    fit: FitArgs,
    /// Trained teacher model file.
    #[arg(long)]
    teacher: PathBuf,
    /// `toy` selects the small student architecture.
    #[arg(long, value_enum, default_value = "student")]
    preset: Preset,
    #[arg(long, default_value_t = 2.0)]
    temperature: f64,
    /// Weight of the hard-label loss.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Defaults to standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Defaults to the model's input mode.
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// First-name column; required with `--method fullname`.
    #[arg(long)]
    first_col: Option<String>,
    #[arg(long)]
    last_col: String,
    /// Drop rows with a missing name instead of failing.
    #[arg(long)]
    na_rm: bool,
    #[arg(long, default_value_t = 1, value_parser = positive())]
    threads: u64,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Model to time. Defaults to a randomly initialized student.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Comma-separated thread counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4", value_parser = positive())]
    threads: Vec<u64>,
    #[arg(long, default_value_t = 100_000, value_parser = positive())]
    n: u64,
    #[arg(long, default_value_t = ethnoname_core::inference::DEFAULT_REPEATS as u64, value_parser = positive())]
    repeats: u64,
    /// Timing CSV; defaults to standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    /// Architecture to check; `toy` is the small student.
    #[arg(long, value_enum, default_value = "toy")]
    preset: Preset,
    /// Check this model file instead of a fresh preset.
    #[arg(long, conflicts_with = "preset")]
    model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "lastname")]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    /// Number of toy names in the checked batch.
    #[arg(long, default_value_t = 4, value_parser = positive())]
    batch: u64,
}

fn positive() -> clap::builder::RangedU64ValueParser {
    clap::value_parser!(u64).range(1..)
}

fn usage_error(message: &str) -> ! {
    Cli::command()
        .error(clap::error::ErrorKind::MissingRequiredArgument, message)
        .exit()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Predict(args) = &cli.command {
        if args.method == Some(Method::Fullname) && args.first_col.is_none() {
            usage_error("--method fullname requires --first-col");
        }
    }
    let result = match cli.command {
        Command::Prep(a) => commands::prep(a),
        Command::Train(a) => commands::train(a),
        Command::Distill(a) => commands::distill(a),
        Command::Predict(a) => commands::predict(a),
        Command::Bench(a) => commands::bench(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
