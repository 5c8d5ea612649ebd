use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use swimnet::ActivationKind;

mod commands;

/// Fit, apply and benchmark networks whose hidden weights are sampled from
/// pairs of training points.
#[derive(Parser, Debug)]
#[command(name = "swimnet", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a network to a CSV file and save it.
    Fit(FitArgs),
    /// Apply a saved network to a CSV file of features.
    Predict(PredictArgs),
    /// Relative L2 error of sampled and random-feature networks on a Barron function.
    BenchBarron(BarronArgs),
    /// Stratified k-fold accuracy of sampled networks on a labelled CSV file.
    BenchClassify(ClassifyArgs),
    /// Fit time against training-set size at a fixed architecture.
    BenchTiming(TimingArgs),
    /// Describe a saved network.
    Inspect(InspectArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Activation {
    Relu,
    Tanh,
    Sine,
}

impl From<Activation> for ActivationKind {
    fn from(a: Activation) -> Self {
        match a {
            Activation::Relu => ActivationKind::Relu,
            Activation::Tanh => ActivationKind::Tanh,
            Activation::Sine => ActivationKind::Sine,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    L2,
    Linf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Task {
    /// Numeric targets, one output per target column.
    Regression,
    /// One categorical target, one-hot encoded.
    Classification,
}

/// Comma-separated list of positive integers.
fn positive_list(s: &str) -> Result<Vec<usize>, String> {
    let items: Vec<&str> = s.split(',').map(str::trim).collect();
    if items.iter().all(|t| t.is_empty()) {
        return Err("expected a comma-separated list of positive integers".into());
    }
    items
        .iter()
        .map(|t| match t.parse::<usize>() {
            Ok(0) => Err(format!("{t:?} is not positive; every entry must be at least 1")),
            Ok(n) => Ok(n),
            Err(_) => Err(format!("{t:?} is not a positive integer")),
        })
        .collect()
}

fn seed_list(s: &str) -> Result<Vec<u64>, String> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| format!("{t:?} is not a seed (nonnegative integer)"))
        })
        .collect()
}

fn positive_float(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("{s:?} is not a positive number")),
    }
}

fn nonneg_float(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("{s:?} is not a nonnegative number")),
    }
}

fn positive_int(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("{s:?} is not a positive integer")),
    }
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Parsed comma-separated list; an alias so clap takes it as one value.
pub type List = Vec<usize>;
pub type Seeds = Vec<u64>;

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// CSV file with a header row (required).
    #[arg(long)]
    pub data: PathBuf,
    /// Treat the first row as data; columns are then named c0, c1, ... (default: off).
    #[arg(long)]
    pub no_header: bool,
    /// Replace empty feature cells with the column median (default: off, empty cells are errors).
    #[arg(long)]
    pub impute_median: bool,
}

#[derive(Args, Debug, Clone)]
pub struct SeedArg {
    /// Random seed; falls back to SWIMNET_SEED.
    #[arg(long, env = "SWIMNET_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Target column names or indices, comma separated; "last" is the last column.
    #[arg(long, default_value = "last")]
    pub target_col: String,
    #[arg(long, value_enum, default_value_t = Task::Regression)]
    pub task: Task,
    /// Hidden layer widths, comma separated.
    #[arg(long, default_value = "500", value_parser = positive_list)]
    pub layers: List,
    #[arg(long, value_enum, default_value_t = Activation::Tanh)]
    pub activation: Activation,
    /// Distance floor in the pair density for layers after the first.
    #[arg(long, default_value = "1e-6", value_parser = positive_float)]
    pub epsilon: f64,
    /// Candidate pool multiplier.
    #[arg(long, default_value = "1", value_parser = positive_int)]
    pub pool_mult: usize,
    /// Ridge penalty of the output solve.
    #[arg(long, default_value = "1e-10", value_parser = nonneg_float)]
    pub ridge: f64,
    /// Norm of target differences in the pair density.
    #[arg(long, value_enum, default_value_t = NormArg::Linf)]
    pub y_norm: NormArg,
    /// Norm of input differences in the pair density.
    #[arg(long, value_enum, default_value_t = NormArg::L2)]
    pub x_norm: NormArg,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Model file to write.
    #[arg(long, default_value = "model.swim")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Model file written by `fit` (required).
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
    /// Output CSV; "-" writes to standard output.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BarronArgs {
    /// Input dimension.
    #[arg(long, default_value = "5", value_parser = positive_int)]
    pub dim: usize,
    /// Hidden layer widths, comma separated.
    #[arg(long, default_value = "64,256,1024", value_parser = positive_list)]
    pub widths: List,
    /// Network depths, comma separated.
    #[arg(long, default_value = "1", value_parser = positive_list)]
    pub depths: List,
    /// Seeds, comma separated; each seed draws its own data.
    #[arg(long, default_value = "0,1,2", value_parser = seed_list)]
    pub seeds: Seeds,
    /// Training points per seed.
    #[arg(long, default_value = "10000", value_parser = positive_int)]
    pub points: usize,
    /// Test points per seed; defaults to --points.
    #[arg(long, value_parser = positive_int)]
    pub test_points: Option<usize>,
    /// Activation of the sampled networks (random features always use sine).
    #[arg(long, value_enum, default_value_t = Activation::Sine)]
    pub activation: Activation,
    #[arg(long, default_value = "1e-10", value_parser = nonneg_float)]
    pub ridge: f64,
    /// Worker threads.
    #[arg(long, default_value_t = default_jobs(), value_parser = positive_int)]
    pub jobs: usize,
    /// Results CSV to write.
    #[arg(long, default_value = "results.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Label column name or index; "last" is the last column.
    #[arg(long, default_value = "last")]
    pub target_col: String,
    #[arg(long, default_value = "10", value_parser = positive_int)]
    pub folds: usize,
    /// Network depths, comma separated.
    #[arg(long, default_value = "1,2,3,4,5", value_parser = positive_list)]
    pub depths: List,
    /// Width of every hidden layer.
    #[arg(long, default_value = "500", value_parser = positive_int)]
    pub width: usize,
    #[arg(long, value_enum, default_value_t = Activation::Tanh)]
    pub activation: Activation,
    #[arg(long, default_value = "1e-10", value_parser = nonneg_float)]
    pub ridge: f64,
    /// Rows kept after a seeded shuffle; 0 keeps all.
    #[arg(long, default_value = "5000")]
    pub max_rows: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Worker threads.
    #[arg(long, default_value_t = default_jobs(), value_parser = positive_int)]
    pub jobs: usize,
    /// Results CSV to write.
    #[arg(long, default_value = "results.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TimingArgs {
    /// Hidden layer widths, comma separated.
    #[arg(long, default_value = "500", value_parser = positive_list)]
    pub layers: List,
    /// Training-set sizes, comma separated (at least three).
    #[arg(long, default_value = "5000,10000,20000,40000", value_parser = positive_list)]
    pub sizes: List,
    /// Timed fits per size; the median is reported.
    #[arg(long, default_value = "3", value_parser = positive_int)]
    pub repeats: usize,
    /// Input dimension of the generated data.
    #[arg(long, default_value = "5", value_parser = positive_int)]
    pub dim: usize,
    #[arg(long, value_enum, default_value_t = Activation::Tanh)]
    pub activation: Activation,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Results CSV to write.
    #[arg(long, default_value = "timing.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    /// Model file written by `fit` (required).
    #[arg(long)]
    pub model: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.one_line());
            ExitCode::FAILURE
        }
    }
}
