use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fwelnet::{Aggregate, Family, Metric};

#[derive(Debug, Parser)]
#[command(name = "fwelnet", version, about = "Feature-weighted elastic net")]
pub struct Cli {
    /// Worker threads for folds and simulation runs (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// More log output on stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a path and write a model file.
    Fit(FitArgs),
    /// Cross-validate, writing the model, the CV curve and a summary.
    Cv(CvArgs),
    /// Predict from a model file.
    Predict(PredictArgs),
    /// Run a simulation battery.
    Simulate(SimulateArgs),
    /// Two-response multi-task fit.
    Multitask(MultitaskArgs),
    /// Print feature scores and penalty factors for a given theta.
    Weights(WeightsArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Binomial,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Gaussian => Family::Gaussian,
            FamilyArg::Binomial => Family::Binomial,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AggregateArg {
    Mean,
    Median,
}

impl From<AggregateArg> for Aggregate {
    fn from(a: AggregateArg) -> Self {
        match a {
            AggregateArg::Mean => Aggregate::Mean,
            AggregateArg::Median => Aggregate::Median,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Mse,
    Deviance,
    Auc,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Mse => Metric::Mse,
            MetricArg::Deviance => Metric::Deviance,
            MetricArg::Auc => Metric::Auc,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Rule {
    Min,
    #[value(name = "1se")]
    OneSe,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PredictType {
    /// Linear predictor.
    Link,
    /// Fitted mean (probability for binomial models).
    Response,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Design matrix, one row per observation.
    #[arg(long)]
    pub x: PathBuf,
    /// Response, one value per row.
    #[arg(long)]
    pub y: PathBuf,
    /// Feature information, one row per feature; omit for a plain elastic net.
    #[arg(long)]
    pub z: Option<PathBuf>,
    /// Input CSV files start with a header row.
    #[arg(long)]
    pub header: bool,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub family: FamilyArg,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Theta updates (ignored without --z).
    #[arg(long, default_value_t = 1)]
    pub niter: usize,
    #[arg(long, value_enum, default_value = "mean")]
    pub aggregate: AggregateArg,
    #[arg(long, default_value_t = 100)]
    pub nlambda: usize,
    /// Smallest lambda as a fraction of the largest (default 0.01 if n < p, else 1e-4).
    #[arg(long)]
    pub lambda_min_ratio: Option<f64>,
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Model file (JSON); stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 10)]
    pub nfolds: usize,
    /// One group id per observation; rows sharing an id stay in one fold.
    #[arg(long)]
    pub fold_groups: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "mse")]
    pub metric: MetricArg,
    /// Output directory (model.json, cv.csv, cv_summary.json).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub header: bool,
    /// Lambda value on the model's path.
    #[arg(long, conflicts_with_all = ["lambda_index", "rule"])]
    pub lambda: Option<f64>,
    /// Zero-based index into the model's path.
    #[arg(long, conflicts_with = "rule")]
    pub lambda_index: Option<usize>,
    /// CV rule for models written by `cv` (default min).
    #[arg(long, value_enum)]
    pub rule: Option<Rule>,
    #[arg(long = "type", value_enum, default_value = "link")]
    pub kind: PredictType,
    /// Output CSV; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// One of 1, 2a, 2b, 3, fig1, mt.
    #[arg(long)]
    pub setting: String,
    #[arg(long)]
    pub snr_y: Option<f64>,
    #[arg(long)]
    pub snr_z: Option<f64>,
    #[arg(long, default_value_t = 30)]
    pub runs: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub niter: Option<usize>,
    #[arg(long, value_enum)]
    pub aggregate: Option<AggregateArg>,
    #[arg(long)]
    pub nfolds: Option<usize>,
    #[arg(long)]
    pub nlambda: Option<usize>,
    #[arg(long)]
    pub lambda_min_ratio: Option<f64>,
    /// Outer iterations for the multi-task setting.
    #[arg(long)]
    pub outer: Option<usize>,
    /// Output directory (runs.csv, summary.json, weights.csv).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MultitaskArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y1: PathBuf,
    #[arg(long)]
    pub y2: PathBuf,
    #[arg(long)]
    pub header: bool,
    #[arg(long, default_value_t = 3)]
    pub outer: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1)]
    pub niter: usize,
    #[arg(long, value_enum, default_value = "mean")]
    pub aggregate: AggregateArg,
    #[arg(long, default_value_t = 100)]
    pub nlambda: usize,
    #[arg(long)]
    pub lambda_min_ratio: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub nfolds: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Result file (JSON); stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    #[arg(long)]
    pub z: PathBuf,
    /// JSON array of theta values, or a model file with a `theta` field.
    #[arg(long)]
    pub theta: PathBuf,
    #[arg(long)]
    pub header: bool,
    /// Output CSV; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
