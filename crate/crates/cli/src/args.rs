use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use negbound::probkit::DrawsConvention;

#[derive(Debug, Parser)]
#[command(name = "negbound", version, about = "Coupon-collector probabilities, toy contrastive training and InfoNCE bound evaluation")]
pub struct Cli {
    /// Worker threads (defaults to the number of available cores).
    #[arg(long, global = true, env = "NEGBOUND_THREADS")]
    pub threads: Option<usize>,

    /// Also write a run manifest to this path.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Probability that a number of draws hits every class.
    Coupon(CouponArgs),
    /// Probability that at least one of K negatives shares the anchor's class.
    Tau(TauArgs),
    /// Expected number of draws until every class has appeared.
    ExpectedDraws(ExpectedDrawsArgs),
    /// Train a small contrastive encoder on synthetic latent-class data.
    Train(TrainArgs),
    /// Evaluate both lower bounds and the supervised upper bounds on embeddings.
    Evaluate(EvaluateArgs),
    /// Cosine and norm histograms and their Wasserstein curves.
    Analyze(AnalyzeArgs),
    /// Draw a bound table as an SVG bar chart.
    Plot(PlotArgs),
    /// Check that uniform constant class scores minimise the sub-class loss.
    CheckScores(CheckScoresArgs),
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct ClassSource {
    /// Number of equally likely classes.
    #[arg(long)]
    pub classes: Option<usize>,
    /// File of non-negative class weights separated by whitespace or commas;
    /// they are normalised to sum to one.
    #[arg(long)]
    pub probs: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CoverMethodArg {
    Auto,
    Dp,
    Ie,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimpleMethodArg {
    Auto,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    #[value(name = "k-plus-1")]
    KPlusOne,
    K,
}

impl From<ConventionArg> for DrawsConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::KPlusOne => DrawsConvention::KPlusOne,
            ConventionArg::K => DrawsConvention::K,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    /// Simulation trials.
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CouponArgs {
    #[command(flatten)]
    pub source: ClassSource,
    /// Number of draws.
    #[arg(long)]
    pub draws: u64,
    #[arg(long, value_enum, default_value_t = CoverMethodArg::Auto)]
    pub method: CoverMethodArg,
    #[command(flatten)]
    pub mc: McArgs,
}

#[derive(Debug, Args)]
pub struct TauArgs {
    #[command(flatten)]
    pub source: ClassSource,
    /// Number of negatives K.
    #[arg(long)]
    pub k: u64,
    #[arg(long, value_enum, default_value_t = SimpleMethodArg::Auto)]
    pub method: SimpleMethodArg,
    #[command(flatten)]
    pub mc: McArgs,
}

#[derive(Debug, Args)]
pub struct ExpectedDrawsArgs {
    #[command(flatten)]
    pub source: ClassSource,
    #[arg(long, value_enum, default_value_t = SimpleMethodArg::Auto)]
    pub method: SimpleMethodArg,
    #[command(flatten)]
    pub mc: McArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Tsv,
    Packed,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON training configuration; missing keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    pub print_config: bool,
    /// Output directory.
    #[arg(long, default_value = "negbound-train")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Tsv)]
    pub format: FormatArg,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Negatives per tuple.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub samples_per_class: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Embeddings the bounds are evaluated on.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Embeddings supplying the class means and the probe's training data.
    #[arg(long)]
    pub train_embeddings: Option<PathBuf>,
    /// Comma-separated numbers of negatives K, each at least 1.
    #[arg(long, value_delimiter = ',', required_unless_present = "print_config")]
    pub k: Vec<usize>,
    /// JSON evaluation settings; missing keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub print_config: bool,
    /// Temperature.
    #[arg(long)]
    pub t: Option<f64>,
    /// Augmentations averaged per sample for the means.
    #[arg(long)]
    pub m_aug: Option<usize>,
    /// Tuples per K (default: whole tuples per pass times the epoch count).
    #[arg(long)]
    pub batches: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub draws_convention: Option<ConventionArg>,
    /// Gaussian noise of the embedding-space augmentation.
    #[arg(long)]
    pub aug_sigma: Option<f64>,
    /// Coordinate dropout rate of the embedding-space augmentation.
    #[arg(long)]
    pub aug_drop: Option<f64>,
    /// Input file format (default: from the extension).
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Output directory for bounds.csv, bounds.json and the manifest; the
    /// CSV goes to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Normalised embedding sets, ordered by K, for cosine histograms.
    #[arg(long, value_delimiter = ',')]
    pub embeddings: Vec<PathBuf>,
    /// Unnormalised sets, ordered by K, for norm histograms.
    #[arg(long, value_delimiter = ',')]
    pub raw: Vec<PathBuf>,
    /// Classes to histogram (default: the first ten).
    #[arg(long, value_delimiter = ',')]
    pub classes: Vec<usize>,
    /// Bins for cosine histograms (default: square root of the pair count).
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long, default_value = "negbound-analysis")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Bound table written by `evaluate`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "Supervised-loss upper bounds")]
    pub title: String,
}

#[derive(Debug, Args)]
pub struct CheckScoresArgs {
    #[arg(long)]
    pub classes: usize,
    /// Negatives per tuple.
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
