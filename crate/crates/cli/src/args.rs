use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cbtnlu", version, about = "Classify CBT thinking errors, emotions and situations in short posts")]
pub struct Cli {
    /// Seed for every random choice the command makes. Defaults to the
    /// config file's seed, or 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// JSON training configuration; missing fields take their defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Relative paths are resolved against this directory.
    #[arg(long, global = true, env = "CBTNLU_DATA_DIR", value_name = "DIR")]
    pub data_dir: Option<PathBuf>,

    /// Log progress (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Cnn,
    Gru,
    Lr,
    Svm,
    Chance,
    Majority,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KappaModeArg {
    Pooled,
    PerLabelMean,
}

/// Which labels to train or evaluate. Neither flag means the whole catalog.
#[derive(Debug, Clone, Args)]
pub struct LabelScope {
    /// Label id; repeatable.
    #[arg(long = "label", value_name = "ID", conflicts_with = "category")]
    pub labels: Vec<String>,
    /// thinking_error, emotion or situation.
    #[arg(long)]
    pub category: Option<String>,
}

/// Model inputs besides the corpus.
#[derive(Debug, Clone, Args)]
pub struct FeatureArgs {
    /// Word vectors in text format (cnn; gru without --sentences).
    #[arg(long, value_name = "FILE")]
    pub vectors: Option<PathBuf>,
    /// Precomputed sentence vectors (gru).
    #[arg(long, value_name = "FILE")]
    pub sentences: Option<PathBuf>,
}

/// Overrides for the training configuration.
#[derive(Debug, Clone, Args)]
pub struct TrainOverrides {
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Accept oversampling ratios outside 1:1, 1:3, 1:5 and 1:7.
    #[arg(long)]
    pub any_ratio: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled corpus with planted keywords.
    Synth {
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train word vectors on a corpus.
    Embed {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 100)]
        dim: usize,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 10)]
        window: usize,
        #[arg(long, default_value_t = 1)]
        min_count: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write mean-pooled vectors of every corpus sentence here.
        #[arg(long, value_name = "FILE")]
        sentences: Option<PathBuf>,
    },
    /// Train per-label models on the first fold's training split.
    Train {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[command(flatten)]
        scope: LabelScope,
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        features: FeatureArgs,
        #[arg(long, default_value = "1:1")]
        ratio: String,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[command(flatten)]
        overrides: TrainOverrides,
        /// Bundle directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// k-fold cross-validation over one or more oversampling ratios.
    Cv {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[command(flatten)]
        features: FeatureArgs,
        #[command(flatten)]
        scope: LabelScope,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value = "1:1", value_delimiter = ',')]
        ratios: Vec<String>,
        /// Parallel (fold, label) jobs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Report the closed-form expectation of a chance or majority
        /// predictor under the catalog priors.
        #[arg(long)]
        analytic: bool,
        #[command(flatten)]
        overrides: TrainOverrides,
        /// Report directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score trained bundles against a labelled corpus.
    Eval {
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        models: Vec<PathBuf>,
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        scope: LabelScope,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// CSV report; a text rendering is written beside it.
        #[arg(long)]
        report: PathBuf,
    },
    /// Cohen's kappa between two annotators of a store.
    Kappa {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, value_enum, default_value_t = KappaModeArg::Pooled)]
        mode: KappaModeArg,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label unseen posts with a trained bundle.
    Predict {
        #[arg(long)]
        models: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Run the annotation API.
    Serve {
        #[arg(long)]
        store: PathBuf,
        /// Corpus used to create the store when it does not exist yet.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}
