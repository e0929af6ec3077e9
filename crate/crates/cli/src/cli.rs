use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "coqex", version, about = "Answer count questions over retrieved passages")]
pub struct Cli {
    #[command(flatten)]
    pub settings: SettingsArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Engine settings. Each one can also be set in the config file under the
/// same name with `-` replaced by `_`.
#[derive(Debug, Clone, Default, Args)]
pub struct SettingsArgs {
    /// TOML config file
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Consolidation strategy: most_confident, most_frequent, median, weighted_median
    #[arg(long, global = true)]
    pub strategy: Option<String>,
    /// Relative band around the prediction for representative and synonym CNPs
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Minimum modifier-phrase similarity for a CNP to be comparable
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub similarity_threshold: Option<f64>,
    /// Instance ranking: no_consolidation, context_frequency, summed_confidence, type_compatibility
    #[arg(long, global = true)]
    pub explanation_strategy: Option<String>,
    /// Number of ranked instances to return
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// offline or remote
    #[arg(long, global = true)]
    pub provider: Option<String>,
    /// Inference service base URL (remote provider)
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    #[arg(long, global = true)]
    pub timeout_ms: Option<u64>,
    /// Concurrent requests to the inference service
    #[arg(long, global = true)]
    pub max_in_flight: Option<usize>,
    /// Fall back to offline providers when the service fails
    #[arg(long, global = true)]
    pub allow_degrade: bool,
    /// Directory for cached service responses
    #[arg(long, global = true, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    /// JSON table of phrase-pair similarities consulted before the similarity provider
    #[arg(long, global = true, value_name = "FILE")]
    pub similarity_table: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Query text; may be omitted when the passages file carries one
    #[arg(long)]
    pub query: Option<String>,
    /// JSON passages file: an array of passages or {"query", "passages"}
    #[arg(long, value_name = "FILE", conflicts_with = "dataset")]
    pub passages: Option<PathBuf>,
    /// coquad.v1 dataset; one JSON line of output per record
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Table,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Consolidated count with evidence
    Answer(InputArgs),
    /// Count plus CNP categorization
    Contextualize(InputArgs),
    /// Ranked instances
    Explain(InputArgs),
    /// All stages
    Pipeline(InputArgs),
    /// Run the pipeline over a dataset and report metrics
    Evaluate {
        #[arg(long, value_name = "FILE")]
        dataset: PathBuf,
        /// Cutoffs for instance metrics
        #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
        ks: Vec<usize>,
        #[arg(long, value_enum, default_value = "json")]
        format: ReportFormat,
    },
    /// Label every count in a dataset's passages against the gold count
    Label {
        #[arg(long, value_name = "FILE")]
        dataset: PathBuf,
    },
    /// Drop queries whose gold count is a measurement
    Filter {
        #[arg(long, value_name = "FILE")]
        dataset: PathBuf,
        /// Unit stoplist, one unit per line
        #[arg(long, value_name = "FILE")]
        units: Option<PathBuf>,
    },
    /// HTTP service
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Dataset whose passages are used when a request carries none
        #[arg(long, value_name = "FILE")]
        dataset: Option<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Answer(_) => "answer",
            Command::Contextualize(_) => "contextualize",
            Command::Explain(_) => "explain",
            Command::Pipeline(_) => "pipeline",
            Command::Evaluate { .. } => "evaluate",
            Command::Label { .. } => "label",
            Command::Filter { .. } => "filter",
            Command::Serve { .. } => "serve",
        }
    }
}
