use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "oppo", version, about = "Corpus construction, agreement, evaluation and analysis for oppositional Telegram messages")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Directory all outputs are written to
    #[arg(long, global = true, default_value = "oppo-out")]
    pub out_dir: PathBuf,

    /// Seed for every randomized step
    #[arg(long, global = true, env = "OPPO_SEED")]
    pub seed: Option<u64>,

    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Indent reports and print a short summary
    #[arg(long, global = true)]
    pub pretty: bool,

    /// TOML run configuration; command-line flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Filter, score and rank candidate messages
    Pipeline(PipelineArgs),
    /// Pseudonymize sensitive entities
    Anon(AnonArgs),
    /// Build the gold standard from annotator files
    Gold(GoldArgs),
    /// Inter-annotator agreement
    Iaa(IaaArgs),
    /// Score predictions against gold
    Eval(EvalArgs),
    /// Lexicon scores and hypothesis tests
    Analyze(AnalyzeArgs),
    /// Check record files against their schema
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
pub struct PipelineArgs {
    #[arg(long)]
    pub messages: Option<PathBuf>,
    /// Channel statistics, one JSON object per line
    #[arg(long)]
    pub channels: Option<PathBuf>,
    #[arg(long)]
    pub min_tokens: Option<usize>,
    #[arg(long)]
    pub max_link_ratio: Option<f64>,
    /// Keep only the k best-scored messages
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Also write a ranked CSV sheet for manual relevance review
    #[arg(long)]
    pub export_review: bool,
}

#[derive(Args, Debug)]
pub struct AnonArgs {
    #[arg(long)]
    pub messages: Option<PathBuf>,
    #[arg(long)]
    pub salt: String,
    /// Extra candidate entities (e.g. reviewed proper nouns), JSON lines
    #[arg(long)]
    pub entities: Option<PathBuf>,
    /// Keep/replace decisions keyed by entity id, JSON lines
    #[arg(long)]
    pub decisions: Option<PathBuf>,
    /// Gold or annotation file whose spans should be remapped
    #[arg(long)]
    pub spans: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GoldArgs {
    /// Class-label annotation files
    #[arg(long, num_args = 1.., required = true)]
    pub labels: Vec<PathBuf>,
    /// Span annotation files from exactly two annotators
    #[arg(long, num_args = 1..)]
    pub spans: Vec<PathBuf>,
    /// Messages providing text and language for gold records
    #[arg(long)]
    pub messages: Option<PathBuf>,
    #[arg(long)]
    pub annotators: Option<usize>,
    /// Expected annotator ids, comma separated
    #[arg(long, value_delimiter = ',')]
    pub annotator_ids: Vec<String>,
    #[arg(long)]
    pub conflict_overlap: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Alpha,
    Observed,
    Gamma,
    PairwiseF1,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMode {
    HumanVsHuman,
    HumanVsGold,
}

#[derive(Args, Debug)]
pub struct IaaArgs {
    #[arg(long, value_enum)]
    pub metric: Metric,
    #[arg(long, num_args = 1.., required = true)]
    pub annotations: Vec<PathBuf>,
    /// Gold file for human-vs-gold pairwise F1
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "human-vs-human")]
    pub mode: PairMode,
    /// Messages used for document lengths in gamma
    #[arg(long)]
    pub messages: Option<PathBuf>,
    #[arg(long)]
    pub resamples: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(subcommand)]
    pub kind: EvalKind,
}

#[derive(Args, Debug)]
pub struct EvalCommon {
    /// Prediction files; several files are treated as folds (binary only)
    #[arg(long, num_args = 1.., required = true)]
    pub pred: Vec<PathBuf>,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Report file name inside the output directory
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Char,
    Token,
}

#[derive(Subcommand, Debug)]
pub enum EvalKind {
    Binary(EvalCommon),
    Spans {
        #[command(flatten)]
        common: EvalCommon,
        #[arg(long, value_enum, default_value = "char")]
        unit: Unit,
    },
    Categories(EvalCommon),
    ErrorCrosstab {
        #[command(flatten)]
        common: EvalCommon,
        /// Row category (letter or name)
        #[arg(long)]
        row: String,
        /// Column category (letter or name)
        #[arg(long)]
        col: String,
    },
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub anger_lexicon: Option<PathBuf>,
    #[arg(long)]
    pub violence_lexicon: Option<PathBuf>,
    #[arg(long)]
    pub lemma_map: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(long, num_args = 1..)]
    pub messages: Vec<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub annotations: Vec<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub gold: Vec<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub predictions: Vec<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub channels: Vec<PathBuf>,
}
