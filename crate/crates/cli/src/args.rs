use std::path::PathBuf;

use argus_core::agreement::Center;
use argus_core::corpus::Feature;
use argus_core::scoring::LabelMode;
use argus_llmprobe::ProbeMode;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::plot::PlotKind;

#[derive(Debug, Parser)]
#[command(
    name = "argus",
    version,
    about = "Narrativity scoring and persuasion analysis",
    disable_help_subcommand = true
)]
pub struct Cli {
    /// Seed for every random choice
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// JSON file whose keys mirror the flags; flags given on the command line win
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, default_value = "argus-out")]
    pub out_dir: PathBuf,

    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate annotation and discussion files and write their normalized forms
    Ingest(IngestArgs),
    /// Inter-annotator agreement for one feature
    Agreement(AgreementArgs),
    /// Stratified item split
    Split(SplitArgs),
    /// Train one classifier with fixed hyperparameters
    Train(TrainArgs),
    /// Nested cross-validation, then retrain and calibrate the selected model
    Cv(CvArgs),
    /// Refit a model's temperature on held-out annotations
    Calibrate(CalibrateArgs),
    /// Compare predicted distributions with annotations
    Evaluate(EvaluateArgs),
    /// Apply classifiers to comments or annotated items
    Score(ScoreArgs),
    /// Fit the regression presets
    Analyze(AnalyzeArgs),
    /// Ask a chat-completion endpoint to label items
    LlmProbe(LlmProbeArgs),
    /// Plot-ready CSV tables
    PlotData(PlotArgs),
    /// Run the whole pipeline on generated data
    Demo(DemoArgs),
}

fn feature(s: &str) -> Result<Feature, String> {
    s.parse().map_err(|e: argus_core::ArgusError| e.to_string())
}

fn probe_mode(s: &str) -> Result<ProbeMode, String> {
    s.parse()
        .map_err(|e: argus_llmprobe::ProbeError| e.to_string())
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CenterArg {
    Mean,
    Median,
}

impl From<CenterArg> for Center {
    fn from(c: CenterArg) -> Self {
        match c {
            CenterArg::Mean => Center::Mean,
            CenterArg::Median => Center::Median,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Soft,
    Hard,
}

impl From<ModeArg> for LabelMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Soft => LabelMode::Soft,
            ModeArg::Hard => LabelMode::Hard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum FeatureSet {
    #[value(name = "word+char")]
    #[serde(rename = "word+char")]
    WordChar,
    #[serde(rename = "word")]
    Word,
    #[serde(rename = "char")]
    Char,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GridArg {
    /// Three n-gram sets times six hyperparameter settings
    Default,
    /// Two n-gram sets times two settings, shorter training
    Small,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IngestArgs {
    #[arg(long)]
    #[serde(skip)]
    pub annotations: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub comments: Option<PathBuf>,
    /// Keep threads opened by moderators or system accounts (their own posts are still dropped)
    #[arg(long)]
    pub keep_excluded_threads: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AgreementArgs {
    #[arg(long)]
    #[serde(skip)]
    pub annotations: Option<PathBuf>,
    #[arg(long, value_parser = feature)]
    pub feature: Feature,
    /// Center for ADI; both are reported when omitted
    #[arg(long, value_enum)]
    pub center: Option<CenterArg>,
    #[arg(long, default_value_t = 2)]
    pub clusters: usize,
    /// Report file under the output directory
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    #[serde(skip)]
    pub annotations: Option<PathBuf>,
    /// Feature whose binarized mean rating is stratified on
    #[arg(long, value_parser = feature, default_value = "story")]
    pub feature: Feature,
    #[arg(long, default_value_t = 0.8)]
    pub fraction: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    #[serde(skip)]
    pub annotations: Option<PathBuf>,
    #[arg(long, value_parser = feature)]
    pub feature: Feature,
    #[arg(long, value_enum, default_value = "soft")]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "word+char")]
    pub features: FeatureSet,
    #[arg(long, default_value_t = 1e-3)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CvArgs {
    #[arg(long)]
    #[serde(skip)]
    pub annotations: Option<PathBuf>,
    #[arg(long, value_parser = feature)]
    pub feature: Feature,
    #[arg(long, value_enum, default_value = "soft")]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "default")]
    pub grid: GridArg,
    #[arg(long, default_value_t = 5)]
    pub outer_folds: usize,
    #[arg(long, default_value_t = 3)]
    pub inner_folds: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CalibrateArgs {
    #[arg(long)]
    #[serde(skip)]
    pub model: Option<PathBuf>,
    /// Annotations of the calibration items
    #[arg(long)]
    #[serde(skip)]
    pub calib: Option<PathBuf>,
    /// Name of the recalibrated model file; defaults to the input's name
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    #[serde(skip)]
    pub preds: Option<PathBuf>,
    /// Annotations providing the gold distributions
    #[arg(long)]
    #[serde(skip)]
    pub gold: Option<PathBuf>,
    #[arg(long, default_value = "metrics.json")]
    pub out: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScoreArgs {
    /// Model files, comma separated or repeated
    #[arg(long = "model", value_delimiter = ',', num_args = 1..)]
    #[serde(skip)]
    pub models: Vec<PathBuf>,
    /// Discussion comments to score (needs Story and the five scored features)
    #[arg(long)]
    #[serde(skip)]
    pub comments: Option<PathBuf>,
    /// Annotated items to predict (any subset of features)
    #[arg(long)]
    #[serde(skip)]
    pub annotations: Option<PathBuf>,
    #[arg(long, default_value = "scored.jsonl")]
    pub out: String,
    #[arg(long, default_value = "predictions.jsonl")]
    pub predictions: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    #[arg(long)]
    #[serde(skip)]
    pub scored: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub comments: Option<PathBuf>,
    /// Annotations for T3, T4, M3 and M4; without it they use the scored comments
    #[arg(long)]
    #[serde(skip)]
    pub annotations: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "M1,M5,M7")]
    pub models: Vec<String>,
    /// Directory for the tables, under the output directory
    #[arg(long, default_value = "tables")]
    pub out: String,
    /// Use ln(1 + words) instead of the raw word count
    #[arg(long)]
    pub log_length: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LlmProbeArgs {
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: String,
    #[arg(long, value_parser = feature)]
    pub feature: Feature,
    #[arg(long, value_parser = probe_mode)]
    pub mode: ProbeMode,
    /// JSONL with item_id (or comment_id) and text
    #[arg(long)]
    #[serde(skip)]
    pub items: Option<PathBuf>,
    #[arg(long)]
    pub dry_run: bool,
    #[arg(long, default_value_t = 1.0)]
    pub rate_limit: f64,
    #[arg(long, default_value_t = 5)]
    pub max_retries: u32,
    #[arg(long, default_value_t = 60.0)]
    pub timeout: f64,
    /// Rows of an earlier run in the other mode, for the presence vs binarized-rating kappa
    #[arg(long)]
    #[serde(skip)]
    pub compare: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PlotArgs {
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "presence,strength,score_by_delta"
    )]
    pub kind: Vec<PlotKind>,
    #[arg(long)]
    #[serde(skip)]
    pub scored: Option<PathBuf>,
    /// Needed for score_by_delta
    #[arg(long)]
    #[serde(skip)]
    pub comments: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DemoArgs {
    /// Annotated items to generate
    #[arg(long, default_value_t = 620)]
    pub items: usize,
    /// Discussion comments to generate
    #[arg(long, default_value_t = 200)]
    pub comments: usize,
}
