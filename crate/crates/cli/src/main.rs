//! `tagnoise`: label-noise audits, feature extraction, training, evaluation
//! and synthetic noise experiments from one binary.
//!
//! Exit status is 0 on success, 1 when the operation itself fails, and 2 for
//! command-line usage errors.

mod annotate;
mod commands;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use table::Format;

#[derive(Debug, Parser)]
#[command(name = "tagnoise", version, about = "Label-noise analysis toolkit for multi-label music tags")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Seed for every random draw; generated and printed when omitted.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads. 1 gives bit-identical output; more only changes speed
    /// for the data-parallel stages, whose reductions are ordered.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value = "warn", value_parser = ["error", "warn", "info", "debug", "trace"])]
    pub log_level: String,
    /// Delimiter for tabular output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Build a label matrix from a `track<TAB>tag` edge list.
    Ingest(IngestArgs),
    /// Inspect groundtruth: co-occurrence and annotation subsets.
    #[command(subcommand)]
    Audit(AuditCmd),
    /// Re-annotate a subset interactively.
    Annotate(AnnotateArgs),
    /// Error rates, precision/recall and corrected positive counts.
    Estimate(EstimateArgs),
    /// Corrupt a clean label matrix with a forward noise model.
    InjectNoise(InjectArgs),
    /// Log-mel spectrograms for a directory of WAV files.
    Featurize(FeaturizeArgs),
    /// Train the convnet tagger.
    Train(TrainArgs),
    /// Per-tag AUC against groundtruth or annotations.
    Evaluate(EvaluateArgs),
    /// Correlate two evaluations, per tag or across runs.
    Correlate(CorrelateArgs),
    /// Label-vector similarity of a trained model.
    Lvs(LvsArgs),
    /// Synthetic noise sweep end to end.
    Experiment(ExperimentArgs),
    /// Summarise an experiment results directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Edge list, one `track_id<TAB>tag` per line.
    #[arg(long)]
    pub edges: PathBuf,
    /// Keep only the most popular tags.
    #[arg(long, default_value_t = 50)]
    pub top_n: usize,
    /// Split file, one `track_id<TAB>{train|valid|test}` per line.
    #[arg(long)]
    pub splits: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LabelsArg {
    /// Label matrix written by `ingest` or `inject-noise`.
    #[arg(long)]
    pub labels: PathBuf,
    /// `all`, `train`, `valid`, `test` or `none`.
    #[arg(long, default_value = "all")]
    pub split: String,
}

#[derive(Debug, Subcommand)]
pub enum AuditCmd {
    /// Normalised co-occurrence matrix.
    Cooccur {
        #[command(flatten)]
        labels: LabelsArg,
        /// Restrict to these tags, in this order (comma separated).
        #[arg(long, value_delimiter = ',')]
        tags: Vec<String>,
    },
    /// Most co-occurring tag pairs.
    TopPairs {
        #[command(flatten)]
        labels: LabelsArg,
        #[arg(long, default_value_t = 20)]
        k: usize,
    },
    /// Draw an annotation skeleton.
    Sample {
        #[command(flatten)]
        labels: LabelsArg,
        /// Balanced subset for one tag: equal positive and negative tracks.
        #[arg(long, conflicts_with = "random")]
        balanced: Option<String>,
        #[arg(long, default_value_t = 50)]
        per_class: usize,
        /// Random subset of this many tracks, judged for every tag in `--tags`.
        #[arg(long, requires = "tags")]
        random: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        tags: Vec<String>,
    },
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub labels: PathBuf,
    /// Annotation skeleton from `audit sample`.
    #[arg(long)]
    pub subset: PathBuf,
    /// Directory holding `<track_id>.wav`; played through $TAGNOISE_PLAYER.
    #[arg(long)]
    pub audio_dir: Option<PathBuf>,
    #[arg(long)]
    pub annotator: Option<String>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Use the bundled reference audit instead of a label matrix.
    #[arg(long, conflicts_with_all = ["labels", "annotations"])]
    pub table2: bool,
    #[arg(long, required_unless_present = "table2")]
    pub labels: Option<PathBuf>,
    #[arg(long, required_unless_present = "table2")]
    pub annotations: Option<PathBuf>,
    /// Only these tags (default: every tag with annotations).
    #[arg(long, value_delimiter = ',')]
    pub tags: Vec<String>,
    /// Add percentile-bootstrap intervals.
    #[arg(long)]
    pub ci: bool,
    #[arg(long, default_value_t = 2000)]
    pub resamples: usize,
}

#[derive(Debug, Args)]
pub struct InjectArgs {
    #[arg(long)]
    pub labels: PathBuf,
    /// Noise spec file: `tag, drop_rate, spurious_rate` lines and an optional `seed` line.
    #[arg(long, conflicts_with_all = ["drop", "spurious"])]
    pub spec: Option<PathBuf>,
    /// Uniform drop rate for every tag.
    #[arg(long)]
    pub drop: Option<f64>,
    #[arg(long)]
    pub spurious: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[arg(long)]
    pub audio_dir: PathBuf,
    /// Crop or pad to this many frames; 0 keeps the natural length.
    #[arg(long, default_value_t = 1360)]
    pub frames: usize,
    #[arg(long, default_value_t = 96)]
    pub n_mels: usize,
    #[arg(long, default_value_t = 512)]
    pub n_fft: usize,
    #[arg(long, default_value_t = 256)]
    pub hop: usize,
    #[arg(long, default_value_t = 6000.0)]
    pub f_max: f64,
    /// `power` or `magnitude` spectrum before the mel bank.
    #[arg(long, default_value = "power")]
    pub scale: String,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub labels: PathBuf,
    /// Directory of `<track_id>.mels` files.
    #[arg(long)]
    pub features: PathBuf,
    /// `compact`, `small` or `tiny`; the input shape follows the features.
    #[arg(long, default_value = "compact")]
    pub arch: String,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    /// `f32` or `f64`.
    #[arg(long, default_value = "f32")]
    pub precision: String,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub labels: PathBuf,
    /// Checkpoint from `train`.
    #[arg(long, required_unless_present = "scores", conflicts_with = "scores")]
    pub model: Option<PathBuf>,
    #[arg(long, requires = "model")]
    pub features: Option<PathBuf>,
    /// Score CSV (`track_id` then one column per tag) instead of a model.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Write the model's scores here.
    #[arg(long)]
    pub save_scores: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Use annotation verdicts (majority vote) as the reference.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub tags: Vec<String>,
    #[arg(long)]
    pub ci: bool,
    #[arg(long, default_value_t = 2000)]
    pub resamples: usize,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// Two `evaluate` outputs; their per-tag AUCs are correlated.
    #[arg(num_args = 2, conflicts_with_all = ["runs_a", "runs_b"])]
    pub pair: Vec<PathBuf>,
    /// Evaluations of several runs against the first reference.
    #[arg(long, value_delimiter = ',', requires = "runs_b")]
    pub runs_a: Vec<PathBuf>,
    /// The same runs against the second reference, in the same order.
    #[arg(long, value_delimiter = ',', requires = "runs_a")]
    pub runs_b: Vec<PathBuf>,
    /// Per-run summary: `macro`, or a comma-separated tag list to average.
    #[arg(long, default_value = "macro")]
    pub aggregate: String,
}

#[derive(Debug, Args)]
pub struct LvsArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Cosine-normalised similarity instead of raw dot products.
    #[arg(long)]
    pub cosine: bool,
    #[arg(long, default_value_t = 20)]
    pub top: usize,
    /// Compare against co-occurrence of these labels.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value = "train")]
    pub split: String,
    #[arg(long, default_value_t = 20)]
    pub max_lvs_rank: usize,
    #[arg(long, default_value_t = 100)]
    pub min_nco_rank: usize,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Built-in configuration (`sweep8`, `separable`).
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    pub preset: Option<String>,
    /// Plain-text `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Results directory written by `experiment`.
    pub dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.global.log_level)
        .format_timestamp(None)
        .init();
    tagnoise::parallel::init_threads(cli.global.threads);
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
