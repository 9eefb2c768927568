//! `npasr`: prepare audio, extract features, train, transcribe and evaluate.
//!
//! Exit status is 0 when every item succeeded, 1 when some items failed
//! (each failure is reported on stderr and the rest are still processed),
//! and 2 on a fatal error such as an unreadable manifest or bad config.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "npasr", version, about = "Character-level speech recognition pipeline")]
struct Cli {
    /// TOML pipeline config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Drop numeric transcriptions and clip leading/trailing silence.
    Prepare(PrepareArgs),
    /// Write one NPFEAT01 feature cache per utterance.
    Featurize(FeaturizeArgs),
    /// Split, build the vocabulary, train and checkpoint.
    Train(TrainArgs),
    /// Print `utterance_id<TAB>text` for each WAV file.
    Transcribe(TranscribeArgs),
    /// Score a checkpoint against a manifest and cached features.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub audio_dir: Option<PathBuf>,
    /// Receives the clipped WAVs and `manifest.tsv`.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Scan window in samples [default: 500].
    #[arg(long)]
    pub window_length: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub audio_dir: Option<PathBuf>,
    /// Receives `<utterance_id>.npfeat` files and `featurize_report.tsv`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Rewrite caches that already exist.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub features_dir: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Receives checkpoints, `metrics.csv` and `vocab.txt`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Prefix beam width [default: 50].
    #[arg(long)]
    pub beam_width: Option<usize>,
    /// Best-path decoding instead of beam search.
    #[arg(long)]
    pub greedy: bool,
}

#[derive(Debug, Args)]
pub struct TranscribeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// WAV files; the utterance id is the file stem.
    #[arg(required_unless_present = "stdin_list", conflicts_with = "stdin_list")]
    pub wavs: Vec<PathBuf>,
    /// Read WAV paths from stdin, one per line.
    #[arg(long)]
    pub stdin_list: bool,
    #[command(flatten)]
    pub decode: DecodeArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub features_dir: Option<PathBuf>,
    /// Per-utterance TSV report.
    #[arg(long, default_value = "evaluation.tsv")]
    pub report: PathBuf,
    #[command(flatten)]
    pub decode: DecodeArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = config::PipelineConfig::load(cli.config.as_deref()).and_then(|config| {
        let pool = commands::thread_pool()?;
        pool.install(|| match cli.command {
            Command::Prepare(a) => commands::prepare::run(a, &config),
            Command::Featurize(a) => commands::featurize::run(a, &config),
            Command::Train(a) => commands::train::run(a, &config),
            Command::Transcribe(a) => commands::decode::transcribe(a, &config),
            Command::Evaluate(a) => commands::decode::evaluate(a, &config),
        })
    });
    match result {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failures) => {
            eprintln!("{failures} item(s) failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
