//! `greed`: directed graph embeddings from the command line.
//!
//! The pipeline runs as separate stages that exchange plain-text files:
//! `split`, `train-proximity`, `train-direction`, then `evaluate-lp` and
//! `evaluate-nr`. All randomness derives from `--seed`, expanded per stage.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, CommandFactory, FromArgMatches, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "greed",
    version,
    about = "Directed graph embeddings with a cross-product siamese network"
)]
struct Cli {
    /// Read `key = value` defaults from a file; flags override them.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads [default: all cores]. Outputs do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Hold out test edges and build the three test sets.
    #[command(args_override_self = true)]
    Split(SplitArgs),
    /// Train proximity embeddings with random walks and skip-gram.
    #[command(args_override_self = true)]
    TrainProximity(ProximityArgs),
    /// Train the direction model.
    #[command(args_override_self = true)]
    TrainDirection(DirectionArgs),
    /// Link prediction ROC-AUC per test set type.
    #[command(args_override_self = true)]
    EvaluateLp(EvaluateLpArgs),
    /// Node recommendation precision and recall at k.
    #[command(args_override_self = true)]
    EvaluateNr(EvaluateNrArgs),
    /// Compare analytic and finite-difference gradients on a small model.
    #[command(args_override_self = true)]
    Gradcheck(GradcheckArgs),
    /// Write a model's direction embeddings as an embedding file.
    #[command(args_override_self = true)]
    ExportEmbeddings(ExportArgs),
}

const SUBCOMMANDS: [&str; 7] = [
    "split",
    "train-proximity",
    "train-direction",
    "evaluate-lp",
    "evaluate-nr",
    "gradcheck",
    "export-embeddings",
];

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Edge list: one "src dst" pair per line, '%' or '#' comments.
    #[arg(long)]
    pub edges: PathBuf,
    /// Fraction of edges held out for testing.
    #[arg(long, default_value_t = 0.2)]
    pub test_frac: f64,
    /// Root seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProximityArgs {
    /// Training edge list written by `split`.
    #[arg(long)]
    pub train: PathBuf,
    /// Embedding file to write; the threshold goes to `<out>.threshold`.
    #[arg(long)]
    pub out: PathBuf,
    /// Embedding dimension.
    #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u32).range(1..))]
    pub dim: u32,
    /// Walks started from every node.
    #[arg(long, default_value_t = 40, value_parser = clap::value_parser!(u32).range(1..))]
    pub walks: u32,
    /// Nodes per walk.
    #[arg(long, default_value_t = 40, value_parser = clap::value_parser!(u32).range(1..))]
    pub walk_len: u32,
    /// Skip-gram context window.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    pub window: u32,
    /// Negative samples per context pair.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    pub negatives: u32,
    /// Passes over the walk corpus.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub epochs: u32,
    /// Initial skip-gram learning rate.
    #[arg(long, default_value_t = 0.025)]
    pub lr: f64,
    /// Fraction of training edges withheld to choose the threshold.
    #[arg(long, default_value_t = 0.1)]
    pub validation_frac: f64,
    /// Follow edge directions during walks instead of treating edges as undirected.
    #[arg(long)]
    pub directed_walks: bool,
    /// Root seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DirectionArgs {
    /// Training edge list written by `split`.
    #[arg(long)]
    pub train: PathBuf,
    /// Checkpoint file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Length of the trainable input vector per node.
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(1..))]
    pub input_dim: u32,
    /// Hidden layer sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "256,256")]
    pub hidden: Vec<usize>,
    /// Direction embedding dimension N (at least 3).
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(3..))]
    pub embed_dim: u32,
    /// Contrastive loss margin.
    #[arg(long, default_value_t = 0.25)]
    pub margin: f64,
    /// Decision threshold on the prediction.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// SGD learning rate.
    #[arg(long, default_value_t = 0.025)]
    pub lr: f64,
    /// Pairs per mini-batch.
    #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u32).range(1..))]
    pub batch: u32,
    /// Epochs to train (added to a resumed model's count).
    #[arg(long, default_value_t = 20)]
    pub epochs: u32,
    /// Hop bound for transitive training pairs.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub max_hop: u32,
    /// Walks per node for the sampled-reachability fallback.
    #[arg(long, default_value_t = 40, value_parser = clap::value_parser!(u32).range(1..))]
    pub walks: u32,
    /// Walk length for the sampled-reachability fallback.
    #[arg(long, default_value_t = 40, value_parser = clap::value_parser!(u32).range(1..))]
    pub walk_len: u32,
    /// Seed for a random reference vector [default: normalized all-ones].
    #[arg(long)]
    pub reference_seed: Option<u64>,
    /// Continue training from this checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Run a finite-difference gradient check on a small model first.
    #[arg(long)]
    pub gradcheck: bool,
    /// Id mapping file to reference from the checkpoint.
    #[arg(long)]
    pub id_map: Option<PathBuf>,
    /// Root seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvaluateLpArgs {
    /// Proximity embedding file.
    #[arg(long)]
    pub proximity: PathBuf,
    /// Proximity threshold file [default: <proximity>.threshold].
    #[arg(long)]
    pub threshold_file: Option<PathBuf>,
    /// Direction model checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    /// Directory written by `split`.
    #[arg(long)]
    pub split_dir: PathBuf,
    /// Test set types to score, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub types: Vec<String>,
    /// Scoring: two-step (proximity gate then direction) or proximity only.
    #[arg(long, default_value = "two-step", value_parser = ["two-step", "proximity"])]
    pub mode: String,
    /// Output directory for lp_metrics.csv and lp_metrics.txt.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateNrArgs {
    /// Proximity embedding file.
    #[arg(long)]
    pub proximity: PathBuf,
    /// Direction model checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    /// Directory written by `split`.
    #[arg(long)]
    pub split_dir: PathBuf,
    /// Cutoffs, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "10,20,50")]
    pub k: Vec<usize>,
    /// Fraction of nodes with held-out edges used as queries.
    #[arg(long, default_value_t = 0.1)]
    pub sample: f64,
    /// Drop candidates at or below the proximity threshold before the direction filter.
    #[arg(long)]
    pub gate: bool,
    /// Proximity threshold file for --gate [default: <proximity>.threshold].
    #[arg(long)]
    pub threshold_file: Option<PathBuf>,
    /// Root seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for nr_metrics.csv, nr_metrics.txt and recommendations.txt.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    pub input_dim: u32,
    /// Hidden layer sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "7")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(3..))]
    pub embed_dim: u32,
    /// Nodes in the test model.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(2..))]
    pub nodes: u32,
    /// Random (pair, label) draws.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub draws: u32,
    /// Central difference step.
    #[arg(long, default_value_t = 1e-6)]
    pub step: f64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
    /// Root seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Direction model checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    /// Embedding file to write.
    #[arg(long)]
    pub out: PathBuf,
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => "warn",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .format_target(false)
        .init();
}

fn run() -> anyhow::Result<()> {
    let args = config::expand_args(std::env::args_os().collect(), &SUBCOMMANDS)?;
    let command = Cli::command();
    let matches = command.clone().get_matches_from(args);
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    init_logging(cli.verbose, cli.quiet);
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(usize::from(n))
            .build_global()?;
    }
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let sub_command = command
        .find_subcommand(name)
        .expect("parsed subcommand is defined");
    let recorded = config::resolved(sub_command, sub);
    match cli.command {
        Command::Split(a) => commands::split(&a, &recorded),
        Command::TrainProximity(a) => commands::train_proximity(&a, &recorded),
        Command::TrainDirection(a) => commands::train_direction(&a, &recorded),
        Command::EvaluateLp(a) => commands::evaluate_lp(&a, &recorded),
        Command::EvaluateNr(a) => commands::evaluate_nr(&a, &recorded),
        Command::Gradcheck(a) => commands::gradcheck(&a),
        Command::ExportEmbeddings(a) => commands::export_embeddings(&a, &recorded),
    }
    .map_err(|e| e.context(format!("{name} failed")))
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
