//! `recnet`: ingest interaction logs, train embeddings, query and evaluate.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use recnet_core::Format;

use crate::config::{parse_format, usage, Mode, RunConfig, UsageError};

#[derive(Parser, Debug)]
#[command(name = "recnet", version, about = "Bipartite graph embeddings for top-K recommendation")]
struct Cli {
    /// `key = value` configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Size of the thread pool used for sampling tables and evaluation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse an edge TSV and write the binary graph cache.
    Ingest {
        edges: Option<PathBuf>,
        cache: Option<PathBuf>,
    },
    /// Train user and item embeddings.
    Train(TrainArgs),
    /// Print the top-K items for a user or an item.
    Query(QueryArgs),
    /// Split, rank held-out pairs and report HR/NDCG/MRR.
    Eval(EvalArgs),
    /// Time training epochs on nested edge subsamples.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Default)]
struct Hyper {
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    samples_per_user: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    #[arg(long)]
    decay_base: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Graph cache or edge TSV.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Embedding output file.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    format: Option<Format>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    shards: Option<usize>,
    /// Train only on the training side of the seeded split used by `eval`.
    #[arg(long)]
    split: bool,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[command(flatten)]
    hyper: Hyper,
}

#[derive(Args, Debug)]
struct QueryArgs {
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, conflicts_with = "item", required_unless_present = "item")]
    user: Option<String>,
    #[arg(long)]
    item: Option<String>,
    #[arg(long, short, default_value_t = recnet_core::retrieval::DEFAULT_ITEM_NEIGHBORS)]
    k: usize,
    /// Graph whose training edges are excluded with `--exclude-train`.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, requires = "graph")]
    exclude_train: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Comma-separated cutoffs.
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Cross-validate on the training side with this many folds instead of
    /// scoring stored embeddings.
    #[arg(long)]
    cv_folds: Option<usize>,
    #[command(flatten)]
    hyper: Hyper,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Comma-separated edge fractions in (0, 1].
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.5,1.0")]
    scale_series: Vec<f64>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    hyper: Hyper,
}

impl Hyper {
    fn apply(&self, cfg: &mut RunConfig) {
        let t = &mut cfg.train;
        macro_rules! set {
            ($($field:ident),*) => {$( if let Some(v) = self.$field { t.$field = v; } )*};
        }
        set!(dim, negatives, samples_per_user, learning_rate, epochs, gamma, decay_base, workers);
    }
}

fn set<T: Clone>(slot: &mut T, value: &Option<T>) {
    if let Some(v) = value {
        *slot = v.clone();
    }
}

fn set_path(slot: &mut Option<PathBuf>, value: &Option<PathBuf>) {
    if value.is_some() {
        *slot = value.clone();
    }
}

fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }

    match cli.command {
        Command::Ingest { edges, cache } => {
            set_path(&mut cfg.edges, &edges);
            set_path(&mut cfg.graph, &cache);
            commands::ingest(&cfg, out)
        }
        Command::Train(a) => {
            set_path(&mut cfg.graph, &a.graph);
            set_path(&mut cfg.embeddings, &a.out);
            set_path(&mut cfg.report, &a.report);
            set(&mut cfg.format, &a.format);
            set(&mut cfg.mode, &a.mode);
            set(&mut cfg.shards, &a.shards);
            set(&mut cfg.split.train_fraction, &a.train_fraction);
            a.hyper.apply(&mut cfg);
            commands::train(&cfg, a.split, out)
        }
        Command::Query(a) => {
            set_path(&mut cfg.embeddings, &a.embeddings);
            set_path(&mut cfg.graph, &a.graph);
            let target = match (a.user, a.item) {
                (Some(u), _) => commands::QueryTarget::User(u),
                (None, Some(i)) => commands::QueryTarget::Item(i),
                (None, None) => return Err(usage("pass --user or --item")),
            };
            commands::query(&cfg, &target, a.k, a.exclude_train, out)
        }
        Command::Eval(a) => {
            set_path(&mut cfg.embeddings, &a.embeddings);
            set_path(&mut cfg.graph, &a.graph);
            set_path(&mut cfg.report, &a.report);
            set(&mut cfg.split.train_fraction, &a.train_fraction);
            set(&mut cfg.ks, &a.ks);
            a.hyper.apply(&mut cfg);
            commands::eval(&cfg, a.cv_folds, out)
        }
        Command::Bench(a) => {
            set_path(&mut cfg.graph, &a.graph);
            set_path(&mut cfg.report, &a.report);
            a.hyper.apply(&mut cfg);
            commands::bench(&cfg, &a.scale_series, out)
        }
    }
}

/// 1 for usage errors, 2 for bad input data, 3 for anything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<recnet_core::Error>() {
        Some(recnet_core::Error::InvalidConfig(_)) => 1,
        Some(e) if e.is_data_error() => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
