//! Command-line driver: synthesize datasets, run debiasing, audit
//! representations, and sweep experiment axes.
//!
//! Exit codes: 0 success, 2 configuration/usage, 3 I/O or file format,
//! 4 numerical failure, 5 degenerate or infeasible data.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use config::KeyValues;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "fairrep", version, about = "Protected-attribute removal from vector representations via coding-rate objectives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset container.
    Synth(SynthArgs),
    /// Train a debiasing feature map and write its artifacts.
    Debias(DebiasArgs),
    /// Audit a dataset: probes, MDL, fairness metrics, clustering, rank.
    Audit(AuditArgs),
    /// Run one debias+audit per value along an experiment axis.
    Sweep(SweepArgs),
    /// Numerical rank of a dataset's vectors or an embedding table.
    Rank(RankArgs),
    /// Spearman correlation of embedding cosines against gold pair scores.
    Similarity(SimilarityArgs),
}

#[derive(Args, Clone, Default)]
struct CommonConfig {
    /// Plain-text `key = value` config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: CommonConfig,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    /// Comma-separated class counts, one per protected attribute (e.g. 2,2).
    #[arg(long = "g_classes")]
    g_classes: Option<String>,
    #[arg(long = "y_classes")]
    y_classes: Option<usize>,
    #[arg(long)]
    correlation: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "train_fraction")]
    train_fraction: Option<f64>,
    #[arg(long = "dev_fraction")]
    dev_fraction: Option<f64>,
}

#[derive(Args, Clone, Default)]
struct TrainFlags {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long = "output_dir")]
    output_dir: Option<PathBuf>,
    /// unconstrained | constrained | ablation
    #[arg(long)]
    objective: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long = "epsilon_sq")]
    epsilon_sq: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long = "batch_size")]
    batch_size: Option<usize>,
    /// sgd | adamw
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long = "learning_rate")]
    learning_rate: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long = "weight_decay")]
    weight_decay: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// single | n-partition | one-partition
    #[arg(long = "multi_attr_mode")]
    multi_attr_mode: Option<String>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long = "hidden_width")]
    hidden_width: Option<usize>,
    #[arg(long = "output_dim")]
    output_dim: Option<usize>,
    #[arg(long = "sphere_radius")]
    sphere_radius: Option<f64>,
    /// on | off
    #[arg(long = "output_norm")]
    output_norm: Option<String>,
    #[arg(long = "head_hidden")]
    head_hidden: Option<usize>,
    #[arg(long = "log_every")]
    log_every: Option<usize>,
    /// Corrupt this fraction of the first protected attribute's training
    /// labels before debiasing.
    #[arg(long = "corrupt_fraction")]
    corrupt_fraction: Option<f64>,
    #[arg(long = "corrupt_seed")]
    corrupt_seed: Option<u64>,
    /// Build the input from an embedding table instead of `input`.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// File of `first second` token pairs for the attribute direction.
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long = "top_n")]
    top_n: Option<usize>,
    /// true | false: add the neutral band as a third protected class.
    #[arg(long = "include_neutral")]
    include_neutral: Option<bool>,
}

#[derive(Args, Clone, Default)]
struct ProbeFlags {
    #[arg(long = "probe_hidden")]
    probe_hidden: Option<usize>,
    #[arg(long = "probe_epochs")]
    probe_epochs: Option<usize>,
    #[arg(long = "probe_learning_rate")]
    probe_learning_rate: Option<f64>,
    #[arg(long = "probe_batch_size")]
    probe_batch_size: Option<usize>,
    #[arg(long = "probe_patience")]
    probe_patience: Option<usize>,
    #[arg(long = "probe_seed")]
    probe_seed: Option<u64>,
    /// Comma-separated cumulative fractions ending at 1.0.
    #[arg(long = "mdl_fractions")]
    mdl_fractions: Option<String>,
    /// true | false
    #[arg(long = "run_mdl")]
    run_mdl: Option<bool>,
    #[arg(long = "rank_tol_factor")]
    rank_tol_factor: Option<f64>,
}

#[derive(Args)]
struct DebiasArgs {
    #[command(flatten)]
    common: CommonConfig,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    common: CommonConfig,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long = "output_dir")]
    output_dir: Option<PathBuf>,
    #[command(flatten)]
    probe: ProbeFlags,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonConfig,
    /// lambda | corruption | ratio
    #[arg(long)]
    axis: Option<String>,
    /// Comma-separated axis values.
    #[arg(long)]
    values: Option<String>,
    #[command(flatten)]
    train: TrainFlags,
    #[command(flatten)]
    probe: ProbeFlags,
}

#[derive(Args)]
struct RankArgs {
    #[command(flatten)]
    common: CommonConfig,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long = "rank_tol_factor")]
    rank_tol_factor: Option<f64>,
}

#[derive(Args)]
struct SimilarityArgs {
    #[command(flatten)]
    common: CommonConfig,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// File of `first second gold-score` lines.
    #[arg(long)]
    pairs: Option<PathBuf>,
}

fn base_config(common: &CommonConfig) -> Result<KeyValues, fairrep::Error> {
    match &common.config {
        Some(path) => KeyValues::from_file(path),
        None => Ok(KeyValues::default()),
    }
}

fn set_if<T: ToString>(kv: &mut KeyValues, key: &str, value: &Option<T>) {
    if let Some(v) = value {
        kv.set(key, v.to_string());
    }
}

fn set_path(kv: &mut KeyValues, key: &str, value: &Option<PathBuf>) {
    if let Some(v) = value {
        kv.set(key, v.display().to_string());
    }
}

fn apply_train_flags(kv: &mut KeyValues, f: &TrainFlags) {
    set_path(kv, "input", &f.input);
    set_path(kv, "output_dir", &f.output_dir);
    set_if(kv, "objective", &f.objective);
    set_if(kv, "lambda", &f.lambda);
    set_if(kv, "epsilon_sq", &f.epsilon_sq);
    set_if(kv, "epochs", &f.epochs);
    set_if(kv, "batch_size", &f.batch_size);
    set_if(kv, "optimizer", &f.optimizer);
    set_if(kv, "learning_rate", &f.learning_rate);
    set_if(kv, "momentum", &f.momentum);
    set_if(kv, "beta1", &f.beta1);
    set_if(kv, "beta2", &f.beta2);
    set_if(kv, "weight_decay", &f.weight_decay);
    set_if(kv, "seed", &f.seed);
    set_if(kv, "multi_attr_mode", &f.multi_attr_mode);
    set_if(kv, "depth", &f.depth);
    set_if(kv, "hidden_width", &f.hidden_width);
    set_if(kv, "output_dim", &f.output_dim);
    set_if(kv, "sphere_radius", &f.sphere_radius);
    set_if(kv, "output_norm", &f.output_norm);
    set_if(kv, "head_hidden", &f.head_hidden);
    set_if(kv, "log_every", &f.log_every);
    set_if(kv, "corrupt_fraction", &f.corrupt_fraction);
    set_if(kv, "corrupt_seed", &f.corrupt_seed);
    set_path(kv, "embeddings", &f.embeddings);
    set_path(kv, "pairs", &f.pairs);
    set_if(kv, "top_n", &f.top_n);
    set_if(kv, "include_neutral", &f.include_neutral);
}

fn apply_probe_flags(kv: &mut KeyValues, f: &ProbeFlags) {
    set_if(kv, "probe_hidden", &f.probe_hidden);
    set_if(kv, "probe_epochs", &f.probe_epochs);
    set_if(kv, "probe_learning_rate", &f.probe_learning_rate);
    set_if(kv, "probe_batch_size", &f.probe_batch_size);
    set_if(kv, "probe_patience", &f.probe_patience);
    set_if(kv, "probe_seed", &f.probe_seed);
    set_if(kv, "mdl_fractions", &f.mdl_fractions);
    set_if(kv, "run_mdl", &f.run_mdl);
    set_if(kv, "rank_tol_factor", &f.rank_tol_factor);
}

fn run() -> Result<(), fairrep::Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Synth(args) => {
            let mut kv = base_config(&args.common)?;
            set_path(&mut kv, "out", &args.out);
            set_if(&mut kv, "n", &args.n);
            set_if(&mut kv, "d", &args.d);
            set_if(&mut kv, "g_classes", &args.g_classes);
            set_if(&mut kv, "y_classes", &args.y_classes);
            set_if(&mut kv, "correlation", &args.correlation);
            set_if(&mut kv, "noise", &args.noise);
            set_if(&mut kv, "seed", &args.seed);
            set_if(&mut kv, "train_fraction", &args.train_fraction);
            set_if(&mut kv, "dev_fraction", &args.dev_fraction);
            commands::cmd_synth(&kv)
        }
        Command::Debias(args) => {
            let mut kv = base_config(&args.common)?;
            apply_train_flags(&mut kv, &args.train);
            commands::cmd_debias(&kv).map(|_| ())
        }
        Command::Audit(args) => {
            let mut kv = base_config(&args.common)?;
            set_path(&mut kv, "input", &args.input);
            set_path(&mut kv, "output_dir", &args.output_dir);
            apply_probe_flags(&mut kv, &args.probe);
            commands::cmd_audit(&kv).map(|_| ())
        }
        Command::Sweep(args) => {
            let mut kv = base_config(&args.common)?;
            set_if(&mut kv, "axis", &args.axis);
            set_if(&mut kv, "values", &args.values);
            apply_train_flags(&mut kv, &args.train);
            apply_probe_flags(&mut kv, &args.probe);
            commands::cmd_sweep(&kv)
        }
        Command::Rank(args) => {
            let mut kv = base_config(&args.common)?;
            set_path(&mut kv, "input", &args.input);
            set_path(&mut kv, "embeddings", &args.embeddings);
            set_if(&mut kv, "rank_tol_factor", &args.rank_tol_factor);
            commands::cmd_rank(&kv)
        }
        Command::Similarity(args) => {
            let mut kv = base_config(&args.common)?;
            set_path(&mut kv, "embeddings", &args.embeddings);
            set_path(&mut kv, "pairs", &args.pairs);
            commands::cmd_similarity(&kv)
        }
    }
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
