mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use synnamon::analysis::Category;
use synnamon::modnet::Architecture;
use synnamon::par::Execution;
use synnamon::treebank::HeightConvention;

use crate::manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "synnamon", version, about = "Distill sentence embeddings into syntactic module networks")]
struct Cli {
    /// Worker threads for data-parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// `parallel` or `sequential`; results are identical either way.
    #[arg(long, global = true)]
    exec: Option<Execution>,

    /// Write the run manifest here instead of next to the outputs.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(untagged)]
enum Command {
    /// Production rule frequencies of a treebank as CSV (rule,count).
    Stats(StatsArgs),
    /// Keep trees of allowed heights whose rules are all among the top k.
    Filter(FilterArgs),
    /// Split a treebank so every validation rule and tag occurs in training.
    Split(SplitArgs),
    /// Train a module network on teacher embeddings.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Train a standalone `NP -> Det N` module on phrase pairs.
    ProbeTrain(ProbeTrainArgs),
    /// Per-category MSE of a probe module.
    ProbeEval(ProbeEvalArgs),
    /// Compare analytic and finite-difference module gradients.
    Gradcheck(GradcheckArgs),
    /// Generate a toy-grammar dataset labelled by a random teacher.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Serialize)]
struct TreeInput {
    /// Treebank file, one bracketed tree per line.
    #[arg(long)]
    trees: PathBuf,
    /// Keep function tags and empty elements as written.
    #[arg(long)]
    raw: bool,
}

#[derive(Debug, Args, Serialize)]
struct StatsArgs {
    #[command(flatten)]
    input: TreeInput,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct FilterArgs {
    #[command(flatten)]
    input: TreeInput,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "4,5")]
    heights: Vec<usize>,
    #[arg(long, default_value_t = 300)]
    top_rules: usize,
    /// `nodes` (a preterminal has height 2) or `edges`.
    #[arg(long, default_value = "nodes")]
    height_convention: HeightConvention,
}

#[derive(Debug, Args, Serialize)]
struct SplitArgs {
    #[command(flatten)]
    input: TreeInput,
    /// Directory for train.trees and val.trees.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.163)]
    val_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    val: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// TOML file of training settings; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from this checkpoint instead of a fresh registry.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    arch: Option<Architecture>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    accumulation: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    pair_budget: Option<usize>,
    #[arg(long)]
    no_shuffle: bool,
    /// Feed word vectors straight into phrase modules.
    #[arg(long)]
    no_pos_layer: bool,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, required_unless_present = "mean_predictor")]
    checkpoint: Option<PathBuf>,
    /// Score the constant dataset-mean predictor instead of a checkpoint.
    #[arg(long, conflicts_with = "checkpoint")]
    mean_predictor: bool,
    /// Also write the scores as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = synnamon::distill::DEFAULT_PAIR_BUDGET)]
    pair_budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args, Serialize)]
struct ProbeTrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Train on the pairs of this category only.
    #[arg(long, default_value = "determiner")]
    category: Category,
    #[arg(long, default_value = "linear")]
    arch: Architecture,
    #[arg(long, default_value_t = 5e-5)]
    lr: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_shuffle: bool,
}

#[derive(Debug, Args, Serialize)]
struct ProbeEvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Report CSV (category,count,mean_mse).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct GradcheckArgs {
    #[arg(long, default_value = "linear")]
    arch: Architecture,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    fan_in: Vec<usize>,
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
}

#[derive(Debug, Args, Serialize)]
struct SynthArgs {
    /// Directory for train.jsonl, val.jsonl and teacher.synm.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    trees: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value = "linear")]
    teacher: Architecture,
    /// Levels of NP/VP recursion.
    #[arg(long, default_value_t = 2)]
    depth: usize,
    #[arg(long, default_value_t = 0.163)]
    val_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write probe.jsonl from a linear phrase teacher.
    #[arg(long)]
    probe: bool,
    /// TOML word lists for the probe phrases.
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Stats(_) => "stats",
            Command::Filter(_) => "filter",
            Command::Split(_) => "split",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::ProbeTrain(_) => "probe-train",
            Command::ProbeEval(_) => "probe-eval",
            Command::Gradcheck(_) => "gradcheck",
            Command::Synth(_) => "synth",
        }
    }

    fn default_manifest(&self) -> Option<PathBuf> {
        let beside = |p: &PathBuf| {
            let mut s = p.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        };
        match self {
            Command::Stats(a) => Some(beside(&a.out)),
            Command::Filter(a) => Some(beside(&a.out)),
            Command::ProbeTrain(a) => Some(beside(&a.out)),
            Command::ProbeEval(a) => Some(beside(&a.out)),
            Command::Eval(a) => a.out.as_ref().map(beside),
            Command::Split(a) => Some(a.out.join("manifest.json")),
            Command::Train(a) => Some(a.out.join("manifest.json")),
            Command::Synth(a) => Some(a.out.join("manifest.json")),
            Command::Gradcheck(_) => None,
        }
    }
}

/// Usage problems found after argument parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    let validation = err.chain().any(|e| {
        e.downcast_ref::<UsageError>().is_some()
            || e.downcast_ref::<synnamon::Error>().is_some_and(synnamon::Error::is_validation)
    });
    if validation {
        1
    } else {
        2
    }
}

fn configure_threads(threads: Option<usize>) -> anyhow::Result<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(UsageError("--threads must be at least 1".into()).into());
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    #[cfg(not(feature = "parallel"))]
    log::warn!("built without parallel support; --threads {n} ignored");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SYNNAMON_LOG", "warn")).init();

    let exec = cli.exec.unwrap_or_default();
    let flags = serde_json::json!({
        "command": serde_json::to_value(&cli.command).unwrap_or_default(),
        "threads": cli.threads,
        "exec": if exec.is_parallel() { "parallel" } else { "sequential" },
    });
    let mut manifest = RunManifest::new(cli.command.name(), flags);
    let manifest_path = cli.manifest.clone().or_else(|| cli.command.default_manifest());

    let outcome = configure_threads(cli.threads).and_then(|()| commands::run(&cli.command, exec, &mut manifest));
    manifest.finish(&outcome);
    if let Some(path) = &manifest_path {
        if let Err(e) = manifest.write(path) {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    }
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
