use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use synnamon::analysis::{
    export_history_csv, load_probe_dataset, probe_eval, probe_train, write_probe_dataset, Lexicon, ProbeConfig,
    PROBE_KEY,
};
use synnamon::autodiff::AdamConfig;
use synnamon::distill::{evaluate_mean_predictor, evaluate_with, load_dataset, train, write_dataset, TrainConfig};
use synnamon::modnet::{module_grad_check, read_checkpoint, write_checkpoint, ModuleRegistry};
use synnamon::par::Execution;
use synnamon::synth::{synth_corpus, synth_probe_pairs, SynthConfig};
use synnamon::treebank::{
    filter_corpus, read_treebank, rule_frequencies, split_corpus, write_treebank, CorpusFilterConfig, ReadOptions,
    SyntaxTree,
};

use crate::manifest::RunManifest;
use crate::{
    Command, EvalArgs, FilterArgs, GradcheckArgs, ProbeEvalArgs, ProbeTrainArgs, SplitArgs, StatsArgs, SynthArgs,
    TrainArgs, TreeInput, UsageError,
};

pub fn run(cmd: &Command, exec: Execution, m: &mut RunManifest) -> Result<()> {
    match cmd {
        Command::Stats(a) => stats(a, m),
        Command::Filter(a) => filter(a, m),
        Command::Split(a) => split(a, m),
        Command::Train(a) => train_cmd(a, exec, m),
        Command::Eval(a) => eval(a, exec, m),
        Command::ProbeTrain(a) => probe_train_cmd(a, m),
        Command::ProbeEval(a) => probe_eval_cmd(a, m),
        Command::Gradcheck(a) => gradcheck(a, m),
        Command::Synth(a) => synth(a, m),
    }
}

fn input(m: &mut RunManifest, path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(UsageError(format!("input file {} does not exist", path.display())).into());
    }
    m.input(path)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn load_trees(a: &TreeInput, m: &mut RunManifest) -> Result<Vec<SyntaxTree>> {
    input(m, &a.trees)?;
    let trees = read_treebank(&a.trees, ReadOptions { normalize: !a.raw })
        .with_context(|| format!("reading {}", a.trees.display()))?;
    log::info!("read {} trees from {}", trees.len(), a.trees.display());
    Ok(trees)
}

fn stats(a: &StatsArgs, m: &mut RunManifest) -> Result<()> {
    let trees = load_trees(&a.input, m)?;
    let freqs = rule_frequencies(&trees);
    let mut w = csv::Writer::from_writer(create(&a.out)?);
    w.write_record(["rule", "count"])?;
    for (rule, count) in &freqs {
        w.write_record([rule.to_string(), count.to_string()])?;
    }
    w.flush()?;
    drop(w);
    m.output(&a.out)?;
    println!("{} trees, {} distinct rules", trees.len(), freqs.len());
    Ok(())
}

fn filter(a: &FilterArgs, m: &mut RunManifest) -> Result<()> {
    let trees = load_trees(&a.input, m)?;
    let cfg = CorpusFilterConfig {
        allowed_heights: a.heights.iter().copied().collect(),
        top_k_rules: a.top_rules,
        height_convention: a.height_convention,
    };
    let kept = filter_corpus(&trees, &cfg)?;
    write_treebank(create(&a.out)?, &kept)?;
    m.output(&a.out)?;
    println!("kept {} of {} trees", kept.len(), trees.len());
    Ok(())
}

fn split(a: &SplitArgs, m: &mut RunManifest) -> Result<()> {
    m.seed("split", a.seed);
    let trees = load_trees(&a.input, m)?;
    let s = split_corpus(&trees, a.val_fraction, a.seed)?;
    let (train_path, val_path) = (a.out.join("train.trees"), a.out.join("val.trees"));
    write_treebank(create(&train_path)?, &s.train)?;
    write_treebank(create(&val_path)?, &s.val)?;
    m.output(&train_path)?;
    m.output(&val_path)?;
    if s.is_short() {
        eprintln!("warning: coverage limited validation to {} of {} requested trees", s.val.len(), s.requested_val);
    }
    println!("train {} / val {}", s.train.len(), s.val.len());
    Ok(())
}

fn resolve_train_config(a: &TrainArgs, exec: Execution, m: &mut RunManifest) -> Result<TrainConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            input(m, path)?;
            let text = std::fs::read_to_string(path)?;
            toml::from_str::<TrainConfig>(&text)
                .map_err(|e| UsageError(format!("config {}: {e}", path.display())))?
        }
        None => TrainConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = a.$field { cfg.$field = v; })* };
    }
    set!(arch, lr, epochs, accumulation, seed, pair_budget);
    if a.no_shuffle {
        cfg.shuffle = false;
    }
    if a.no_pos_layer {
        cfg.pos_layer = false;
    }
    cfg.execution = exec;
    cfg.validate()?;
    Ok(cfg)
}

fn train_cmd(a: &TrainArgs, exec: Execution, m: &mut RunManifest) -> Result<()> {
    let cfg = resolve_train_config(a, exec, m)?;
    m.seed("train", cfg.seed);
    m.flags["resolved"] = serde_json::to_value(&cfg)?;
    input(m, &a.data)?;
    input(m, &a.val)?;
    let train_set = load_dataset(&a.data).with_context(|| format!("loading {}", a.data.display()))?;
    let val_set = load_dataset(&a.val).with_context(|| format!("loading {}", a.val.display()))?;
    let init = match &a.init {
        Some(p) => {
            input(m, p)?;
            let mut reg = read_checkpoint(p).with_context(|| format!("loading {}", p.display()))?;
            reg.set_seed(cfg.seed);
            Some(reg)
        }
        None => None,
    };
    let out = train(&train_set, &val_set, init, &cfg)?;

    std::fs::create_dir_all(&a.out)?;
    let files = [
        ("history.csv", None),
        ("final.synm", Some(&out.registry)),
        ("best.synm", Some(&out.best_registry)),
    ];
    for (name, reg) in files {
        let path = a.out.join(name);
        match reg {
            None => export_history_csv(&out.history, &path)?,
            Some(r) => write_checkpoint(r, &path)?,
        }
        m.output(&path)?;
    }
    let best = out.history.best();
    let summary = serde_json::json!({
        "best_epoch": best.epoch,
        "best_val_mse": best.val_mse,
        "best_val_normalized": best.val_normalized,
        "chance_mse": out.history.chance_mse,
        "modules": out.registry.len(),
        "parameters": out.registry.count_parameters(),
    });
    let summary_path = a.out.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    m.output(&summary_path)?;
    println!(
        "best epoch {} of {}: val_mse {:.6e}, normalized {:.6} (chance_mse {:.6e})",
        best.epoch,
        out.history.epochs.len(),
        best.val_mse,
        best.val_normalized,
        out.history.chance_mse
    );
    Ok(())
}

fn eval(a: &EvalArgs, exec: Execution, m: &mut RunManifest) -> Result<()> {
    m.seed("chance_pairs", a.seed);
    input(m, &a.data)?;
    let records = load_dataset(&a.data).with_context(|| format!("loading {}", a.data.display()))?;
    let e = match (&a.checkpoint, a.mean_predictor) {
        (Some(ckpt), false) => {
            input(m, ckpt)?;
            let registry = read_checkpoint(ckpt).with_context(|| format!("loading {}", ckpt.display()))?;
            evaluate_with(&records, &registry, a.pair_budget, a.seed, exec)?
        }
        (None, true) => evaluate_mean_predictor(&records, a.pair_budget)?,
        _ => return Err(UsageError("give exactly one of --checkpoint and --mean-predictor".into()).into()),
    };
    let json = serde_json::to_string_pretty(&e)?;
    println!("{json}");
    if let Some(out) = &a.out {
        let mut w = create(out)?;
        writeln!(w, "{json}")?;
        w.flush()?;
        drop(w);
        m.output(out)?;
    }
    Ok(())
}

fn probe_train_cmd(a: &ProbeTrainArgs, m: &mut RunManifest) -> Result<()> {
    m.seed("probe", a.seed);
    input(m, &a.data)?;
    let pairs: Vec<_> = load_probe_dataset(&a.data)?.into_iter().filter(|p| p.category == a.category).collect();
    if pairs.is_empty() {
        bail!(synnamon::Error::EmptyDataset);
    }
    let cfg = ProbeConfig { adam: AdamConfig::with_lr(a.lr), epochs: a.epochs, seed: a.seed, shuffle: !a.no_shuffle };
    let out = probe_train(&pairs, a.arch, &cfg)?;
    let mut reg = ModuleRegistry::new(out.module.dim(), a.arch, a.seed).with_pos_layer(false);
    reg.insert(out.module)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_checkpoint(&reg, &a.out)?;
    m.output(&a.out)?;
    println!("{} {} pairs, final training MSE {:.6e}", pairs.len(), a.category, out.final_loss);
    Ok(())
}

fn probe_eval_cmd(a: &ProbeEvalArgs, m: &mut RunManifest) -> Result<()> {
    input(m, &a.data)?;
    input(m, &a.checkpoint)?;
    let pairs = load_probe_dataset(&a.data)?;
    let reg = read_checkpoint(&a.checkpoint)?;
    let module = reg.get(PROBE_KEY).ok_or_else(|| synnamon::Error::MissingModule(PROBE_KEY.into()))?;
    let report = probe_eval(module, &pairs)?;
    report.write_csv(create(&a.out)?)?;
    m.output(&a.out)?;
    report.write_csv(std::io::stdout().lock())?;
    Ok(())
}

fn gradcheck(a: &GradcheckArgs, m: &mut RunManifest) -> Result<()> {
    m.seed("gradcheck", a.seed);
    if a.fan_in.is_empty() || a.fan_in.contains(&0) {
        return Err(UsageError("--fan-in values must be positive".into()).into());
    }
    let mut worst: f64 = 0.0;
    for &n in &a.fan_in {
        let err = module_grad_check(a.arch, n, a.dim, a.seed, a.epsilon)?;
        println!("{} N={n} D={}: {err:.3e}", a.arch, a.dim);
        worst = worst.max(err);
    }
    println!("max relative error: {worst:.3e}");
    if worst.is_nan() || worst >= a.tolerance {
        bail!("max relative error {worst:.3e} exceeds tolerance {:.1e}", a.tolerance);
    }
    Ok(())
}

fn synth(a: &SynthArgs, m: &mut RunManifest) -> Result<()> {
    m.seed("synth", a.seed);
    if a.dim == 0 {
        return Err(UsageError("--dim must be positive".into()).into());
    }
    let cfg = SynthConfig {
        trees: a.trees,
        dim: a.dim,
        teacher: a.teacher,
        depth: a.depth,
        val_fraction: a.val_fraction,
        seed: a.seed,
    };
    let corpus = synth_corpus(&cfg)?;
    std::fs::create_dir_all(&a.out)?;
    let mut written: Vec<PathBuf> = Vec::new();
    for (name, records) in [("train.jsonl", &corpus.train), ("val.jsonl", &corpus.val)] {
        let path = a.out.join(name);
        write_dataset(create(&path)?, records)?;
        written.push(path);
    }
    let teacher = a.out.join("teacher.synm");
    write_checkpoint(&corpus.teacher, &teacher)?;
    written.push(teacher);
    if a.probe {
        let lexicon = match &a.lexicon {
            Some(p) => {
                input(m, p)?;
                Lexicon::load(p)?
            }
            None => Lexicon::default(),
        };
        let path = a.out.join("probe.jsonl");
        write_probe_dataset(create(&path)?, &synth_probe_pairs(&lexicon, a.dim, a.seed))?;
        written.push(path);
    }
    for p in &written {
        m.output(p)?;
    }
    println!("train {} / val {} records, D={}", corpus.train.len(), corpus.val.len(), a.dim);
    Ok(())
}
