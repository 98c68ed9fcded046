use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Category;
use crate::autodiff::{mse_value, AdamConfig, AdamState, Tape, Tensor};
use crate::distill::{raw_records, RawRecord};
use crate::error::{Error, Result};
use crate::modnet::{derive_seed, Architecture, ModuleParams, ModuleRegistry};
use crate::par::{self, Execution};

/// Registry key of the probed module.
pub const PROBE_KEY: &str = "NP -> Det N";

#[derive(Debug, Clone, PartialEq)]
pub struct PhrasePair {
    pub first_word: String,
    pub second_word: String,
    pub category: Category,
    pub first_vec: Tensor,
    pub second_vec: Tensor,
    pub phrase_vec: Tensor,
}

impl PhrasePair {
    pub fn dim(&self) -> usize {
        self.phrase_vec.len()
    }

    /// Concatenated `[first | second]` input row.
    pub fn input(&self) -> Tensor {
        let mut v = self.first_vec.as_slice().to_vec();
        v.extend_from_slice(self.second_vec.as_slice());
        Tensor::row(v)
    }
}

/// Probe phrases in the sentence-record JSON-lines shape with exactly
/// two words and a `category` field. A `tree` is accepted and ignored.
pub fn parse_probe_dataset<R: BufRead>(input: R) -> Result<Vec<PhrasePair>> {
    let mut dim = None;
    let mut out = Vec::new();
    for (line, raw) in raw_records(input)? {
        raw.check_dims(line, &mut dim)?;
        let RawRecord { words, sentence_vec, category, .. } = raw;
        let category: Category = category
            .ok_or_else(|| Error::Schema { line, message: "missing field `category`".into() })?
            .parse()
            .map_err(|e: Error| Error::Schema { line, message: e.to_string() })?;
        let [first, second]: [_; 2] = words
            .try_into()
            .map_err(|w: Vec<_>| Error::Schema { line, message: format!("expected 2 words, found {}", w.len()) })?;
        out.push(PhrasePair {
            first_word: first.text,
            second_word: second.text,
            category,
            first_vec: Tensor::row(first.vec),
            second_vec: Tensor::row(second.vec),
            phrase_vec: Tensor::row(sentence_vec),
        });
    }
    Ok(out)
}

pub fn load_probe_dataset(path: impl AsRef<Path>) -> Result<Vec<PhrasePair>> {
    parse_probe_dataset(BufReader::new(std::fs::File::open(path)?))
}

pub fn write_probe_dataset<W: Write>(mut out: W, pairs: &[PhrasePair]) -> Result<()> {
    for (i, p) in pairs.iter().enumerate() {
        let words = serde_json::json!([
            {"text": p.first_word, "vec": p.first_vec.as_slice()},
            {"text": p.second_word, "vec": p.second_vec.as_slice()},
        ]);
        let rec = serde_json::json!({
            "id": i.to_string(),
            "tree": format!("(NP (Det {}) (N {}))", p.first_word, p.second_word),
            "dim": p.dim(),
            "words": words,
            "sentence_vec": p.phrase_vec.as_slice(),
            "category": p.category,
        });
        serde_json::to_writer(&mut out, &rec).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub adam: AdamConfig,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { adam: AdamConfig::default(), epochs: 100, seed: 0, shuffle: true }
    }
}

#[derive(Debug, Clone)]
pub struct ProbeOutcome {
    pub module: ModuleParams,
    /// Mean per-pair loss seen during each epoch's updates.
    pub epoch_losses: Vec<f64>,
    /// Mean MSE over the training pairs after the last epoch.
    pub final_loss: f64,
}

fn pair_loss(module: &ModuleParams, pair: &PhrasePair) -> Result<f64> {
    let input = pair.input();
    let mut tape = Tape::new();
    let x = tape.constant(&input);
    let y = module.forward(0, x, &mut tape)?;
    Ok(mse_value(tape.value(y).as_slice(), pair.phrase_vec.as_slice()))
}

fn check_pairs(pairs: &[PhrasePair]) -> Result<&PhrasePair> {
    let first = pairs.first().ok_or(Error::EmptyDataset)?;
    let d = first.dim();
    match pairs.iter().find(|p| p.dim() != d || p.first_vec.len() != d || p.second_vec.len() != d) {
        Some(p) => Err(Error::InvalidConfig(format!("phrase `{} {}` has mismatched dimension", p.first_word, p.second_word))),
        None => Ok(first),
    }
}

/// Train one fan-in-2 module directly on concatenated word vectors,
/// one Adam step per pair.
pub fn probe_train(pairs: &[PhrasePair], arch: Architecture, cfg: &ProbeConfig) -> Result<ProbeOutcome> {
    let first = check_pairs(pairs)?;
    if let Some(p) = pairs.iter().find(|p| p.category != first.category) {
        return Err(Error::MixedCategories(first.category.to_string(), p.category.to_string()));
    }
    if cfg.epochs == 0 {
        return Err(Error::InvalidConfig("epochs must be at least 1".into()));
    }
    let dim = first.dim();
    let mut reg = ModuleRegistry::new(dim, arch, cfg.seed).with_pos_layer(false);
    reg.ensure(PROBE_KEY, 2)?;
    let owner = reg.owner_of(PROBE_KEY).expect("just inserted");
    let inputs: Vec<Tensor> = pairs.iter().map(PhrasePair::input).collect();
    let mut adam = AdamState::new(cfg.adam)?;
    let mut rng = ChaCha8Rng::from_seed(derive_seed("probe-shuffle", cfg.seed, ""));
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut sum = 0.0;
        for &i in &order {
            let (loss, grads) = {
                let module = reg.get(PROBE_KEY).expect("registered");
                let mut tape = Tape::new();
                let x = tape.constant(&inputs[i]);
                let y = module.forward(owner, x, &mut tape)?;
                let t = tape.constant(&pairs[i].phrase_vec);
                let l = tape.mse(y, t)?;
                (tape.scalar(l), tape.backward(l)?)
            };
            if !loss.is_finite() {
                let p = &pairs[i];
                return Err(Error::NonFiniteLoss { epoch, sentence: format!("{} {}", p.first_word, p.second_word) });
            }
            sum += loss;
            adam.step(&mut reg, &grads)?;
        }
        epoch_losses.push(sum / pairs.len() as f64);
    }
    let module = reg.get(PROBE_KEY).expect("registered").clone();
    let final_loss = category_means(&module, pairs, Execution::Sequential)?[&first.category].mean_mse;
    Ok(ProbeOutcome { module, epoch_losses, final_loss })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CategoryStats {
    pub count: usize,
    pub mean_mse: f64,
}

/// Per-category probe scores, keyed in category order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CategoryReport {
    pub categories: BTreeMap<Category, CategoryStats>,
}

impl CategoryReport {
    pub fn get(&self, c: Category) -> Option<&CategoryStats> {
        self.categories.get(&c)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "category,count,mean_mse")?;
        for (c, s) in &self.categories {
            writeln!(out, "{c},{},{}", s.count, s.mean_mse)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn category_means(module: &ModuleParams, pairs: &[PhrasePair], exec: Execution) -> Result<BTreeMap<Category, CategoryStats>> {
    let losses = par::try_map(exec, pairs, |p| pair_loss(module, p))?;
    let mut sums: BTreeMap<Category, (usize, f64)> = BTreeMap::new();
    for (p, l) in pairs.iter().zip(losses) {
        let e = sums.entry(p.category).or_default();
        e.0 += 1;
        e.1 += l;
    }
    Ok(sums.into_iter().map(|(c, (n, s))| (c, CategoryStats { count: n, mean_mse: s / n as f64 })).collect())
}

/// Mean MSE of `module` on each category present in `pairs`.
pub fn probe_eval(module: &ModuleParams, pairs: &[PhrasePair]) -> Result<CategoryReport> {
    check_pairs(pairs)?;
    if module.fan_in() != 2 || module.dim() != pairs[0].dim() {
        return Err(Error::InvalidConfig(format!(
            "probe module must have fan-in 2 and D={}, found N={} D={}",
            pairs[0].dim(),
            module.fan_in(),
            module.dim()
        )));
    }
    Ok(CategoryReport { categories: category_means(module, pairs, Execution::default())? })
}
