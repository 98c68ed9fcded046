use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::chance::{chance_mse_vectors, DEFAULT_PAIR_BUDGET};
use super::SentenceRecord;
use crate::autodiff::{mse_value, AdamConfig, AdamState, Gradients, Tape, Tensor};
use crate::error::{Error, Result};
use crate::modnet::{compose_sentence, derive_seed, Architecture, ModuleRegistry};
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub arch: Architecture,
    pub lr: f64,
    pub epochs: usize,
    /// Sentences whose gradients are summed into one optimizer step.
    pub accumulation: usize,
    pub seed: u64,
    pub shuffle: bool,
    pub pos_layer: bool,
    pub pair_budget: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            arch: Architecture::Linear,
            lr: adam.lr,
            epochs: 100,
            accumulation: 1,
            seed: 0,
            shuffle: true,
            pos_layer: true,
            pair_budget: DEFAULT_PAIR_BUDGET,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            execution: Execution::default(),
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.beta1, beta2: self.beta2, epsilon: self.epsilon }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.accumulation == 0 {
            return Err(Error::InvalidConfig("accumulation must be at least 1".into()));
        }
        self.adam().validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub val_normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// Index into `epochs` of the minimum `val_mse` (earliest on ties).
    pub best_epoch: usize,
    pub chance_mse: f64,
}

impl TrainHistory {
    pub fn best(&self) -> &EpochStats {
        &self.epochs[self.best_epoch]
    }

    /// Index of the minimum validation MSE, earliest on ties.
    pub fn argmin_val(epochs: &[EpochStats]) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, e) in epochs.iter().enumerate() {
            if best.is_none_or(|b| e.val_mse < epochs[b].val_mse) {
                best = Some(i);
            }
        }
        best
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Registry after the final epoch.
    pub registry: ModuleRegistry,
    /// Registry as it stood after the best epoch.
    pub best_registry: ModuleRegistry,
    pub history: TrainHistory,
}

/// Loss and parameter gradients for one sentence.
pub fn sentence_gradients(record: &SentenceRecord, registry: &ModuleRegistry) -> Result<(f64, Gradients)> {
    let mut tape = Tape::new();
    let root = compose_sentence(&record.tree, &record.word_vectors, registry, &mut tape)?;
    let target = tape.constant(&record.sentence_vector);
    let loss = tape.mse(root, target)?;
    let value = tape.scalar(loss);
    Ok((value, tape.backward(loss)?))
}

/// Per-record loss of the registry's prediction.
pub fn record_losses(records: &[SentenceRecord], registry: &ModuleRegistry, exec: Execution) -> Result<Vec<f64>> {
    par::try_map(exec, records, |r| {
        let pred = registry.embed(&r.tree, &r.word_vectors)?;
        Ok(mse_value(pred.as_slice(), r.sentence_vector.as_slice()))
    })
}

pub fn mean_mse(records: &[SentenceRecord], registry: &ModuleRegistry, exec: Execution) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let losses = record_losses(records, registry, exec)?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

fn sentence_refs(records: &[SentenceRecord]) -> Vec<&[f64]> {
    records.iter().map(|r| r.sentence_vector.as_slice()).collect()
}

fn check_dims(records: &[SentenceRecord], dim: usize) -> Result<()> {
    match records.iter().find(|r| r.dim() != dim) {
        Some(r) => Err(Error::InvalidConfig(format!("record `{}` has dimension {}, expected {dim}", r.id, r.dim()))),
        None => Ok(()),
    }
}

fn check_coverage(records: &[SentenceRecord], registry: &ModuleRegistry) -> Result<()> {
    for r in records {
        if let Some(key) = registry.missing_module(&r.tree) {
            return Err(Error::MissingModule(key));
        }
    }
    Ok(())
}

/// End-to-end distillation of teacher sentence vectors into a module net.
///
/// Every module the training trees need is initialized up front (the
/// hashed init makes this equivalent to lazy creation on first use).
/// Sentences are visited in a seeded shuffle each epoch; gradients of
/// `accumulation` consecutive sentences are summed, computed against the
/// same parameter snapshot, and applied as one Adam step. After each
/// epoch the frozen registry is scored on `val`.
pub fn train(
    train: &[SentenceRecord],
    val: &[SentenceRecord],
    registry: Option<ModuleRegistry>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dim = train[0].dim();
    let mut registry = match registry {
        Some(r) => {
            if r.arch() != cfg.arch || r.dim() != dim {
                return Err(Error::InvalidConfig(format!(
                    "initial registry is {} D={}, run wants {} D={dim}",
                    r.arch(),
                    r.dim(),
                    cfg.arch
                )));
            }
            r
        }
        None => ModuleRegistry::new(dim, cfg.arch, cfg.seed).with_pos_layer(cfg.pos_layer),
    };
    check_dims(train, dim)?;
    check_dims(val, dim)?;
    for r in train {
        registry.ensure_tree(&r.tree)?;
    }
    check_coverage(val, &registry)?;

    let all: Vec<&[f64]> = sentence_refs(train).into_iter().chain(sentence_refs(val)).collect();
    let chance = chance_mse_vectors(&all, cfg.pair_budget, cfg.seed, cfg.execution)?;
    if chance == 0.0 {
        return Err(Error::DegenerateChance);
    }

    let mut adam = AdamState::new(cfg.adam())?;
    let mut rng = ChaCha8Rng::from_seed(derive_seed("epoch-shuffle", cfg.seed, ""));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut best_registry = registry.clone();
    let mut best_val: Option<f64> = None;

    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.accumulation) {
            let results = {
                let frozen = &registry;
                par::map(cfg.execution, chunk, |&i| sentence_gradients(&train[i], frozen))
            };
            let mut summed = Gradients::new();
            for (&i, result) in chunk.iter().zip(results) {
                let (loss, grads) = result?;
                if !loss.is_finite() || grads.iter().any(|(_, g)| !g.is_finite()) {
                    return Err(Error::NonFiniteLoss { epoch, sentence: train[i].id.clone() });
                }
                loss_sum += loss;
                summed.accumulate(&grads);
            }
            adam.step(&mut registry, &summed)?;
        }
        let losses = record_losses(val, &registry, cfg.execution)?;
        if let Some(i) = losses.iter().position(|l| !l.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch, sentence: val[i].id.clone() });
        }
        let val_mse = losses.iter().sum::<f64>() / losses.len() as f64;
        let stats = EpochStats {
            epoch,
            train_mse: loss_sum / train.len() as f64,
            val_mse,
            val_normalized: val_mse / chance,
        };
        log::info!(
            "epoch {epoch}: train_mse={:.6e} val_mse={:.6e} val_normalized={:.4}",
            stats.train_mse,
            stats.val_mse,
            stats.val_normalized
        );
        if best_val.is_none_or(|b| val_mse < b) {
            best_val = Some(val_mse);
            best_registry = registry.clone();
        }
        epochs.push(stats);
    }
    let best_epoch = TrainHistory::argmin_val(&epochs).expect("at least one epoch");
    Ok(TrainOutcome { registry, best_registry, history: TrainHistory { epochs, best_epoch, chance_mse: chance } })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mean_mse: f64,
    pub normalized: f64,
    pub chance_mse: f64,
}

/// Score a frozen registry: mean MSE and that value over chance MSE of
/// the same records.
pub fn evaluate(records: &[SentenceRecord], registry: &ModuleRegistry) -> Result<Evaluation> {
    evaluate_with(records, registry, DEFAULT_PAIR_BUDGET, 0, Execution::default())
}

pub fn evaluate_with(
    records: &[SentenceRecord],
    registry: &ModuleRegistry,
    pair_budget: usize,
    seed: u64,
    exec: Execution,
) -> Result<Evaluation> {
    check_coverage(records, registry)?;
    let mean = mean_mse(records, registry, exec)?;
    normalize(mean, records, pair_budget, seed, exec)
}

fn normalize(mean: f64, records: &[SentenceRecord], pair_budget: usize, seed: u64, exec: Execution) -> Result<Evaluation> {
    let chance = chance_mse_vectors(&sentence_refs(records), pair_budget, seed, exec)?;
    if chance == 0.0 {
        return Err(Error::DegenerateChance);
    }
    Ok(Evaluation { mean_mse: mean, normalized: mean / chance, chance_mse: chance })
}

/// Diagnostic baseline: predict the mean sentence vector for every record.
/// Under all-pairs chance MSE this scores exactly `(n-1)/(2n)`.
pub fn evaluate_mean_predictor(records: &[SentenceRecord], pair_budget: usize) -> Result<Evaluation> {
    if records.len() < 2 {
        return Err(Error::TooFewRecords(records.len()));
    }
    let d = records[0].dim();
    let mut mean = vec![0.0; d];
    for r in records {
        for (m, v) in mean.iter_mut().zip(r.sentence_vector.as_slice()) {
            *m += v;
        }
    }
    let n = records.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    let mse = records.iter().map(|r| mse_value(&mean, r.sentence_vector.as_slice())).sum::<f64>() / n;
    normalize(mse, records, pair_budget, 0, Execution::default())
}

/// Mean of `vectors` as a row tensor.
pub fn mean_vector(vectors: &[&Tensor]) -> Tensor {
    let d = vectors.first().map_or(0, |v| v.len());
    let mut out = Tensor::zeros(1, d);
    for v in vectors {
        out.add_assign(v);
    }
    out.scale(1.0 / vectors.len().max(1) as f64);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::parse_tree;

    fn record(id: &str, tree: &str, d: usize, salt: f64) -> SentenceRecord {
        let tree = parse_tree(tree).unwrap();
        let words = (0..tree.leaf_count())
            .map(|i| Tensor::row((0..d).map(|j| ((i * d + j) as f64 + salt).sin()).collect()))
            .collect();
        let sent = Tensor::row((0..d).map(|j| (j as f64 * salt).cos()).collect());
        SentenceRecord::new(id, tree, words, sent).unwrap()
    }

    fn toy() -> (Vec<SentenceRecord>, Vec<SentenceRecord>) {
        let trees = [
            "(S (NP (DT the) (NN dog)) (VP (VBZ runs)))",
            "(S (NP (DT a) (NN cat)) (VP (VBZ sleeps)))",
            "(S (NP (NN dogs)) (VP (VBZ run)))",
            "(S (NP (DT the) (NN cat)) (VP (VBZ runs)))",
        ];
        let recs: Vec<_> = trees.iter().enumerate().map(|(i, t)| record(&i.to_string(), t, 3, i as f64 + 0.3)).collect();
        (recs[..3].to_vec(), recs[3..].to_vec())
    }

    #[test]
    fn zero_learning_rate_matches_fresh_registry() {
        let (tr, va) = toy();
        let cfg = TrainConfig { lr: 0.0, epochs: 1, seed: 3, ..Default::default() };
        let out = train(&tr, &va, None, &cfg).unwrap();
        let mut fresh = ModuleRegistry::new(3, Architecture::Linear, 3);
        for r in &tr {
            fresh.ensure_tree(&r.tree).unwrap();
        }
        assert_eq!(out.registry, fresh);
        let expected = mean_mse(&va, &fresh, Execution::Sequential).unwrap();
        assert_eq!(out.history.epochs[0].val_mse, expected);
    }

    #[test]
    fn deterministic_replay() {
        let (tr, va) = toy();
        let cfg = TrainConfig { lr: 1e-2, epochs: 5, accumulation: 2, seed: 9, ..Default::default() };
        let a = train(&tr, &va, None, &cfg).unwrap();
        let b = train(&tr, &va, None, &TrainConfig { execution: Execution::Sequential, ..cfg.clone() }).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.registry, b.registry);
    }

    #[test]
    fn normalized_is_ratio_each_epoch() {
        let (tr, va) = toy();
        let cfg = TrainConfig { lr: 1e-2, epochs: 4, ..Default::default() };
        let out = train(&tr, &va, None, &cfg).unwrap();
        for e in &out.history.epochs {
            assert_eq!(e.val_normalized, e.val_mse / out.history.chance_mse);
        }
        let best = out.history.best();
        assert!(out.history.epochs.iter().all(|e| e.val_mse >= best.val_mse));
        let rescored = mean_mse(&va, &out.best_registry, Execution::Sequential).unwrap();
        assert_eq!(rescored, best.val_mse);
    }

    #[test]
    fn unseen_validation_rule_is_missing_module() {
        let (tr, _) = toy();
        let va = vec![record("x", "(S (NP (JJ big) (NN dog)) (VP (VBZ runs)))", 3, 0.1)];
        let err = train(&tr, &va, None, &TrainConfig { epochs: 1, ..Default::default() }).unwrap_err();
        assert!(matches!(err, Error::MissingModule(ref k) if k == "JJ" || k == "NP -> JJ NN"), "{err}");
    }

    #[test]
    fn divergence_is_reported() {
        let (mut tr, va) = toy();
        for w in tr[0].word_vectors.iter_mut() {
            w.as_mut_slice().iter_mut().for_each(|v| *v = 1e200);
        }
        let err = train(&tr, &va, None, &TrainConfig { epochs: 1, shuffle: false, ..Default::default() }).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { epoch: 1, ref sentence } if sentence == "0"), "{err}");
    }

    #[test]
    fn best_epoch_ties_go_first() {
        let mk = |epoch, val_mse| EpochStats { epoch, train_mse: 0.0, val_mse, val_normalized: 0.0 };
        let epochs = [mk(1, 3.0), mk(2, 1.0), mk(3, 1.0), mk(4, 2.0)];
        assert_eq!(TrainHistory::argmin_val(&epochs), Some(1));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { epochs: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { accumulation: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { lr: -1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn degenerate_chance_in_evaluate() {
        let mut recs = toy().0;
        for r in recs.iter_mut() {
            r.sentence_vector = Tensor::row(vec![1.0, 1.0, 1.0]);
        }
        let mut reg = ModuleRegistry::new(3, Architecture::Linear, 0);
        for r in &recs {
            reg.ensure_tree(&r.tree).unwrap();
        }
        assert!(matches!(evaluate(&recs, &reg), Err(Error::DegenerateChance)));
    }
}
