use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{HeightConvention, ProductionRule, SyntaxTree};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CorpusFilterConfig {
    pub allowed_heights: BTreeSet<usize>,
    pub top_k_rules: usize,
    #[serde(default)]
    pub height_convention: HeightConvention,
}

impl Default for CorpusFilterConfig {
    fn default() -> Self {
        Self {
            allowed_heights: [4, 5].into_iter().collect(),
            top_k_rules: 300,
            height_convention: HeightConvention::Nodes,
        }
    }
}

impl CorpusFilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.allowed_heights.is_empty() || self.allowed_heights.contains(&0) {
            return Err(Error::InvalidConfig("allowed heights must be non-empty and positive".into()));
        }
        if self.top_k_rules == 0 {
            return Err(Error::InvalidConfig("top_k_rules must be at least 1".into()));
        }
        Ok(())
    }
}

/// Options for reading treebank files.
#[derive(Debug, Clone, Copy)]
pub struct ReadOptions {
    /// Strip PTB function tags and drop `-NONE-` elements.
    pub normalize: bool,
}

impl Default for ReadOptions {
    fn default() -> Self {
        Self { normalize: true }
    }
}

/// Parse a treebank: one tree per line, `#` comments and blank lines skipped.
pub fn parse_treebank(text: &str, opts: ReadOptions) -> Result<Vec<SyntaxTree>> {
    parse_lines(text.lines().map(|l| Ok(l.to_string())), opts)
}

pub fn read_treebank(path: impl AsRef<Path>, opts: ReadOptions) -> Result<Vec<SyntaxTree>> {
    let file = std::fs::File::open(path)?;
    parse_lines(BufReader::new(file).lines(), opts)
}

fn parse_lines(
    lines: impl Iterator<Item = std::io::Result<String>>,
    opts: ReadOptions,
) -> Result<Vec<SyntaxTree>> {
    let mut out = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tree = super::parse_tree(trimmed).map_err(|source| Error::TreebankLine { line: idx + 1, source })?;
        if opts.normalize {
            match tree.normalize_ptb() {
                Some(t) => out.push(t),
                None => log::warn!("line {}: tree is empty after normalization, skipped", idx + 1),
            }
        } else {
            out.push(tree);
        }
    }
    Ok(out)
}

pub fn write_treebank<W: Write>(mut out: W, trees: &[SyntaxTree]) -> Result<()> {
    for t in trees {
        writeln!(out, "{t}")?;
    }
    out.flush()?;
    Ok(())
}

/// Production frequencies over a corpus, most frequent first; ties are
/// ordered by the canonical rule string.
pub fn rule_frequencies(corpus: &[SyntaxTree]) -> Vec<(ProductionRule, usize)> {
    let mut counts: HashMap<ProductionRule, usize> = HashMap::new();
    for tree in corpus {
        for rule in tree.productions() {
            *counts.entry(rule).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, ProductionRule, usize)> =
        counts.into_iter().map(|(r, c)| (r.to_string(), r, c)).collect();
    ranked.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
    ranked.into_iter().map(|(_, r, c)| (r, c)).collect()
}

/// The `k` most frequent productions in `corpus`.
pub fn select_top_rules(corpus: &[SyntaxTree], k: usize) -> BTreeSet<ProductionRule> {
    rule_frequencies(corpus).into_iter().take(k).map(|(r, _)| r).collect()
}

/// Keep trees whose height is allowed, then keep only those survivors
/// whose productions all lie among the top-k rules of the survivors.
pub fn filter_corpus(corpus: &[SyntaxTree], cfg: &CorpusFilterConfig) -> Result<Vec<SyntaxTree>> {
    cfg.validate()?;
    let by_height: Vec<SyntaxTree> = corpus
        .iter()
        .filter(|t| cfg.allowed_heights.contains(&t.height(cfg.height_convention)))
        .cloned()
        .collect();
    let top = select_top_rules(&by_height, cfg.top_k_rules);
    let kept: Vec<SyntaxTree> = by_height
        .into_iter()
        .filter(|t| t.productions().iter().all(|r| top.contains(r)))
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyResult);
    }
    Ok(kept)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Item {
    Rule(ProductionRule),
    Pos(String),
}

fn items(tree: &SyntaxTree) -> BTreeSet<Item> {
    let (rules, tags) = tree.extract_productions();
    rules.into_iter().map(Item::Rule).chain(tags.into_iter().map(Item::Pos)).collect()
}

/// Index-level result of a coverage-preserving split. Indices are in
/// ascending corpus order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    /// Validation size that was asked for.
    pub requested_val: usize,
}

impl SplitPlan {
    /// True when coverage prevented reaching the requested validation size.
    pub fn is_short(&self) -> bool {
        self.val.len() < self.requested_val
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<SyntaxTree>,
    pub val: Vec<SyntaxTree>,
    pub requested_val: usize,
}

impl Split {
    pub fn is_short(&self) -> bool {
        self.val.len() < self.requested_val
    }
}

/// Seeded split in which every production and POS tag of the validation
/// trees also occurs in some training tree.
///
/// Trees are visited in seeded shuffle order and moved to validation
/// unless that would remove the last training occurrence of one of their
/// productions or tags. If coverage caps the validation set below the
/// requested size, the largest set found is returned and a warning logged.
pub fn split_indices(corpus: &[SyntaxTree], val_fraction: f64, seed: u64) -> Result<SplitPlan> {
    if corpus.len() < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 trees to split, got {}", corpus.len())));
    }
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("val_fraction must lie in (0,1), got {val_fraction}")));
    }
    let n = corpus.len();
    let requested = ((val_fraction * n as f64).round() as usize).clamp(1, n - 1);

    let tree_items: Vec<BTreeSet<Item>> = corpus.iter().map(items).collect();
    let mut train_count: HashMap<&Item, usize> = HashMap::new();
    for set in &tree_items {
        for it in set {
            *train_count.entry(it).or_default() += 1;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut in_val = vec![false; n];
    let mut taken = 0;
    for &i in &order {
        if taken == requested {
            break;
        }
        if tree_items[i].iter().all(|it| train_count[it] >= 2) {
            for it in &tree_items[i] {
                *train_count.get_mut(it).expect("counted above") -= 1;
            }
            in_val[i] = true;
            taken += 1;
        }
    }
    if taken < requested {
        log::warn!("coverage constraint limits validation split to {taken} of {requested} requested trees");
    }
    let (val, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| in_val[i]);
    Ok(SplitPlan { train, val, requested_val: requested })
}

pub fn split_corpus(corpus: &[SyntaxTree], val_fraction: f64, seed: u64) -> Result<Split> {
    let plan = split_indices(corpus, val_fraction, seed)?;
    Ok(Split {
        train: plan.train.iter().map(|&i| corpus[i].clone()).collect(),
        val: plan.val.iter().map(|&i| corpus[i].clone()).collect(),
        requested_val: plan.requested_val,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::parse_tree;

    const S_TREE: &str = "(S (NP (DT the) (NN dog)) (VP (VBZ runs)))";

    fn t(s: &str) -> SyntaxTree {
        parse_tree(s).unwrap()
    }

    #[test]
    fn treebank_text_skips_comments_and_blanks() {
        let text = format!("# header\n\n{S_TREE}\n   \n(NN dog)\n");
        let trees = parse_treebank(&text, ReadOptions::default()).unwrap();
        assert_eq!(trees.len(), 2);
        let err = parse_treebank("(NN dog)\n(S (NN", ReadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::TreebankLine { line: 2, .. }));
    }

    #[test]
    fn frequencies_break_ties_lexicographically() {
        let corpus = [t("(S (B (X b)) (A (X a)))"), t("(S (A (X a)) (B (X b)))")];
        let freq = rule_frequencies(&corpus);
        let text: Vec<_> = freq.iter().map(|(r, c)| format!("{r}:{c}")).collect();
        assert_eq!(text, ["A -> X:2", "B -> X:2", "S -> A B:1", "S -> B A:1"]);
        let top: Vec<_> = select_top_rules(&corpus, 3).iter().map(|r| r.to_string()).collect();
        assert_eq!(top, ["A -> X", "B -> X", "S -> A B"]);
    }

    #[test]
    fn filter_single_tree() {
        let corpus = [t(S_TREE)];
        assert_eq!(filter_corpus(&corpus, &CorpusFilterConfig::default()).unwrap(), corpus);
        let cfg = CorpusFilterConfig { allowed_heights: [5].into(), ..Default::default() };
        assert!(matches!(filter_corpus(&corpus, &cfg), Err(Error::EmptyResult)));
        let cfg = CorpusFilterConfig {
            allowed_heights: [3].into(),
            height_convention: HeightConvention::Edges,
            ..Default::default()
        };
        assert_eq!(filter_corpus(&corpus, &cfg).unwrap().len(), 1);
    }

    #[test]
    fn filter_drops_trees_with_rare_rules() {
        let corpus = [
            t("(S (NP (DT a) (NN b)) (VP (VBZ c)))"),
            t("(S (NP (DT a) (NN b)) (VP (VBZ c)))"),
            t("(S (NP (NN b)) (VP (VBZ c)))"),
        ];
        let cfg = CorpusFilterConfig { top_k_rules: 3, ..Default::default() };
        let kept = filter_corpus(&corpus, &cfg).unwrap();
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn invalid_filter_config() {
        let cfg = CorpusFilterConfig { top_k_rules: 0, ..Default::default() };
        assert!(filter_corpus(&[t(S_TREE)], &cfg).is_err());
    }

    #[test]
    fn identical_trees_split_evenly() {
        let corpus = [t(S_TREE), t(S_TREE)];
        let split = split_corpus(&corpus, 0.5, 3).unwrap();
        assert_eq!((split.train.len(), split.val.len()), (1, 1));
        assert!(!split.is_short());
    }

    #[test]
    fn unique_rule_forces_tree_into_train() {
        let a = t(S_TREE);
        let b = t("(NP (DT the) (NN dog))");
        for seed in 0..20 {
            let split = split_corpus(&[a.clone(), b.clone()], 0.5, seed).unwrap();
            assert_eq!(split.train, std::slice::from_ref(&a));
            assert_eq!(split.val, std::slice::from_ref(&b));
        }
    }

    #[test]
    fn infeasible_split_degrades() {
        let corpus = [t("(A (X a))"), t("(B (Y b))")];
        let plan = split_indices(&corpus, 0.5, 0).unwrap();
        assert!(plan.val.is_empty());
        assert!(plan.is_short());
        assert_eq!(plan.train, [0, 1]);
    }

    #[test]
    fn split_rejects_bad_arguments() {
        assert!(split_indices(&[t(S_TREE)], 0.5, 0).is_err());
        assert!(split_indices(&[t(S_TREE), t(S_TREE)], 1.0, 0).is_err());
        assert!(split_indices(&[t(S_TREE), t(S_TREE)], 0.0, 0).is_err());
    }
}
