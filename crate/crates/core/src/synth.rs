//! Synthetic corpora with known teachers, for tests, benches and the
//! `synth` command.

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{Category, Lexicon, PhrasePair};
use crate::autodiff::Tensor;
use crate::distill::SentenceRecord;
use crate::error::Result;
use crate::modnet::{derive_seed, required_modules, Architecture, ModuleParams, ModuleRegistry};
use crate::treebank::{split_indices, ProductionRule, SyntaxTree};

/// The toy grammar's productions.
pub const TOY_RULES: [&str; 8] = [
    "S -> NP VP",
    "NP -> DT NN",
    "NP -> DT JJ NN",
    "NP -> NP PP",
    "VP -> VBZ NP",
    "VP -> VBZ",
    "VP -> VP PP",
    "PP -> IN NP",
];

const DT: [&str; 4] = ["the", "a", "every", "this"];
const NN: [&str; 8] = ["dog", "cat", "bird", "river", "house", "idea", "tree", "cow"];
const JJ: [&str; 5] = ["red", "large", "happy", "old", "quiet"];
const VBZ: [&str; 5] = ["sees", "likes", "runs", "sleeps", "finds"];
const IN: [&str; 4] = ["near", "under", "with", "behind"];

pub fn toy_rules() -> Vec<ProductionRule> {
    TOY_RULES.iter().map(|r| r.parse().expect("valid rule")).collect()
}

fn pick<'a>(rng: &mut impl Rng, words: &[&'a str]) -> &'a str {
    words[rng.gen_range(0..words.len())]
}

fn pre(rng: &mut impl Rng, tag: &str, words: &[&str]) -> SyntaxTree {
    SyntaxTree::preterminal(tag, pick(rng, words)).expect("valid preterminal")
}

fn phrase(label: &str, children: Vec<SyntaxTree>) -> SyntaxTree {
    SyntaxTree::phrase(label, children).expect("non-empty children")
}

fn toy_np(rng: &mut impl Rng, depth: usize) -> SyntaxTree {
    let r: f64 = rng.gen();
    if depth > 0 && r < 0.2 {
        phrase("NP", vec![toy_np(rng, depth - 1), toy_pp(rng, depth - 1)])
    } else if r < 0.55 {
        phrase("NP", vec![pre(rng, "DT", &DT), pre(rng, "JJ", &JJ), pre(rng, "NN", &NN)])
    } else {
        phrase("NP", vec![pre(rng, "DT", &DT), pre(rng, "NN", &NN)])
    }
}

fn toy_pp(rng: &mut impl Rng, depth: usize) -> SyntaxTree {
    phrase("PP", vec![pre(rng, "IN", &IN), toy_np(rng, depth)])
}

fn toy_vp(rng: &mut impl Rng, depth: usize) -> SyntaxTree {
    let r: f64 = rng.gen();
    if depth > 0 && r < 0.2 {
        phrase("VP", vec![toy_vp(rng, depth - 1), toy_pp(rng, depth - 1)])
    } else if r < 0.6 {
        phrase("VP", vec![pre(rng, "VBZ", &VBZ), toy_np(rng, depth)])
    } else {
        phrase("VP", vec![pre(rng, "VBZ", &VBZ)])
    }
}

/// A sentence of the toy grammar with at most `depth` levels of NP/VP
/// recursion.
pub fn random_toy_tree(rng: &mut impl Rng, depth: usize) -> SyntaxTree {
    phrase("S", vec![toy_np(rng, depth), toy_vp(rng, depth)])
}

const LABELS: [&str; 7] = ["S", "NP", "VP", "PP", "ADJP", "SBAR", "X"];
const TAGS: [&str; 9] = ["DT", "NN", "NNS", "VBZ", "IN", "JJ", "PRP$", ",", "."];
const WORDS: [&str; 12] = ["the", "dog", "don't", "$", "3.14", "U.S.", "--", "a-b", "x=y", "é", "#1", "runs"];

/// An arbitrary well-formed tree: phrase nodes with 1 to `max_arity`
/// children, preterminals forced at `depth` 0.
pub fn random_tree(rng: &mut impl Rng, depth: usize, max_arity: usize) -> SyntaxTree {
    if depth == 0 || rng.gen_bool(0.3) {
        return SyntaxTree::preterminal(pick(rng, &TAGS), pick(rng, &WORDS)).expect("valid preterminal");
    }
    let n = rng.gen_range(1..=max_arity.max(1));
    let children = (0..n).map(|_| random_tree(rng, depth - 1, max_arity)).collect();
    phrase(pick(rng, &LABELS), children)
}

fn uniform_tensor(rng: &mut impl Rng, rows: usize, cols: usize, bound: f64) -> Tensor {
    let dist = Uniform::new_inclusive(-bound, bound);
    Tensor::new(rows, cols, (0..rows * cols).map(|_| dist.sample(rng)).collect()).expect("finite samples")
}

/// Seeded word embedding with unit per-coordinate variance.
pub fn word_vector(word: &str, dim: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::from_seed(derive_seed("synth-word", seed, word));
    uniform_tensor(&mut rng, 1, dim, 3f64.sqrt())
}

/// A random teacher module scaled so a unit-variance input yields
/// roughly unit-variance output, with small nonzero biases.
pub fn teacher_module(key: &str, fan_in: usize, arch: Architecture, dim: usize, seed: u64) -> ModuleParams {
    let mut rng = ChaCha8Rng::from_seed(derive_seed("synth-teacher", seed, key));
    let gain = if arch == Architecture::Linear { 1.0 } else { 2.0 };
    let w1 = uniform_tensor(&mut rng, dim, fan_in * dim, (3.0 * gain / (fan_in * dim) as f64).sqrt());
    let b1 = uniform_tensor(&mut rng, 1, dim, 0.1);
    let second = arch
        .has_second_layer()
        .then(|| (uniform_tensor(&mut rng, dim, dim, (3.0 / dim as f64).sqrt()), uniform_tensor(&mut rng, 1, dim, 0.1)));
    ModuleParams::from_parts(key, arch, fan_in, dim, w1, b1, second).expect("consistent shapes")
}

/// Teacher covering every module the given trees use.
pub fn teacher_registry<'a>(
    trees: impl IntoIterator<Item = &'a SyntaxTree>,
    arch: Architecture,
    dim: usize,
    seed: u64,
) -> ModuleRegistry {
    let mut reg = ModuleRegistry::new(dim, arch, seed);
    for t in trees {
        for (key, fan_in) in required_modules(t, true) {
            if !reg.contains(&key) {
                reg.insert(teacher_module(&key, fan_in, arch, dim, seed)).expect("matching registry");
            }
        }
    }
    reg
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub trees: usize,
    pub dim: usize,
    pub teacher: Architecture,
    pub depth: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { trees: 200, dim: 16, teacher: Architecture::Linear, depth: 2, val_fraction: 0.163, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub train: Vec<SentenceRecord>,
    pub val: Vec<SentenceRecord>,
    pub teacher: ModuleRegistry,
}

/// Toy-grammar sentences labelled by a random teacher, split so every
/// validation rule and tag also occurs in training.
pub fn synth_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    let mut rng = ChaCha8Rng::from_seed(derive_seed("synth-trees", cfg.seed, ""));
    let trees: Vec<SyntaxTree> = (0..cfg.trees).map(|_| random_toy_tree(&mut rng, cfg.depth)).collect();
    let teacher = teacher_registry(&trees, cfg.teacher, cfg.dim, cfg.seed);
    let records = trees
        .into_iter()
        .enumerate()
        .map(|(i, tree)| {
            let words: Vec<Tensor> = tree.leaves().iter().map(|w| word_vector(w, cfg.dim, cfg.seed)).collect();
            let sent = teacher.embed(&tree, &words)?;
            SentenceRecord::new(format!("synth-{i}"), tree, words, sent)
        })
        .collect::<Result<Vec<_>>>()?;
    let plan = split_indices(&records.iter().map(|r| r.tree.clone()).collect::<Vec<_>>(), cfg.val_fraction, cfg.seed)?;
    let take = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect();
    Ok(SynthCorpus { train: take(&plan.train), val: take(&plan.val), teacher })
}

/// Probe pairs for every lexicon phrase with a linear phrase teacher
/// `phrase = A·first + B·second`.
pub fn synth_probe_pairs(lexicon: &Lexicon, dim: usize, seed: u64) -> Vec<PhrasePair> {
    let mut rng = ChaCha8Rng::from_seed(derive_seed("synth-probe", seed, ""));
    let bound = (1.5 / dim as f64).sqrt();
    let a = uniform_tensor(&mut rng, dim, dim, bound);
    let b = uniform_tensor(&mut rng, dim, dim, bound);
    let apply = |m: &Tensor, v: &Tensor, out: &mut [f64]| {
        for (r, o) in out.iter_mut().enumerate() {
            *o += (0..dim).map(|c| m.get(r, c) * v.as_slice()[c]).sum::<f64>();
        }
    };
    let mut out = Vec::new();
    for category in Category::ALL {
        for (first, second) in lexicon.phrases(category) {
            let fv = word_vector(&first, dim, seed);
            let sv = word_vector(&second, dim, seed);
            let mut p = vec![0.0; dim];
            apply(&a, &fv, &mut p);
            apply(&b, &sv, &mut p);
            out.push(PhrasePair {
                first_word: first,
                second_word: second,
                category,
                first_vec: fv,
                second_vec: sv,
                phrase_vec: Tensor::row(p),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn toy_trees_use_only_toy_rules() {
        let rules: BTreeSet<_> = toy_rules().into_iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = BTreeSet::new();
        for _ in 0..300 {
            for r in random_toy_tree(&mut rng, 2).productions() {
                assert!(rules.contains(&r), "{r}");
                seen.insert(r);
            }
        }
        assert_eq!(seen, rules);
    }

    #[test]
    fn corpus_is_deterministic_and_covered() {
        let cfg = SynthConfig { trees: 40, dim: 4, ..Default::default() };
        let a = synth_corpus(&cfg).unwrap();
        let b = synth_corpus(&cfg).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.val, b.val);
        assert_eq!(a.train.len() + a.val.len(), 40);
        let train_rules: BTreeSet<_> = a.train.iter().flat_map(|r| r.tree.productions()).collect();
        for r in &a.val {
            assert!(r.tree.productions().iter().all(|p| train_rules.contains(p)));
        }
    }

    #[test]
    fn teacher_labels_are_reproduced() {
        let cfg = SynthConfig { trees: 10, dim: 3, teacher: Architecture::Double, ..Default::default() };
        let c = synth_corpus(&cfg).unwrap();
        for r in c.train.iter().chain(&c.val) {
            assert_eq!(c.teacher.embed(&r.tree, &r.word_vectors).unwrap(), r.sentence_vector);
        }
    }

    #[test]
    fn random_trees_respect_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let t = random_tree(&mut rng, 3, 3);
            assert!(t.height(crate::treebank::HeightConvention::Nodes) <= 5);
        }
    }
}
