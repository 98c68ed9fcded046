mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use synnamon::autodiff::Tensor;
use synnamon::modnet::{load_checkpoint, save_checkpoint, slot, Architecture, ModuleRegistry};
use synnamon::synth::random_toy_tree;
use synnamon::treebank::{parse_tree, SyntaxTree};

fn words(t: &SyntaxTree, d: usize, salt: f64) -> Vec<Tensor> {
    (0..t.leaf_count()).map(|i| Tensor::row((0..d).map(|j| ((i * d + j) as f64 + salt).sin()).collect())).collect()
}

fn arch() -> impl Strategy<Value = Architecture> {
    prop::sample::select(Architecture::ALL.to_vec())
}

proptest! {
    #[test]
    fn root_is_always_a_d_row(t in common::tree(), a in arch(), d in 1usize..5) {
        let mut reg = ModuleRegistry::new(d, a, 3);
        reg.ensure_tree(&t).unwrap();
        prop_assert_eq!(reg.embed(&t, &words(&t, d, 0.5)).unwrap().shape(), (1, d));
    }

    #[test]
    fn linear_zero_bias_network_is_linear_in_words(
        t in common::tree(), alpha in -2.0f64..2.0, beta in -2.0f64..2.0
    ) {
        let d = 3;
        let mut reg = ModuleRegistry::new(d, Architecture::Linear, 1);
        reg.ensure_tree(&t).unwrap();
        let (u, v) = (words(&t, d, 0.1), words(&t, d, 2.7));
        let mix: Vec<Tensor> = u
            .iter()
            .zip(&v)
            .map(|(a, b)| Tensor::row(a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| alpha * x + beta * y).collect()))
            .collect();
        let (fu, fv, fm) = (reg.embed(&t, &u).unwrap(), reg.embed(&t, &v).unwrap(), reg.embed(&t, &mix).unwrap());
        for k in 0..d {
            let expected = alpha * fu.as_slice()[k] + beta * fv.as_slice()[k];
            prop_assert!((fm.as_slice()[k] - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn module_init_ignores_corpus_order(seed in any::<u64>(), a in arch()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees: Vec<_> = (0..8).map(|_| random_toy_tree(&mut rng, 1)).collect();
        let mut forward = ModuleRegistry::new(2, a, seed);
        let mut backward = ModuleRegistry::new(2, a, seed);
        trees.iter().for_each(|t| forward.ensure_tree(t).unwrap());
        trees.iter().rev().for_each(|t| backward.ensure_tree(t).unwrap());
        prop_assert_eq!(&forward, &backward);

        let expected: BTreeSet<String> = trees
            .iter()
            .flat_map(|t| t.productions().into_iter().map(|r| r.to_string()).chain(t.pos_tags()))
            .collect();
        let keys: BTreeSet<String> = forward.keys().into_iter().map(str::to_string).collect();
        prop_assert_eq!(keys, expected);
    }

    #[test]
    fn checkpoint_round_trip_preserves_predictions(seed in any::<u64>(), a in arch(), pos in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees: Vec<_> = (0..5).map(|_| random_toy_tree(&mut rng, 2)).collect();
        let mut reg = ModuleRegistry::new(3, a, seed).with_pos_layer(pos);
        trees.iter().for_each(|t| reg.ensure_tree(t).unwrap());
        let mut buf = Vec::new();
        save_checkpoint(&reg, &mut buf).unwrap();
        let back = load_checkpoint(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &reg);
        for t in &trees {
            let w = words(t, 3, 1.0);
            prop_assert_eq!(back.embed(t, &w).unwrap(), reg.embed(t, &w).unwrap());
        }
    }
}

#[test]
fn leftmost_selection_reaches_first_word() {
    let d = 3;
    let tree = parse_tree("(S (NP (DT the) (NN dog)) (VP (VBZ runs)))").unwrap();
    let mut reg = ModuleRegistry::new(d, Architecture::Linear, 0);
    reg.ensure_tree(&tree).unwrap();
    for key in reg.keys().into_iter().map(str::to_string).collect::<Vec<_>>() {
        let m = reg.get_mut(&key).unwrap();
        let mut w = Tensor::zeros(d, m.fan_in() * d);
        (0..d).for_each(|i| w.set(i, i, 1.0));
        m.set_tensor(slot::W1, w).unwrap();
    }
    let w = words(&tree, d, 0.3);
    assert_eq!(reg.embed(&tree, &w).unwrap(), w[0]);
}

#[test]
fn strict_composition_names_missing_rule() {
    let tree = parse_tree("(S (NP (DT the) (NN dog)) (VP (VBZ runs)))").unwrap();
    let mut reg = ModuleRegistry::new(2, Architecture::Linear, 0);
    reg.ensure_tree(&parse_tree("(S (NP (DT a) (NN cat)) (VP (VBZ sees) (NP (DT a) (NN dog))))").unwrap()).unwrap();
    match reg.embed(&tree, &words(&tree, 2, 0.0)) {
        Err(synnamon::Error::MissingModule(k)) => assert_eq!(k, "VP -> VBZ"),
        other => panic!("{other:?}"),
    }
}
