mod common;

use proptest::prelude::*;
use synnamon::autodiff::{mse_value, AdamConfig, AdamState, Gradients, Tensor};
use synnamon::distill::{
    chance_mse, evaluate, evaluate_mean_predictor, parse_dataset, sentence_gradients, train, write_dataset,
    SentenceRecord, TrainConfig,
};
use synnamon::modnet::{Architecture, ModuleRegistry};
use synnamon::par::Execution;
use synnamon::synth::{synth_corpus, SynthConfig};
use synnamon::treebank::parse_tree;

/// Independent all-pairs chance: sum of squared coordinate differences
/// over ordered pairs i != j, divided by n(n-1)·D.
fn brute_chance(v: &[Vec<f64>]) -> f64 {
    let (n, d) = (v.len(), v[0].len());
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += v[i].iter().zip(&v[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            }
        }
    }
    s / (n * (n - 1) * d) as f64
}

fn records_from(vectors: &[Vec<f64>]) -> Vec<SentenceRecord> {
    let tree = parse_tree("(NN x)").unwrap();
    vectors
        .iter()
        .enumerate()
        .map(|(i, v)| SentenceRecord::new(i.to_string(), tree.clone(), vec![Tensor::zeros(1, v.len())], Tensor::row(v.clone())).unwrap())
        .collect()
}

fn vectors(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(common::row(d), n)
}

proptest! {
    #[test]
    fn chance_matches_brute_force(v in (2usize..30, 1usize..6).prop_flat_map(|(n, d)| vectors(n, d))) {
        let got = chance_mse(&records_from(&v), usize::MAX, 0).unwrap();
        prop_assert!((got - brute_chance(&v)).abs() <= 1e-12 * got.max(1.0));
    }

    #[test]
    fn mean_predictor_identity(v in (2usize..40, 1usize..5).prop_flat_map(|(n, d)| vectors(n, d))) {
        let recs = records_from(&v);
        if let Ok(e) = evaluate_mean_predictor(&recs, usize::MAX) {
            let n = v.len() as f64;
            prop_assert!((e.normalized - (n - 1.0) / (2.0 * n)).abs() < 1e-9);
        }
    }

    #[test]
    fn normalized_score_ignores_mean_versus_sum(
        v in (3usize..20, 1usize..6).prop_flat_map(|(n, d)| vectors(n, d)), shift in common::row(1)
    ) {
        let recs = records_from(&v);
        let pred: Vec<Vec<f64>> = v.iter().map(|x| x.iter().map(|a| a * 0.7 + shift[0]).collect()).collect();
        let d = v[0].len() as f64;
        let n = v.len();
        let mean_conv = pred.iter().zip(&v).map(|(p, t)| mse_value(p, t)).sum::<f64>() / n as f64
            / chance_mse(&recs, usize::MAX, 0).unwrap();
        let sum_sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        let num = pred.iter().zip(&v).map(|(p, t)| sum_sq(p, t)).sum::<f64>() / n as f64;
        let den = brute_chance(&v) * d;
        prop_assert!((mean_conv - num / den).abs() < 1e-12 * mean_conv.abs().max(1.0));
    }

    #[test]
    fn dataset_round_trip(v in (1usize..6, 1usize..4).prop_flat_map(|(n, d)| vectors(n, d))) {
        let recs = records_from(&v);
        let mut buf = Vec::new();
        write_dataset(&mut buf, &recs).unwrap();
        prop_assert_eq!(parse_dataset(buf.as_slice()).unwrap(), recs);
    }
}

#[test]
fn two_points_chance() {
    assert_eq!(chance_mse(&records_from(&[vec![0.0, 0.0], vec![2.0, 2.0]]), 10, 0).unwrap(), 4.0);
}

#[test]
fn mean_predictor_identity_at_criterion_sizes() {
    for n in [3usize, 10, 100] {
        for d in [2usize, 16] {
            let v: Vec<Vec<f64>> = (0..n).map(|i| (0..d).map(|j| ((i * 31 + j * 7) as f64).sin() * 3.0).collect()).collect();
            let e = evaluate_mean_predictor(&records_from(&v), usize::MAX).unwrap();
            assert!((e.chance_mse - brute_chance(&v)).abs() < 1e-12);
            assert!((e.normalized - (n as f64 - 1.0) / (2.0 * n as f64)).abs() < 1e-9, "n={n} d={d}");
        }
    }
}

fn small_corpus(teacher: Architecture) -> synnamon::synth::SynthCorpus {
    synth_corpus(&SynthConfig { trees: 30, dim: 4, teacher, ..Default::default() }).unwrap()
}

#[test]
fn teacher_scores_zero() {
    let c = small_corpus(Architecture::Linear);
    let e = evaluate(&c.val, &c.teacher).unwrap();
    assert!(e.mean_mse < 1e-20, "{}", e.mean_mse);
}

#[test]
fn accumulated_step_equals_single_summed_step() {
    let c = small_corpus(Architecture::Linear);
    let k = 4;
    let chunk = &c.train[..k];
    let cfg = TrainConfig { lr: 1e-2, epochs: 1, accumulation: k, shuffle: false, seed: 5, ..Default::default() };
    let trained = train(chunk, &c.train[..1], None, &cfg).unwrap();

    let mut reg = ModuleRegistry::new(4, Architecture::Linear, 5);
    chunk.iter().for_each(|r| reg.ensure_tree(&r.tree).unwrap());
    let mut total = Gradients::new();
    for r in chunk {
        total.accumulate(&sentence_gradients(r, &reg).unwrap().1);
    }
    let mut adam = AdamState::new(AdamConfig::with_lr(1e-2)).unwrap();
    adam.step(&mut reg, &total).unwrap();
    assert_eq!(trained.registry, reg);
}

#[test]
fn parallel_and_sequential_training_agree_bitwise() {
    let c = small_corpus(Architecture::Double);
    let base = TrainConfig { arch: Architecture::Nonlin, lr: 1e-3, epochs: 3, accumulation: 3, seed: 2, ..Default::default() };
    let seq = train(&c.train, &c.val, None, &TrainConfig { execution: Execution::Sequential, ..base.clone() }).unwrap();
    let par = train(&c.train, &c.val, None, &TrainConfig { execution: Execution::Parallel, ..base }).unwrap();
    assert_eq!(seq.history, par.history);
    assert_eq!(seq.registry, par.registry);
}

#[test]
fn sampled_chance_uses_budget() {
    let v: Vec<Vec<f64>> = (0..200).map(|i| vec![(i as f64).sin(), (i as f64 * 0.3).cos()]).collect();
    let recs = records_from(&v);
    let exact = chance_mse(&recs, usize::MAX, 0).unwrap();
    let sampled = chance_mse(&recs, 5000, 1).unwrap();
    assert_ne!(exact, sampled);
    assert!((exact - sampled).abs() / exact < 0.05);
    assert_eq!(sampled, chance_mse(&recs, 5000, 1).unwrap());
}
