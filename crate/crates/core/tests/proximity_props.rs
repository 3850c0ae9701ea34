mod common;

use greed::graph::{generate_walks, DirectedGraph, WalkConfig};
use greed::proximity::{proximity_score, train_skipgram, youden_threshold, SkipGram};
use greed::SkipGramConfig;
use proptest::prelude::*;
use rand::Rng;

/// Two 6-cliques joined by the single edge 5 -> 6.
fn two_cliques() -> DirectedGraph {
    let mut edges = Vec::new();
    for base in [0, 6] {
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    edges.push((base + i, base + j));
                }
            }
        }
    }
    edges.push((5, 6));
    DirectedGraph::from_edges(12, edges).unwrap()
}

fn corpus(g: &DirectedGraph, seed: u64) -> Vec<Vec<usize>> {
    let cfg = WalkConfig {
        num_walks_per_node: 20,
        walk_length: 20,
        rng_seed: seed,
        ..WalkConfig::default()
    };
    generate_walks(g, &cfg, true).collect()
}

/// Youden J of the rule `score > value`.
fn youden_at(scores: &[(f64, bool)], value: f64) -> f64 {
    let p = scores.iter().filter(|s| s.1).count() as f64;
    let n = scores.len() as f64 - p;
    let tp = scores.iter().filter(|s| s.1 && s.0 > value).count() as f64;
    let fp = scores.iter().filter(|s| !s.1 && s.0 > value).count() as f64;
    tp / p - fp / n
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn score_is_symmetric(a in prop::collection::vec(-5.0f64..5.0, 1..20), b in prop::collection::vec(-5.0f64..5.0, 20)) {
        let b = &b[..a.len()];
        let s = proximity_score(&a, b);
        prop_assert_eq!(s, proximity_score(b, &a));
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn threshold_is_youden_optimal(scores in prop::collection::vec(((0u32..20).prop_map(|v| v as f64 / 19.0), any::<bool>()), 2..100)) {
        prop_assume!(scores.iter().any(|s| s.1) && scores.iter().any(|s| !s.1));
        let t = youden_threshold(&scores).unwrap();
        prop_assert!((0.0..=1.0).contains(&t.value));
        prop_assert_eq!(t.youden_j, youden_at(&scores, t.value));
        for &(candidate, _) in &scores {
            let j = youden_at(&scores, candidate);
            prop_assert!(j <= t.youden_j);
            if j == t.youden_j {
                prop_assert!(candidate >= t.value);
            }
        }
    }
}

#[test]
fn random_labels_give_small_j() {
    let mut rng = greed::seed::rng(17);
    let scores: Vec<(f64, bool)> = (0..1000)
        .map(|_| (rng.random::<f64>(), rng.random_bool(0.5)))
        .collect();
    let t = youden_threshold(&scores).unwrap();
    assert!(t.youden_j < 0.1, "J = {}", t.youden_j);
}

#[test]
fn separable_scores() {
    let scores = [(0.9, true), (0.8, true), (0.2, false), (0.1, false)];
    let t = youden_threshold(&scores).unwrap();
    assert_eq!((t.value, t.youden_j), (0.2, 1.0));
}

#[test]
fn cliques_separate() {
    let g = two_cliques();
    let walks = corpus(&g, 1);
    let cfg = SkipGramConfig {
        dim: 8,
        epochs: 3,
        window: 4,
        rng_seed: 2,
        ..SkipGramConfig::default()
    };
    let table = train_skipgram(&walks, 12, &cfg).unwrap();
    let clique = |n: usize| n / 6;
    for u in 0..12 {
        let nearest = (0..12)
            .filter(|&v| v != u)
            .max_by(|&a, &b| {
                table
                    .score(u, a)
                    .unwrap()
                    .total_cmp(&table.score(u, b).unwrap())
            })
            .unwrap();
        assert_eq!(clique(nearest), clique(u), "node {u}");
    }
}

#[test]
fn corpus_loss_decreases() {
    let g = common::layered_dag(60, 6, 3, 0.2, 5);
    let walks = corpus(&g, 3);
    let cfg = SkipGramConfig {
        dim: 16,
        epochs: 8,
        rng_seed: 4,
        ..SkipGramConfig::default()
    };
    let mut sg = SkipGram::new(&walks, 60, cfg).unwrap();
    let mut losses = vec![sg.corpus_loss(&walks, 99)];
    for _ in 0..cfg.epochs {
        sg.train_epoch(&walks);
        losses.push(sg.corpus_loss(&walks, 99));
    }
    for w in losses.windows(2) {
        assert!(w[1] <= 1.05 * w[0], "{losses:?}");
    }
    assert!(losses.last().unwrap() < &losses[0], "{losses:?}");
}

#[test]
fn training_is_reproducible() {
    let g = two_cliques();
    let walks = corpus(&g, 8);
    let cfg = SkipGramConfig {
        dim: 6,
        rng_seed: 5,
        ..SkipGramConfig::default()
    };
    let a = train_skipgram(&walks, 12, &cfg).unwrap();
    let b = train_skipgram(&walks, 12, &cfg).unwrap();
    for n in 0..12 {
        assert_eq!(a.get(n), b.get(n));
    }
}
