//! Shared fixtures for the benchmarks.

use greed::graph::{DirectedGraph, LabeledPair};
use greed::seed::rng;
use greed::ScoredPair;
use rand::seq::index;
use rand::Rng;

/// `count` vectors of length `dim` with entries uniform in `[-1, 1)`.
pub fn vectors(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| (0..dim).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect()
}

/// Layered random DAG: `n / width` layers, each node linking to `deg` nodes
/// of the next layer.
pub fn layered_dag(n: usize, width: usize, deg: usize, seed: u64) -> DirectedGraph {
    let mut r = rng(seed);
    let layers = n / width;
    let mut edges = Vec::new();
    for l in 0..layers.saturating_sub(1) {
        for i in 0..width {
            for j in index::sample(&mut r, width, deg) {
                edges.push((l * width + i, (l + 1) * width + j));
            }
        }
    }
    DirectedGraph::from_edges(n, edges).expect("valid edges")
}

/// Random labeled pairs of distinct nodes.
pub fn pairs(nodes: usize, count: usize, seed: u64) -> Vec<LabeledPair> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let s = r.random_range(0..nodes);
            let t = (s + r.random_range(1..nodes)) % nodes;
            LabeledPair::new(s, t, u8::from(r.random_bool(0.5))).expect("distinct nodes")
        })
        .collect()
}

/// Scored pairs with scores on a coarse grid, so ties are common.
pub fn scored(count: usize, seed: u64) -> Vec<ScoredPair> {
    let mut r = rng(seed);
    (0..count)
        .map(|i| ScoredPair {
            source: i,
            target: i + 1,
            score: f64::from(r.random_range(0..1000u32)) / 1000.0,
            label: u8::from(r.random_bool(0.3)),
        })
        .collect()
}
