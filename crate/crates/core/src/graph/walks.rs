use std::collections::{HashSet, VecDeque};
use std::sync::Arc;

use log::debug;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{DirectedGraph, LabeledPair, NodeId, WalkConfig};
use crate::seed;

/// Per-source cap on exact bounded reachability. Larger neighborhoods fall
/// back to sampled directed walks.
pub const DIRECTION_BFS_LIMIT: usize = 10_000;

/// Lazily generated random walks, `num_walks_per_node` rounds over all nodes
/// in node order.
///
/// The walk for `(round, start)` is drawn from its own generator seeded from
/// `(rng_seed, start, round)`, so the stream is identical regardless of how
/// many threads consume it or in which order walks are requested.
#[derive(Debug, Clone)]
pub struct Walks {
    adj: Arc<Vec<Vec<NodeId>>>,
    walks_per_node: usize,
    walk_length: usize,
    seed: u64,
    next: usize,
}

impl Walks {
    pub fn len_total(&self) -> usize {
        self.adj.len() * self.walks_per_node
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn walk(&self, round: usize, start: NodeId) -> Vec<NodeId> {
        let index = (start as u64)
            .wrapping_mul(self.walks_per_node as u64)
            .wrapping_add(round as u64);
        let mut rng = seed::rng(seed::item_seed(self.seed, index));
        let mut walk = Vec::with_capacity(self.walk_length);
        walk.push(start);
        let mut cur = start;
        while walk.len() < self.walk_length {
            let next = &self.adj[cur];
            if next.is_empty() {
                break;
            }
            cur = next[rng.random_range(0..next.len())];
            walk.push(cur);
        }
        walk
    }

    /// Materializes the full stream using all rayon worker threads.
    pub fn collect_parallel(&self) -> Vec<Vec<NodeId>> {
        let n = self.adj.len().max(1);
        (self.next..self.len_total())
            .into_par_iter()
            .map(|i| self.walk(i / n, i % n))
            .collect()
    }
}

impl Iterator for Walks {
    type Item = Vec<NodeId>;

    fn next(&mut self) -> Option<Vec<NodeId>> {
        if self.next >= self.len_total() {
            return None;
        }
        let n = self.adj.len();
        let walk = self.walk(self.next / n, self.next % n);
        self.next += 1;
        Some(walk)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.len_total() - self.next;
        (left, Some(left))
    }
}

impl ExactSizeIterator for Walks {}

/// Uniform random walks of at most `walk_length` nodes.
///
/// With `undirected` set, steps follow successors and predecessors alike.
/// Otherwise steps follow successors only and a walk stops at a sink.
/// Isolated nodes yield single-node walks.
pub fn generate_walks(graph: &DirectedGraph, cfg: &WalkConfig, undirected: bool) -> Walks {
    let adj = if undirected {
        graph.undirected_adjacency()
    } else {
        (0..graph.node_count())
            .map(|u| graph.successors(u).to_vec())
            .collect()
    };
    Walks {
        adj: Arc::new(adj),
        walks_per_node: cfg.num_walks_per_node,
        walk_length: cfg.walk_length.max(1),
        seed: cfg.rng_seed,
        next: 0,
    }
}

/// Nodes reachable from `source` in `1..=max_hop` directed steps, sorted and
/// excluding `source`. Returns `None` once more than `limit` nodes are found.
pub fn bounded_reach(
    graph: &DirectedGraph,
    source: NodeId,
    max_hop: usize,
    limit: usize,
) -> Option<Vec<NodeId>> {
    let mut seen = HashSet::new();
    seen.insert(source);
    let mut queue = VecDeque::from([(source, 0usize)]);
    let mut reached = Vec::new();
    while let Some((u, d)) = queue.pop_front() {
        if d == max_hop {
            continue;
        }
        for &v in graph.successors(u) {
            if seen.insert(v) {
                reached.push(v);
                if reached.len() > limit {
                    return None;
                }
                queue.push_back((v, d + 1));
            }
        }
    }
    reached.sort_unstable();
    Some(reached)
}

fn sampled_reach(
    graph: &DirectedGraph,
    source: NodeId,
    cfg: &WalkConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<NodeId> {
    let mut reached = Vec::new();
    for _ in 0..cfg.num_walks_per_node {
        let mut cur = source;
        for _ in 0..cfg.max_hop_for_direction {
            let next = graph.successors(cur);
            if next.is_empty() {
                break;
            }
            cur = next[rng.random_range(0..next.len())];
            if cur != source {
                reached.push(cur);
            }
        }
    }
    reached.sort_unstable();
    reached.dedup();
    reached
}

/// Direction training pairs from bounded directed reachability.
///
/// For every `t` reachable from `s` within `max_hop_for_direction` hops this
/// emits `(s, t, 1)`, and `(t, s, 0)` unless `s` is also reachable from `t`.
/// Reachability is exact (bounded BFS) for sources with at most
/// [`DIRECTION_BFS_LIMIT`] reachable nodes and sampled with directed walks
/// otherwise. Output is sorted and duplicate-free.
pub fn build_direction_pairs(graph: &DirectedGraph, cfg: &WalkConfig) -> Vec<LabeledPair> {
    let n = graph.node_count();
    let reach: Vec<Vec<NodeId>> = (0..n)
        .into_par_iter()
        .map(|s| {
            bounded_reach(graph, s, cfg.max_hop_for_direction, DIRECTION_BFS_LIMIT).unwrap_or_else(
                || {
                    debug!("node {s}: reachable set exceeds limit, sampling walks");
                    let mut rng = seed::rng(seed::item_seed(cfg.rng_seed, s as u64));
                    sampled_reach(graph, s, cfg, &mut rng)
                },
            )
        })
        .collect();
    let mut pairs: Vec<LabeledPair> = (0..n)
        .into_par_iter()
        .flat_map_iter(|s| {
            let reach = &reach;
            reach[s].iter().flat_map(move |&t| {
                let reciprocal = reach[t].binary_search(&s).is_ok();
                let back = if reciprocal {
                    LabeledPair::pos(t, s)
                } else {
                    LabeledPair::neg(t, s)
                };
                [LabeledPair::pos(s, t), back]
            })
        })
        .collect();
    pairs.par_sort_unstable();
    pairs.dedup();
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(walk_length: usize) -> WalkConfig {
        WalkConfig {
            num_walks_per_node: 2,
            walk_length,
            max_hop_for_direction: 3,
            rng_seed: 11,
        }
    }

    #[test]
    fn directed_walk_truncates_at_sink() {
        let g = DirectedGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let walks = generate_walks(&g, &cfg(5), false);
        assert_eq!(walks.walk(0, 0), vec![0, 1, 2]);
        assert_eq!(walks.walk(1, 2), vec![2]);
    }

    #[test]
    fn isolated_node_walk() {
        let g = DirectedGraph::from_edges(3, [(0, 1)]).unwrap();
        let walks: Vec<_> = generate_walks(&g, &cfg(5), true).collect();
        assert_eq!(walks.len(), 6);
        assert!(walks.contains(&vec![2]));
    }

    #[test]
    fn undirected_walks_use_predecessors() {
        let g = DirectedGraph::from_edges(2, [(0, 1)]).unwrap();
        let walks = generate_walks(&g, &cfg(4), true);
        assert_eq!(walks.walk(0, 1), vec![1, 0, 1, 0]);
    }

    #[test]
    fn walks_are_deterministic_and_thread_independent() {
        let g =
            DirectedGraph::from_edges(6, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 3)])
                .unwrap();
        let a: Vec<_> = generate_walks(&g, &cfg(10), true).collect();
        let b = generate_walks(&g, &cfg(10), true).collect_parallel();
        assert_eq!(a, b);
    }

    #[test]
    fn single_edge_pairs() {
        let g = DirectedGraph::from_edges(2, [(0, 1)]).unwrap();
        assert_eq!(
            build_direction_pairs(&g, &cfg(1)),
            vec![LabeledPair::pos(0, 1), LabeledPair::neg(1, 0)]
        );
    }

    #[test]
    fn reciprocal_pairs_both_positive() {
        let g = DirectedGraph::from_edges(2, [(0, 1), (1, 0)]).unwrap();
        assert_eq!(
            build_direction_pairs(&g, &cfg(1)),
            vec![LabeledPair::pos(0, 1), LabeledPair::pos(1, 0)]
        );
    }

    #[test]
    fn chain_includes_transitive_pair() {
        let g = DirectedGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let pairs = build_direction_pairs(&g, &cfg(1));
        assert!(pairs.contains(&LabeledPair::pos(0, 2)));
        assert!(pairs.contains(&LabeledPair::neg(2, 0)));
        assert_eq!(pairs.len(), 6);
    }

    #[test]
    fn hop_bound_respected() {
        let g = DirectedGraph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        assert_eq!(bounded_reach(&g, 0, 3, 100).unwrap(), vec![1, 2, 3]);
        assert_eq!(bounded_reach(&g, 0, 3, 2), None);
    }

    #[test]
    fn oversized_neighborhood_falls_back_to_sampling() {
        let n = DIRECTION_BFS_LIMIT + 2;
        let g = DirectedGraph::from_edges(n, (1..n).map(|v| (0, v))).unwrap();
        let mut c = cfg(1);
        c.num_walks_per_node = 5;
        let pairs = build_direction_pairs(&g, &c);
        let from_hub = pairs.iter().filter(|p| p.source == 0).count();
        assert!((1..=5).contains(&from_hub), "{from_hub}");
    }
}
