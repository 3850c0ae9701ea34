use std::collections::{BTreeMap, HashSet};

use rand::seq::index;
use rand::Rng;

use super::{DatasetType, DirectedGraph, GraphError, LabeledPair, NodeId, SplitSpec};
use crate::seed;

/// Holds out `floor(test_fraction * |E|)` edges, sampled uniformly without
/// replacement. Returns the training graph (same node set) and the held-out
/// edges as label-1 pairs in lexicographic order.
pub fn split_edges(
    graph: &DirectedGraph,
    spec: &SplitSpec,
) -> Result<(DirectedGraph, Vec<LabeledPair>), GraphError> {
    let spec = SplitSpec::new(spec.test_fraction, spec.rng_seed)?;
    let edges: Vec<(NodeId, NodeId)> = graph.edges().collect();
    let n_test = (spec.test_fraction * edges.len() as f64).floor() as usize;
    if n_test == 0 {
        return Err(GraphError::NoTestEdges {
            fraction: spec.test_fraction,
            edges: edges.len(),
        });
    }
    let mut rng = seed::rng(spec.rng_seed);
    let mut held_out = vec![false; edges.len()];
    for i in index::sample(&mut rng, edges.len(), n_test) {
        held_out[i] = true;
    }
    let mut test = Vec::with_capacity(n_test);
    let mut train = Vec::with_capacity(edges.len() - n_test);
    for (&(u, v), &out) in edges.iter().zip(&held_out) {
        if out {
            test.push(LabeledPair::pos(u, v));
        } else {
            train.push((u, v));
        }
    }
    let train = DirectedGraph::from_edges(graph.node_count(), train)?;
    Ok((train, test))
}

/// Samples `count` distinct node pairs `(u, v)` with `u != v`, `(u, v)` not an
/// edge of `graph` and not in `exclude`, labeled 0.
///
/// Gives up with [`GraphError::TooDense`] after `100 * count + 10_000` draws.
pub fn sample_non_edges(
    graph: &DirectedGraph,
    count: usize,
    exclude: &HashSet<(NodeId, NodeId)>,
    rng_seed: u64,
) -> Result<Vec<LabeledPair>, GraphError> {
    let n = graph.node_count();
    let budget = 100 * count + 10_000;
    let mut rng = seed::rng(rng_seed);
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        if attempts == budget || n < 2 {
            return Err(GraphError::TooDense {
                found: out.len(),
                wanted: count,
                attempts,
            });
        }
        attempts += 1;
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v || graph.has_edge(u, v) || exclude.contains(&(u, v)) || !seen.insert((u, v)) {
            continue;
        }
        out.push(LabeledPair::neg(u, v));
    }
    Ok(out)
}

/// Builds a labeled test set from held-out positives.
///
/// Reverse negatives are `(t, s)` for every positive `(s, t)` whose reverse
/// is not an edge of the full graph. Random negatives are as many uniformly
/// drawn non-edges of the full graph as there are positives. Type 1 uses the
/// same random negatives as Type 3 for a given seed. Output is sorted and
/// free of duplicates.
pub fn build_test_set(
    full: &DirectedGraph,
    test_pos: &[LabeledPair],
    dataset_type: DatasetType,
    rng_seed: u64,
) -> Result<Vec<LabeledPair>, GraphError> {
    if test_pos.is_empty() || test_pos.iter().any(|p| !p.is_positive()) {
        return Err(GraphError::BadPositives);
    }
    let mut out: Vec<LabeledPair> = test_pos.to_vec();
    if matches!(dataset_type, DatasetType::Type1 | DatasetType::Type2) {
        out.extend(
            test_pos
                .iter()
                .filter(|p| !full.has_edge(p.target, p.source))
                .map(|p| LabeledPair::neg(p.target, p.source)),
        );
    }
    if matches!(dataset_type, DatasetType::Type1 | DatasetType::Type3) {
        out.extend(sample_non_edges(
            full,
            test_pos.len(),
            &HashSet::new(),
            rng_seed,
        )?);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// All three test sets. They share `rng_seed`, so the random negatives of
/// Type 1 are exactly those of Type 3.
pub fn build_test_sets(
    full: &DirectedGraph,
    test_pos: &[LabeledPair],
    rng_seed: u64,
) -> Result<BTreeMap<DatasetType, Vec<LabeledPair>>, GraphError> {
    DatasetType::ALL
        .iter()
        .map(|&t| Ok((t, build_test_set(full, test_pos, t, rng_seed)?)))
        .collect()
}

/// Threshold-selection slice: `max(1, floor(fraction * |E|))` edges of
/// `train` (label 1) and as many random non-edges of `train` (label 0).
pub fn validation_pairs(
    train: &DirectedGraph,
    fraction: f64,
    rng_seed: u64,
) -> Result<Vec<LabeledPair>, GraphError> {
    let edges: Vec<(NodeId, NodeId)> = train.edges().collect();
    if edges.is_empty() {
        return Err(GraphError::Empty { self_loops: 0 });
    }
    let count = ((fraction * edges.len() as f64).floor() as usize).clamp(1, edges.len());
    let mut rng = seed::rng(seed::item_seed(rng_seed, 0));
    let mut picked: Vec<usize> = index::sample(&mut rng, edges.len(), count).into_vec();
    picked.sort_unstable();
    let mut out: Vec<LabeledPair> = picked
        .into_iter()
        .map(|i| LabeledPair::pos(edges[i].0, edges[i].1))
        .collect();
    out.extend(sample_non_edges(
        train,
        count,
        &HashSet::new(),
        seed::item_seed(rng_seed, 1),
    )?);
    Ok(out)
}

/// [`validation_pairs`] together with `train` minus the validation edges.
/// Fitting proximity embeddings on the reduced graph keeps the validation
/// positives unseen, like the test edges the threshold is meant for.
pub fn validation_split(
    train: &DirectedGraph,
    fraction: f64,
    rng_seed: u64,
) -> Result<(DirectedGraph, Vec<LabeledPair>), GraphError> {
    let pairs = validation_pairs(train, fraction, rng_seed)?;
    let held: HashSet<(NodeId, NodeId)> = pairs
        .iter()
        .filter(|p| p.is_positive())
        .map(|p| (p.source, p.target))
        .collect();
    let fit = DirectedGraph::from_edges(
        train.node_count(),
        train.edges().filter(|e| !held.contains(e)),
    )?;
    Ok((fit, pairs))
}
