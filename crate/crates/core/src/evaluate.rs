//! Link prediction and node recommendation metrics.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use rand::seq::index;
use rayon::prelude::*;
use thiserror::Error;

use crate::direction::{DirectionModel, ModelError};
use crate::graph::{DatasetType, DirectedGraph, LabeledPair, NodeId};
use crate::proximity::{proximity_score, EmbeddingTable, ProximityError};
use crate::seed;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("ROC-AUC needs both labels, got {positives} positive(s) and {negatives} negative(s)")]
    SingleClass { positives: usize, negatives: usize },
    #[error("non-finite score for pair ({0}, {1})")]
    NonFinite(NodeId, NodeId),
    #[error(transparent)]
    Proximity(#[from] ProximityError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unknown query node {0}")]
    UnknownNode(NodeId),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("no query nodes to evaluate")]
    EmptySample,
    #[error("no recommendations for sampled node {0}")]
    MissingRecommendations(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPair {
    pub source: NodeId,
    pub target: NodeId,
    pub score: f64,
    pub label: u8,
}

/// Area under the ROC curve as the Mann-Whitney statistic: the fraction of
/// (positive, negative) pairs where the positive scores higher, ties counting
/// one half.
pub fn roc_auc(scored: &[ScoredPair]) -> Result<f64, EvalError> {
    if let Some(p) = scored.iter().find(|p| !p.score.is_finite()) {
        return Err(EvalError::NonFinite(p.source, p.target));
    }
    let positives = scored.iter().filter(|p| p.label == 1).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClass {
            positives,
            negatives,
        });
    }
    let mut sorted: Vec<(f64, bool)> = scored.iter().map(|p| (p.score, p.label == 1)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Twice the U statistic, kept integral so the result is exact.
    let mut u2: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let value = sorted[i].0;
        let (mut p, mut q) = (0u128, 0u128);
        while i < sorted.len() && sorted[i].0 == value {
            if sorted[i].1 {
                p += 1;
            } else {
                q += 1;
            }
            i += 1;
        }
        u2 += 2 * p * neg_below + p * q;
        neg_below += q;
    }
    Ok(u2 as f64 / (2 * positives as u128 * negatives as u128) as f64)
}

/// Two-step score: 0 unless the proximity score is strictly above
/// `proximity_threshold`, otherwise the direction model's `y_hat`.
pub fn score_pairs_two_step(
    prox: &EmbeddingTable,
    proximity_threshold: f64,
    model: &DirectionModel,
    pairs: &[LabeledPair],
) -> Result<Vec<ScoredPair>, EvalError> {
    let directions = model.embed_all();
    score_with_embeddings(prox, proximity_threshold, model, &directions, pairs)
}

fn score_with_embeddings(
    prox: &EmbeddingTable,
    proximity_threshold: f64,
    model: &DirectionModel,
    directions: &EmbeddingTable,
    pairs: &[LabeledPair],
) -> Result<Vec<ScoredPair>, EvalError> {
    pairs
        .par_iter()
        .map(|p| {
            let gate = prox.score(p.source, p.target)?;
            let score = if gate > proximity_threshold {
                let v_s = directions
                    .get(p.source)
                    .ok_or(ProximityError::MissingEmbedding(p.source))?;
                let v_t = directions
                    .get(p.target)
                    .ok_or(ProximityError::MissingEmbedding(p.target))?;
                model.score_embeddings(v_s, v_t)?
            } else {
                0.0
            };
            Ok(ScoredPair {
                source: p.source,
                target: p.target,
                score,
                label: p.label,
            })
        })
        .collect()
}

/// Proximity score alone, as a symmetric method would rank pairs.
pub fn score_pairs_proximity(
    prox: &EmbeddingTable,
    pairs: &[LabeledPair],
) -> Result<Vec<ScoredPair>, EvalError> {
    pairs
        .iter()
        .map(|p| {
            Ok(ScoredPair {
                source: p.source,
                target: p.target,
                score: prox.score(p.source, p.target)?,
                label: p.label,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoringMode {
    /// Proximity gate followed by the direction model.
    TwoStep,
    /// Proximity score only.
    ProximityOnly,
}

impl ScoringMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScoringMode::TwoStep => "two-step",
            ScoringMode::ProximityOnly => "proximity",
        }
    }
}

/// Aggregated metrics. AUC is keyed by dataset type, precision and recall by k.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub auc: BTreeMap<DatasetType, f64>,
    pub precision_at: BTreeMap<usize, f64>,
    pub recall_at: BTreeMap<usize, f64>,
    /// `(positives, negatives)` per dataset type.
    pub counts: BTreeMap<DatasetType, (usize, usize)>,
    /// Query nodes behind the precision/recall averages.
    pub queries: usize,
}

impl MetricsReport {
    /// `metric,dataset_type,k,value` rows. Empty fields use `-`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,dataset_type,k,value\n");
        for (t, v) in &self.auc {
            let _ = writeln!(out, "auc,{t},-,{v}");
        }
        for (t, (p, n)) in &self.counts {
            let _ = writeln!(out, "positives,{t},-,{p}");
            let _ = writeln!(out, "negatives,{t},-,{n}");
        }
        for (k, v) in &self.precision_at {
            let _ = writeln!(out, "precision,-,{k},{v}");
        }
        for (k, v) in &self.recall_at {
            let _ = writeln!(out, "recall,-,{k},{v}");
        }
        if self.queries > 0 {
            let _ = writeln!(out, "queries,-,-,{}", self.queries);
        }
        out
    }

    /// Aligned human-readable table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        if !self.auc.is_empty() {
            let _ = writeln!(
                out,
                "{:<8} {:>10} {:>10} {:>8}",
                "dataset", "positives", "negatives", "ROC-AUC"
            );
            for (t, v) in &self.auc {
                let (p, n) = self.counts.get(t).copied().unwrap_or_default();
                let _ = writeln!(out, "{:<8} {:>10} {:>10} {:>8.4}", t.as_str(), p, n, v);
            }
        }
        if !self.precision_at.is_empty() {
            if !out.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(
                out,
                "{:>6} {:>8} {:>8}   ({} queries)",
                "k", "P@k", "R@k", self.queries
            );
            for (k, p) in &self.precision_at {
                let r = self.recall_at.get(k).copied().unwrap_or(f64::NAN);
                let _ = writeln!(out, "{k:>6} {p:>8.4} {r:>8.4}");
            }
        }
        out
    }
}

/// One ROC-AUC per dataset type.
pub fn evaluate_link_prediction(
    prox: &EmbeddingTable,
    proximity_threshold: f64,
    model: &DirectionModel,
    test_sets: &BTreeMap<DatasetType, Vec<LabeledPair>>,
    mode: ScoringMode,
) -> Result<MetricsReport, EvalError> {
    let directions = match mode {
        ScoringMode::TwoStep => Some(model.embed_all()),
        ScoringMode::ProximityOnly => None,
    };
    let mut report = MetricsReport::default();
    for (&t, pairs) in test_sets {
        let scored = match &directions {
            Some(d) => score_with_embeddings(prox, proximity_threshold, model, d, pairs)?,
            None => score_pairs_proximity(prox, pairs)?,
        };
        report.auc.insert(t, roc_auc(&scored)?);
        let positives = pairs.iter().filter(|p| p.is_positive()).count();
        report
            .counts
            .insert(t, (positives, pairs.len() - positives));
    }
    Ok(report)
}

/// Recommends top-k targets for query nodes.
///
/// Candidates are all nodes except the query and its training
/// out-neighbors, ranked by proximity score (descending, ties by id). A
/// candidate survives when its proximity score is strictly above the gate
/// (if any) and the direction model predicts an edge from the query. The
/// first `k` survivors are returned; when fewer survive, the list is padded
/// with the highest-proximity remaining candidates.
pub struct Recommender<'a> {
    prox: &'a EmbeddingTable,
    model: &'a DirectionModel,
    train: &'a DirectedGraph,
    directions: EmbeddingTable,
    direction_threshold: f64,
    proximity_gate: Option<f64>,
}

impl<'a> Recommender<'a> {
    pub fn new(
        prox: &'a EmbeddingTable,
        model: &'a DirectionModel,
        train: &'a DirectedGraph,
        direction_threshold: f64,
        proximity_gate: Option<f64>,
    ) -> Self {
        Self {
            prox,
            model,
            train,
            directions: model.embed_all(),
            direction_threshold,
            proximity_gate,
        }
    }

    pub fn recommend(&self, query: NodeId, k: usize) -> Result<Vec<NodeId>, EvalError> {
        if k == 0 {
            return Err(EvalError::ZeroK);
        }
        let n = self.train.node_count();
        if query >= n {
            return Err(EvalError::UnknownNode(query));
        }
        let q = self.prox.try_get(query)?;
        let v_q = self
            .directions
            .get(query)
            .ok_or(EvalError::UnknownNode(query))?;
        let known = self.train.successors(query);
        let mut ranked = Vec::with_capacity(n);
        for c in 0..n {
            if c == query || known.binary_search(&c).is_ok() {
                continue;
            }
            ranked.push((proximity_score(q, self.prox.try_get(c)?), c));
        }
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut picked = Vec::with_capacity(k.min(ranked.len()));
        let mut rejected = Vec::new();
        for &(p, c) in &ranked {
            if picked.len() == k {
                break;
            }
            let gated = self.proximity_gate.is_some_and(|g| p <= g);
            let v_c = self
                .directions
                .get(c)
                .ok_or(ProximityError::MissingEmbedding(c))?;
            if !gated && self.model.score_embeddings(v_q, v_c)? > self.direction_threshold {
                picked.push(c);
            } else {
                rejected.push(c);
            }
        }
        let deficit = k.min(ranked.len()) - picked.len();
        picked.extend(rejected.into_iter().take(deficit));
        Ok(picked)
    }

    /// Recommendations for many queries in parallel.
    pub fn recommend_all(
        &self,
        queries: &[NodeId],
        k: usize,
    ) -> Result<BTreeMap<NodeId, Vec<NodeId>>, EvalError> {
        queries
            .par_iter()
            .map(|&q| Ok((q, self.recommend(q, k)?)))
            .collect()
    }
}

/// Single-query convenience wrapper around [`Recommender`].
pub fn recommend_topk(
    prox: &EmbeddingTable,
    model: &DirectionModel,
    train: &DirectedGraph,
    query: NodeId,
    k: usize,
    proximity_gate: Option<f64>,
) -> Result<Vec<NodeId>, EvalError> {
    Recommender::new(prox, model, train, model.config().threshold, proximity_gate)
        .recommend(query, k)
}

/// Samples `ceil(fraction * m)` (at least one) of the `m` nodes that have a
/// held-out out-edge among the positives of `test_edges`. Sorted.
pub fn sample_query_nodes(
    test_edges: &[LabeledPair],
    fraction: f64,
    rng_seed: u64,
) -> Result<Vec<NodeId>, EvalError> {
    let sources: Vec<NodeId> = test_edges
        .iter()
        .filter(|p| p.is_positive())
        .map(|p| p.source)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if sources.is_empty() || fraction.is_nan() || fraction <= 0.0 {
        return Err(EvalError::EmptySample);
    }
    let want = ((fraction.min(1.0) * sources.len() as f64).ceil() as usize).clamp(1, sources.len());
    let mut rng = seed::rng(rng_seed);
    let mut picked: Vec<NodeId> = index::sample(&mut rng, sources.len(), want)
        .into_iter()
        .map(|i| sources[i])
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Per-node precision and recall at `k` for one query.
pub fn precision_recall(
    predicted: &[NodeId],
    relevant: &HashSet<NodeId>,
    k: usize,
) -> (f64, f64, usize) {
    let pred = &predicted[..k.min(predicted.len())];
    let hits = pred.iter().filter(|n| relevant.contains(n)).count();
    let precision = if pred.is_empty() {
        0.0
    } else {
        hits as f64 / pred.len() as f64
    };
    let recall = if relevant.is_empty() {
        0.0
    } else {
        hits as f64 / relevant.len() as f64
    };
    (precision, recall, hits)
}

/// Macro-averaged P@k and R@k over sampled query nodes.
///
/// Query nodes are drawn with [`sample_query_nodes`]; for each, PredSet is
/// the first `k` entries of its recommendation list and TestSet its held-out
/// out-neighbors. `recommendations` must cover every sampled node.
pub fn precision_recall_at_k(
    recommendations: &BTreeMap<NodeId, Vec<NodeId>>,
    test_edges: &[LabeledPair],
    ks: &[usize],
    sample_fraction: f64,
    rng_seed: u64,
) -> Result<MetricsReport, EvalError> {
    let queries = sample_query_nodes(test_edges, sample_fraction, rng_seed)?;
    precision_recall_for_queries(recommendations, test_edges, ks, &queries)
}

/// As [`precision_recall_at_k`] for an explicit query list.
pub fn precision_recall_for_queries(
    recommendations: &BTreeMap<NodeId, Vec<NodeId>>,
    test_edges: &[LabeledPair],
    ks: &[usize],
    queries: &[NodeId],
) -> Result<MetricsReport, EvalError> {
    if queries.is_empty() {
        return Err(EvalError::EmptySample);
    }
    if ks.contains(&0) {
        return Err(EvalError::ZeroK);
    }
    let mut relevant: BTreeMap<NodeId, HashSet<NodeId>> = BTreeMap::new();
    for p in test_edges.iter().filter(|p| p.is_positive()) {
        relevant.entry(p.source).or_default().insert(p.target);
    }
    let empty = HashSet::new();
    let mut report = MetricsReport {
        queries: queries.len(),
        ..Default::default()
    };
    for &k in ks {
        let (mut p_sum, mut r_sum) = (0.0, 0.0);
        for q in queries {
            let recs = recommendations
                .get(q)
                .ok_or(EvalError::MissingRecommendations(*q))?;
            let (p, r, _) = precision_recall(recs, relevant.get(q).unwrap_or(&empty), k);
            p_sum += p;
            r_sum += r;
        }
        report.precision_at.insert(k, p_sum / queries.len() as f64);
        report.recall_at.insert(k, r_sum / queries.len() as f64);
    }
    Ok(report)
}
