//! Proximity embeddings: skip-gram with negative sampling over undirected
//! random walks, the text embedding format, and proximity threshold selection.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{LabeledPair, NodeId};
use crate::seed;

#[derive(Debug, Error)]
pub enum ProximityError {
    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid skip-gram config: {0}")]
    Config(String),
    #[error("walk corpus is empty")]
    EmptyCorpus,
    #[error("walk references node {node} but only {node_count} node(s) exist")]
    UnknownNode { node: NodeId, node_count: usize },
    #[error("no embedding for node {0}")]
    MissingEmbedding(NodeId),
    #[error("threshold selection needs both labels, got {positives} positive(s) and {negatives} negative(s)")]
    SingleClass { positives: usize, negatives: usize },
}

/// Dense node-id-indexed table of equal-length vectors. Rows may be absent
/// when loaded from a file that skips some ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    data: Vec<f64>,
    present: Vec<bool>,
}

impl EmbeddingTable {
    pub fn zeros(node_count: usize, dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; node_count * dim],
            present: vec![true; node_count],
        }
    }

    /// Table from row-major data of `data.len() / dim` rows.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Self {
        assert!(
            dim > 0 && data.len().is_multiple_of(dim),
            "ragged embedding data"
        );
        let n = data.len() / dim;
        Self {
            dim,
            data,
            present: vec![true; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// One past the largest node id the table can hold.
    pub fn node_count(&self) -> usize {
        self.present.len()
    }

    /// Number of nodes with an embedding.
    pub fn len(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, node: NodeId) -> Option<&[f64]> {
        match self.present.get(node) {
            Some(true) => Some(&self.data[node * self.dim..(node + 1) * self.dim]),
            _ => None,
        }
    }

    pub fn try_get(&self, node: NodeId) -> Result<&[f64], ProximityError> {
        self.get(node).ok_or(ProximityError::MissingEmbedding(node))
    }

    pub fn set(&mut self, node: NodeId, vector: &[f64]) {
        assert_eq!(vector.len(), self.dim);
        if node >= self.present.len() {
            self.present.resize(node + 1, false);
            self.data.resize((node + 1) * self.dim, 0.0);
        }
        self.present[node] = true;
        self.data[node * self.dim..(node + 1) * self.dim].copy_from_slice(vector);
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &[f64])> + '_ {
        (0..self.present.len()).filter_map(move |n| self.get(n).map(|v| (n, v)))
    }

    /// Scaled cosine `(1 + cos) / 2` between two nodes' vectors.
    pub fn score(&self, u: NodeId, v: NodeId) -> Result<f64, ProximityError> {
        Ok(proximity_score(self.try_get(u)?, self.try_get(v)?))
    }
}

/// `(1 + cos(a, b)) / 2`, or 0.5 if either vector is zero. Symmetric in its
/// arguments bit for bit.
pub fn proximity_score(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.5;
    }
    (1.0 + (dot / (na * nb)).clamp(-1.0, 1.0)) / 2.0
}

/// Writes `<count> <dim>` then `<node> <f1> ... <f_dim>` per present node.
/// Floats use the shortest representation that parses back exactly.
pub fn save_embeddings(
    table: &EmbeddingTable,
    path: impl AsRef<Path>,
) -> Result<(), ProximityError> {
    let path = path.as_ref();
    let io = |source| ProximityError::Io {
        path: path.to_owned(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "{} {}", table.len(), table.dim)?;
        for (node, v) in table.iter() {
            write!(out, "{node}")?;
            for x in v {
                write!(out, " {x}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    };
    write().map_err(io)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable, ProximityError> {
    let path = path.as_ref();
    let io = |source| ProximityError::Io {
        path: path.to_owned(),
        source,
    };
    let malformed = |line: usize, message: String| ProximityError::Malformed {
        path: path.to_owned(),
        line,
        message,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut lines = reader.lines().enumerate();
    let (count, dim) = loop {
        let Some((i, line)) = lines.next() else {
            return Err(malformed(1, "missing '<count> <dim>' header".into()));
        };
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parsed = match fields[..] {
            [c, d] => c.parse::<usize>().ok().zip(d.parse::<usize>().ok()),
            _ => None,
        };
        match parsed {
            Some((c, d)) if d > 0 => break (c, d),
            _ => return Err(malformed(i + 1, format!("bad header '{line}'"))),
        }
    };
    let mut table = EmbeddingTable {
        dim,
        data: Vec::with_capacity(count * dim),
        present: Vec::with_capacity(count),
    };
    let mut rows = 0;
    let mut values = Vec::with_capacity(dim);
    for (i, line) in lines {
        let line = line.map_err(io)?;
        let mut fields = line.split_whitespace();
        let Some(id) = fields.next() else { continue };
        let node: NodeId = id
            .parse()
            .map_err(|_| malformed(i + 1, format!("'{id}' is not a node id")))?;
        values.clear();
        for f in fields {
            values.push(
                f.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| malformed(i + 1, format!("'{f}' is not a finite number")))?,
            );
        }
        if values.len() != dim {
            return Err(malformed(
                i + 1,
                format!("expected {dim} values, found {}", values.len()),
            ));
        }
        if table.get(node).is_some() {
            return Err(malformed(i + 1, format!("node {node} listed twice")));
        }
        table.set(node, &values);
        rows += 1;
    }
    if rows != count {
        warn!(
            "{}: header declares {count} rows, found {rows}",
            path.display()
        );
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkipGramConfig {
    pub dim: usize,
    /// Maximum context distance; each center draws an effective window in
    /// `1..=window`.
    pub window: usize,
    pub negatives_per_positive: usize,
    pub epochs: usize,
    /// Initial rate, decayed linearly to `1e-4` of itself over training.
    pub learning_rate: f64,
    pub rng_seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            window: 10,
            negatives_per_positive: 5,
            epochs: 1,
            learning_rate: 0.025,
            rng_seed: 0,
        }
    }
}

impl SkipGramConfig {
    pub fn validate(&self) -> Result<(), ProximityError> {
        if self.dim == 0 {
            return Err(ProximityError::Config("dim must be positive".into()));
        }
        if self.window == 0 {
            return Err(ProximityError::Config("window must be at least 1".into()));
        }
        if self.negatives_per_positive == 0 || self.epochs == 0 {
            return Err(ProximityError::Config(
                "negatives and epochs must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ProximityError::Config("learning rate must be > 0".into()));
        }
        Ok(())
    }
}

fn log_sigmoid_neg(x: f64) -> f64 {
    // -ln(sigmoid(x)) = ln(1 + e^{-x})
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Skip-gram negative-sampling trainer. Centers use the input table (the
/// embeddings that are returned); contexts and negatives use the output
/// table.
pub struct SkipGram {
    cfg: SkipGramConfig,
    input: Vec<f64>,
    output: Vec<f64>,
    noise: WeightedIndex<f64>,
    node_count: usize,
    tokens_per_epoch: u64,
    processed: u64,
    rng: ChaCha8Rng,
}

impl SkipGram {
    /// Counts node frequencies in `walks` and initializes both tables.
    pub fn new<I, W>(
        walks: I,
        node_count: usize,
        cfg: SkipGramConfig,
    ) -> Result<Self, ProximityError>
    where
        I: IntoIterator<Item = W>,
        W: AsRef<[NodeId]>,
    {
        cfg.validate()?;
        let mut counts = vec![0u64; node_count];
        let mut tokens = 0u64;
        for walk in walks {
            for &node in walk.as_ref() {
                if node >= node_count {
                    return Err(ProximityError::UnknownNode { node, node_count });
                }
                counts[node] += 1;
                tokens += 1;
            }
        }
        if tokens == 0 {
            return Err(ProximityError::EmptyCorpus);
        }
        let missing = counts.iter().filter(|&&c| c == 0).count();
        if missing > 0 {
            warn!(
                "{missing} node(s) never appear in the walks and keep their random initial vector"
            );
        }
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
        let noise =
            WeightedIndex::new(&weights).map_err(|e| ProximityError::Config(e.to_string()))?;
        let mut rng = seed::rng(cfg.rng_seed);
        let half = 0.5 / cfg.dim as f64;
        let input = (0..node_count * cfg.dim)
            .map(|_| rng.random_range(-half..half))
            .collect();
        Ok(Self {
            input,
            output: vec![0.0; node_count * cfg.dim],
            noise,
            node_count,
            tokens_per_epoch: tokens,
            processed: 0,
            cfg,
            rng,
        })
    }

    fn rate(&self) -> f64 {
        let total = (self.tokens_per_epoch * self.cfg.epochs as u64) as f64;
        let progress = self.processed as f64 / total;
        self.cfg.learning_rate * (1.0 - progress).max(1e-4)
    }

    /// One SGD update for `(center, context)` plus negatives; returns the
    /// pair's loss before the update.
    fn step(&mut self, center: NodeId, context: NodeId, lr: f64, grad: &mut [f64]) -> f64 {
        let dim = self.cfg.dim;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for k in 0..=self.cfg.negatives_per_positive {
            let (target, label) = if k == 0 {
                (context, 1.0)
            } else {
                let neg = self.noise.sample(&mut self.rng);
                if neg == context {
                    continue;
                }
                (neg, 0.0)
            };
            let inp = &self.input[center * dim..(center + 1) * dim];
            let out = &mut self.output[target * dim..(target + 1) * dim];
            let f: f64 = inp.iter().zip(out.iter()).map(|(a, b)| a * b).sum();
            loss += if label == 1.0 {
                log_sigmoid_neg(f)
            } else {
                log_sigmoid_neg(-f)
            };
            let g = (label - sigmoid(f)) * lr;
            for ((acc, o), i) in grad.iter_mut().zip(out.iter_mut()).zip(inp) {
                *acc += g * *o;
                *o += g * i;
            }
        }
        for (i, g) in self.input[center * dim..(center + 1) * dim]
            .iter_mut()
            .zip(grad.iter())
        {
            *i += g;
        }
        loss
    }

    /// One pass over the corpus. Returns the mean per-pair training loss.
    pub fn train_epoch<I, W>(&mut self, walks: I) -> f64
    where
        I: IntoIterator<Item = W>,
        W: AsRef<[NodeId]>,
    {
        let mut grad = vec![0.0; self.cfg.dim];
        let (mut total, mut pairs) = (0.0, 0u64);
        for walk in walks {
            let walk = walk.as_ref();
            for (i, &center) in walk.iter().enumerate() {
                let lr = self.rate();
                let reach = self.cfg.window - self.rng.random_range(0..self.cfg.window);
                let lo = i.saturating_sub(reach);
                let hi = (i + reach).min(walk.len() - 1);
                for (j, &context) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                    if j != i {
                        total += self.step(center, context, lr, &mut grad);
                        pairs += 1;
                    }
                }
                self.processed += 1;
            }
        }
        if pairs == 0 {
            0.0
        } else {
            total / pairs as f64
        }
    }

    /// Mean negative-sampling loss over every `(center, context)` pair within
    /// the full window, with negatives drawn from a generator seeded by
    /// `eval_seed`. Does not modify the model.
    pub fn corpus_loss<I, W>(&self, walks: I, eval_seed: u64) -> f64
    where
        I: IntoIterator<Item = W>,
        W: AsRef<[NodeId]>,
    {
        let dim = self.cfg.dim;
        let mut rng = seed::rng(eval_seed);
        let dot = |c: NodeId, t: NodeId| -> f64 {
            self.input[c * dim..(c + 1) * dim]
                .iter()
                .zip(&self.output[t * dim..(t + 1) * dim])
                .map(|(a, b)| a * b)
                .sum()
        };
        let (mut total, mut pairs) = (0.0, 0u64);
        for walk in walks {
            let walk = walk.as_ref();
            for (i, &center) in walk.iter().enumerate() {
                let lo = i.saturating_sub(self.cfg.window);
                let hi = (i + self.cfg.window).min(walk.len() - 1);
                for j in (lo..=hi).filter(|&j| j != i) {
                    let mut loss = log_sigmoid_neg(dot(center, walk[j]));
                    for _ in 0..self.cfg.negatives_per_positive {
                        let neg = self.noise.sample(&mut rng);
                        if neg != walk[j] {
                            loss += log_sigmoid_neg(-dot(center, neg));
                        }
                    }
                    total += loss;
                    pairs += 1;
                }
            }
        }
        if pairs == 0 {
            0.0
        } else {
            total / pairs as f64
        }
    }

    pub fn into_table(self) -> EmbeddingTable {
        let mut table = EmbeddingTable::from_flat(self.cfg.dim, self.input);
        table.present.truncate(self.node_count);
        table
    }

    pub fn table(&self) -> EmbeddingTable {
        EmbeddingTable::from_flat(self.cfg.dim, self.input.clone())
    }
}

/// Trains proximity embeddings on a walk corpus. The corpus is iterated once
/// for counting and once per epoch, so it must be cheaply cloneable (a
/// [`crate::graph::generate_walks`] stream or a borrowed `Vec`).
pub fn train_skipgram<I, W>(
    walks: I,
    node_count: usize,
    cfg: &SkipGramConfig,
) -> Result<EmbeddingTable, ProximityError>
where
    I: IntoIterator<Item = W> + Clone,
    W: AsRef<[NodeId]>,
{
    let mut model = SkipGram::new(walks.clone(), node_count, *cfg)?;
    for epoch in 0..cfg.epochs {
        let loss = model.train_epoch(walks.clone());
        log::info!("skip-gram epoch {}: mean loss {loss:.5}", epoch + 1);
    }
    Ok(model.into_table())
}

/// A proximity decision threshold and the Youden J it achieves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    /// Pairs pass when their score is strictly greater than this value.
    pub value: f64,
    pub youden_j: f64,
}

/// Threshold maximizing Youden's J (TPR - FPR) over precomputed scores, with
/// "positive iff score > threshold". Candidates are the distinct scores; ties
/// go to the lowest threshold.
pub fn youden_threshold(scores: &[(f64, bool)]) -> Result<Threshold, ProximityError> {
    let positives = scores.iter().filter(|s| s.1).count();
    let negatives = scores.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(ProximityError::SingleClass {
            positives,
            negatives,
        });
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (p, n) = (positives as f64, negatives as f64);
    let (mut pos_le, mut neg_le) = (0usize, 0usize);
    let mut best: Option<Threshold> = None;
    let mut i = 0;
    while i < sorted.len() {
        let value = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == value {
            if sorted[i].1 {
                pos_le += 1;
            } else {
                neg_le += 1;
            }
            i += 1;
        }
        let tpr = (positives - pos_le) as f64 / p;
        let fpr = (negatives - neg_le) as f64 / n;
        let j = tpr - fpr;
        if best.is_none_or(|b| j > b.youden_j) {
            best = Some(Threshold { value, youden_j: j });
        }
    }
    let best = best.expect("non-empty input");
    if best.youden_j <= 0.0 {
        warn!(
            "proximity scores do not separate the labels (Youden J = {})",
            best.youden_j
        );
    }
    Ok(best)
}

/// Scores labeled pairs by proximity and picks the Youden-optimal threshold.
pub fn pick_proximity_threshold(
    table: &EmbeddingTable,
    labeled: &[LabeledPair],
) -> Result<Threshold, ProximityError> {
    let scores = labeled
        .iter()
        .map(|p| Ok((table.score(p.source, p.target)?, p.is_positive())))
        .collect::<Result<Vec<_>, ProximityError>>()?;
    youden_threshold(&scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        let table = EmbeddingTable::from_flat(
            2,
            vec![0.1, -2.5e-7, 1.0 / 3.0, 4.0, std::f64::consts::PI, -0.0],
        );
        save_embeddings(&table, &path).unwrap();
        let back = load_embeddings(&path).unwrap();
        assert_eq!(back.node_count(), 3);
        for n in 0..3 {
            for (a, b) in table.get(n).unwrap().iter().zip(back.get(n).unwrap()) {
                assert!((a - b).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn header_defines_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        std::fs::write(&path, "3 4\n0 1 2 3 4\n1 0 0 0 1\n2 .5 .5 .5 .5\n").unwrap();
        let t = load_embeddings(&path).unwrap();
        assert_eq!((t.len(), t.dim()), (3, 4));
        assert_eq!(t.get(2).unwrap(), &[0.5; 4]);
    }

    #[test]
    fn inconsistent_dims_name_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        std::fs::write(&path, "2 3\n0 1 2 3\n1 1 2\n").unwrap();
        let err = load_embeddings(&path).unwrap_err();
        assert!(
            matches!(err, ProximityError::Malformed { line: 3, .. }),
            "{err}"
        );
    }

    #[test]
    fn separable_threshold() {
        let t = youden_threshold(&[(0.9, true), (0.8, true), (0.2, false), (0.1, false)]).unwrap();
        assert_eq!(t.value, 0.2);
        assert_eq!(t.youden_j, 1.0);
    }

    #[test]
    fn identical_scores_give_zero_j() {
        let t = youden_threshold(&[(0.4, true), (0.4, false), (0.4, true)]).unwrap();
        assert_eq!(t.youden_j, 0.0);
        assert_eq!(t.value, 0.4);
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(
            youden_threshold(&[(0.4, true), (0.7, true)]),
            Err(ProximityError::SingleClass { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = SkipGramConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.dim = 0;
        assert!(cfg.validate().is_err());
        let cfg = SkipGramConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn score_is_symmetric() {
        let t = EmbeddingTable::from_flat(3, vec![0.3, -1.0, 0.25, 0.7, 0.1, -0.9]);
        assert_eq!(t.score(0, 1).unwrap(), t.score(1, 0).unwrap());
        assert!(t.score(0, 2).is_err());
    }
}
