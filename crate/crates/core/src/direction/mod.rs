//! Siamese direction model with a cross-product head.
//!
//! Both nodes of a pair go through the same network:
//!
//! ```text
//! x      = input[node]                  (trainable K-vector)
//! a_0    = relu(W_0 x)
//! a_l    = relu(W_l a_{l-1})            (one per hidden layer)
//! v      = W_out a_last                 (no activation, length N)
//! v_r    = cross(v_s, v_t, c_1 .. c_{N-3})
//! y_hat  = (1 + cos(v_d, v_r)) / 2
//! ```
//!
//! The loss is the contrastive loss
//! `y (1 - y_hat)^2 + (1 - y) max(y_hat - margin, 0)^2`. Gradients are
//! computed by hand: loss -> scaled cosine -> cross product Jacobians for the
//! two branches -> shared linear layers (the two branch contributions are
//! summed) -> ReLU masks -> input rows.

mod checkpoint;
mod gradcheck;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use log::info;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::crossprod::{self, ConstantFrame, CrossError, EPS};
use crate::graph::{LabeledPair, NodeId};
use crate::proximity::EmbeddingTable;
use crate::seed;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use gradcheck::{gradcheck, relative_error, GradcheckReport};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Cross(#[from] CrossError),
    #[error("unknown node {node} (model has {node_count} nodes)")]
    UnknownNode { node: NodeId, node_count: usize },
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("forward cache does not match the model's shapes")]
    StaleCache,
    #[error("no training pairs")]
    NoPairs,
    #[error(
        "non-finite loss at epoch {epoch}, batch {batch}, pair ({}, {}, {})",
        pair.source, pair.target, pair.label
    )]
    NonFinite {
        epoch: usize,
        batch: usize,
        pair: LabeledPair,
    },
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
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Length K of each node's trainable input vector.
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    /// Direction embedding length N, at least 3.
    pub embed_dim: usize,
    /// Contrastive margin, in (0, 0.5).
    pub margin: f64,
    /// Decision threshold on y_hat, in (0, 1).
    pub threshold: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub rng_seed: u64,
    /// When set, the reference vector is a normalized standard normal draw
    /// from this seed instead of the normalized all-ones vector.
    pub reference_seed: Option<u64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_dim: 64,
            hidden_dims: vec![256, 256],
            embed_dim: 3,
            margin: 0.25,
            threshold: 0.5,
            learning_rate: 0.025,
            batch_size: 512,
            epochs: 20,
            rng_seed: 0,
            reference_seed: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: &str| Err(ModelError::Config(m.to_owned()));
        if self.input_dim == 0 || self.hidden_dims.contains(&0) {
            return fail("layer sizes must be positive");
        }
        if self.embed_dim < 3 {
            return fail("embedding dimension must be at least 3");
        }
        if !(self.margin > 0.0 && self.margin < 0.5) {
            return fail("margin must lie in (0, 0.5)");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return fail("threshold must lie in (0, 1)");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return fail("batch size must be positive");
        }
        Ok(())
    }
}

/// `y (1 - y_hat)^2 + (1 - y) max(y_hat - margin, 0)^2`.
pub fn contrastive_loss(y_hat: f64, label: u8, margin: f64) -> f64 {
    if label == 1 {
        (1.0 - y_hat).powi(2)
    } else {
        (y_hat - margin).max(0.0).powi(2)
    }
}

/// Derivative of [`contrastive_loss`] with respect to `y_hat`.
pub fn loss_grad(y_hat: f64, label: u8, margin: f64) -> f64 {
    if label == 1 {
        -2.0 * (1.0 - y_hat)
    } else if y_hat > margin {
        2.0 * (y_hat - margin)
    } else {
        0.0
    }
}

/// Row-major `rows x cols` weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
}

impl Layer {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum())
            .collect()
    }

    fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, &gi) in self.weights.chunks_exact(self.cols).zip(g) {
            if gi != 0.0 {
                for (o, w) in out.iter_mut().zip(row) {
                    *o += gi * w;
                }
            }
        }
        out
    }
}

/// Activations of one siamese branch.
#[derive(Debug, Clone)]
pub struct Branch {
    pub node: NodeId,
    pub x: Vec<f64>,
    /// Pre-activation of every hidden layer.
    pub pre: Vec<Vec<f64>>,
    /// ReLU output of every hidden layer.
    pub act: Vec<Vec<f64>>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub source: Branch,
    pub target: Branch,
    pub v_r: Vec<f64>,
    pub y_hat: f64,
}

/// Gradients in the model's parameter layout. Input rows are sparse.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub inputs: BTreeMap<NodeId, Vec<f64>>,
    pub layers: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros(model: &DirectionModel) -> Self {
        Self {
            inputs: BTreeMap::new(),
            layers: model
                .layers
                .iter()
                .map(|l| vec![0.0; l.weights.len()])
                .collect(),
        }
    }

    fn add(&mut self, other: &Gradients) {
        for (node, g) in &other.inputs {
            let row = self
                .inputs
                .entry(*node)
                .or_insert_with(|| vec![0.0; g.len()]);
            row.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        for (mine, theirs) in self.layers.iter_mut().zip(&other.layers) {
            mine.iter_mut().zip(theirs).for_each(|(a, b)| *a += b);
        }
    }

    /// Dense copy in [`DirectionModel::parameters_mut`] order.
    pub fn to_dense(&self, model: &DirectionModel) -> Vec<Vec<f64>> {
        let k = model.config.input_dim;
        let mut inputs = vec![0.0; model.node_count * k];
        for (node, g) in &self.inputs {
            inputs[node * k..(node + 1) * k].copy_from_slice(g);
        }
        std::iter::once(inputs)
            .chain(self.layers.iter().cloned())
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.inputs.values().flatten().all(|&g| g == 0.0)
            && self.layers.iter().flatten().all(|&g| g == 0.0)
    }
}

/// Per-epoch training summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub pairs_seen: usize,
}

impl fmt::Display for TrainStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch {}: mean loss {:.6} over {} pairs",
            self.epoch, self.mean_loss, self.pairs_seen
        )
    }
}

/// Pairs accumulated sequentially per rayon task; chunk sums are then added in
/// chunk order, so batch gradients do not depend on the thread count.
const GRAD_CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionModel {
    config: ModelConfig,
    node_count: usize,
    inputs: Vec<f64>,
    layers: Vec<Layer>,
    reference: Vec<f64>,
    frame: ConstantFrame,
    epochs_trained: usize,
}

impl DirectionModel {
    /// Seeded initialization: inputs uniform in `[-1, 1]`, weights uniform in
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn new(node_count: usize, config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = seed::rng(seed::item_seed(config.rng_seed, 0));
        let k = config.input_dim;
        let inputs = (0..node_count * k)
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        let mut sizes = vec![k];
        sizes.extend(&config.hidden_dims);
        sizes.push(config.embed_dim);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (cols, rows) = (w[0], w[1]);
                let bound = 1.0 / (cols as f64).sqrt();
                Layer {
                    rows,
                    cols,
                    weights: (0..rows * cols)
                        .map(|_| rng.random_range(-bound..=bound))
                        .collect(),
                }
            })
            .collect();
        let n = config.embed_dim;
        let raw: Vec<f64> = match config.reference_seed {
            None => vec![1.0; n],
            Some(s) => {
                let mut r = seed::rng(s);
                (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
            }
        };
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        let reference = raw.iter().map(|x| x / norm).collect();
        let frame = ConstantFrame::new(n, seed::item_seed(config.rng_seed, 1))?;
        Ok(Self {
            config,
            node_count,
            inputs,
            layers,
            reference,
            frame,
            epochs_trained: 0,
        })
    }

    pub(crate) fn from_parts(
        config: ModelConfig,
        node_count: usize,
        inputs: Vec<f64>,
        layers: Vec<Layer>,
        reference: Vec<f64>,
        frame: ConstantFrame,
        epochs_trained: usize,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let bad = |m: &str| Err(ModelError::Config(m.to_owned()));
        if inputs.len() != node_count * config.input_dim {
            return bad("input table shape does not match node count and input dim");
        }
        let mut prev = config.input_dim;
        let sizes: Vec<usize> = config
            .hidden_dims
            .iter()
            .copied()
            .chain([config.embed_dim])
            .collect();
        if layers.len() != sizes.len() {
            return bad("layer count does not match hidden dims");
        }
        for (layer, &rows) in layers.iter().zip(&sizes) {
            if layer.rows != rows || layer.cols != prev || layer.weights.len() != rows * prev {
                return bad("weight shapes do not chain from input to embedding");
            }
            prev = rows;
        }
        if reference.len() != config.embed_dim || reference.iter().all(|&x| x == 0.0) {
            return bad("reference vector must be non-zero with embedding length");
        }
        if frame.dim() != config.embed_dim {
            return bad("constant frame dimension differs from embedding dimension");
        }
        Ok(Self {
            config,
            node_count,
            inputs,
            layers,
            reference,
            frame,
            epochs_trained,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Overrides the training hyperparameters (not the architecture), for
    /// instance when resuming with a different learning rate or epoch count.
    pub fn set_training_params(
        &mut self,
        learning_rate: f64,
        batch_size: usize,
        epochs: usize,
    ) -> Result<(), ModelError> {
        let mut cfg = self.config.clone();
        cfg.learning_rate = learning_rate;
        cfg.batch_size = batch_size;
        cfg.epochs = epochs;
        cfg.validate()?;
        self.config = cfg;
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn frame(&self) -> &ConstantFrame {
        &self.frame
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn epochs_trained(&self) -> usize {
        self.epochs_trained
    }

    /// Mutable parameter groups: the input table, then each layer.
    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        std::iter::once(self.inputs.as_mut_slice())
            .chain(self.layers.iter_mut().map(|l| l.weights.as_mut_slice()))
            .collect()
    }

    fn check_node(&self, node: NodeId) -> Result<(), ModelError> {
        if node >= self.node_count {
            return Err(ModelError::UnknownNode {
                node,
                node_count: self.node_count,
            });
        }
        Ok(())
    }

    fn branch(&self, node: NodeId) -> Branch {
        let k = self.config.input_dim;
        let x = self.inputs[node * k..(node + 1) * k].to_vec();
        let hidden = self.layers.len() - 1;
        let mut pre = Vec::with_capacity(hidden);
        let mut act: Vec<Vec<f64>> = Vec::with_capacity(hidden);
        for layer in &self.layers[..hidden] {
            let z = layer.apply(act.last().unwrap_or(&x));
            act.push(z.iter().map(|&v| v.max(0.0)).collect());
            pre.push(z);
        }
        let v = self.layers[hidden].apply(act.last().unwrap_or(&x));
        Branch {
            node,
            x,
            pre,
            act,
            v,
        }
    }

    /// Direction embedding of one node.
    pub fn embed(&self, node: NodeId) -> Result<Vec<f64>, ModelError> {
        self.check_node(node)?;
        Ok(self.branch(node).v)
    }

    /// Direction embeddings of every node.
    pub fn embed_all(&self) -> EmbeddingTable {
        let n = self.config.embed_dim;
        let data: Vec<f64> = (0..self.node_count)
            .into_par_iter()
            .flat_map_iter(|node| self.branch(node).v)
            .collect();
        if data.is_empty() {
            return EmbeddingTable::zeros(0, n);
        }
        EmbeddingTable::from_flat(n, data)
    }

    /// Cross product of two direction embeddings (with the constant frame).
    pub fn cross(&self, v_s: &[f64], v_t: &[f64]) -> Result<Vec<f64>, ModelError> {
        Ok(crossprod::cross_n(&self.frame.operands(v_s, v_t))?)
    }

    /// `y_hat` from precomputed direction embeddings.
    pub fn score_embeddings(&self, v_s: &[f64], v_t: &[f64]) -> Result<f64, ModelError> {
        let v_r = self.cross(v_s, v_t)?;
        Ok(crossprod::scaled_cosine(&v_r, &self.reference, EPS)?)
    }

    pub fn forward(&self, source: NodeId, target: NodeId) -> Result<ForwardCache, ModelError> {
        self.check_node(source)?;
        self.check_node(target)?;
        let src = self.branch(source);
        let dst = self.branch(target);
        let v_r = self.cross(&src.v, &dst.v)?;
        let y_hat = crossprod::scaled_cosine(&v_r, &self.reference, EPS)?;
        Ok(ForwardCache {
            source: src,
            target: dst,
            v_r,
            y_hat,
        })
    }

    pub fn predict(&self, source: NodeId, target: NodeId) -> Result<f64, ModelError> {
        Ok(self.forward(source, target)?.y_hat)
    }

    /// 1 when `y_hat > threshold` (strict), else 0.
    pub fn predict_direction(
        &self,
        source: NodeId,
        target: NodeId,
        threshold: f64,
    ) -> Result<u8, ModelError> {
        Ok(u8::from(self.predict(source, target)? > threshold))
    }

    pub fn loss(&self, pair: &LabeledPair) -> Result<f64, ModelError> {
        let y_hat = self.predict(pair.source, pair.target)?;
        Ok(contrastive_loss(y_hat, pair.label, self.config.margin))
    }

    /// Mean contrastive loss over `pairs` at the current parameters.
    pub fn mean_loss(&self, pairs: &[LabeledPair]) -> Result<f64, ModelError> {
        if pairs.is_empty() {
            return Err(ModelError::NoPairs);
        }
        let total = pairs
            .par_iter()
            .map(|p| self.loss(p))
            .collect::<Result<Vec<f64>, _>>()?
            .into_iter()
            .sum::<f64>();
        Ok(total / pairs.len() as f64)
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<(), ModelError> {
        let hidden = &self.config.hidden_dims;
        let ok = |b: &Branch| {
            b.node < self.node_count
                && b.x.len() == self.config.input_dim
                && b.v.len() == self.config.embed_dim
                && b.pre.len() == hidden.len()
                && b.act.len() == hidden.len()
                && b.pre.iter().zip(hidden).all(|(p, &h)| p.len() == h)
                && b.act.iter().zip(hidden).all(|(a, &h)| a.len() == h)
        };
        if ok(&cache.source) && ok(&cache.target) && cache.v_r.len() == self.config.embed_dim {
            Ok(())
        } else {
            Err(ModelError::StaleCache)
        }
    }

    fn backprop_branch(&self, branch: &Branch, grad_v: Vec<f64>, out: &mut Gradients) {
        let mut g = grad_v;
        for l in (0..self.layers.len()).rev() {
            let input = if l == 0 {
                &branch.x
            } else {
                &branch.act[l - 1]
            };
            let layer = &self.layers[l];
            let gw = &mut out.layers[l];
            for (row, &gi) in gw.chunks_exact_mut(layer.cols).zip(&g) {
                if gi != 0.0 {
                    for (w, a) in row.iter_mut().zip(input) {
                        *w += gi * a;
                    }
                }
            }
            let mut g_in = layer.apply_transpose(&g);
            if l > 0 {
                for (gi, &z) in g_in.iter_mut().zip(&branch.pre[l - 1]) {
                    if z <= 0.0 {
                        *gi = 0.0;
                    }
                }
            } else {
                let row = out
                    .inputs
                    .entry(branch.node)
                    .or_insert_with(|| vec![0.0; g_in.len()]);
                row.iter_mut().zip(&g_in).for_each(|(a, b)| *a += b);
            }
            g = g_in;
        }
    }

    /// Gradients contributed separately through the source branch and the
    /// target branch. Their sum is the full gradient of `grad_out * y_hat`.
    pub fn backward_parts(
        &self,
        cache: &ForwardCache,
        grad_out: f64,
    ) -> Result<[Gradients; 2], ModelError> {
        self.check_cache(cache)?;
        let mut parts = [Gradients::zeros(self), Gradients::zeros(self)];
        if grad_out == 0.0 {
            return Ok(parts);
        }
        let g_vr: Vec<f64> = crossprod::scaled_cosine_grad(&cache.v_r, &self.reference, EPS)?
            .into_iter()
            .map(|g| g * grad_out)
            .collect();
        if g_vr.iter().all(|&g| g == 0.0) {
            return Ok(parts);
        }
        let ops = self.frame.operands(&cache.source.v, &cache.target.v);
        let g_vs = crossprod::cross_n_vjp(&ops, 0, &g_vr)?;
        let g_vt = crossprod::cross_n_vjp(&ops, 1, &g_vr)?;
        let [src, dst] = &mut parts;
        self.backprop_branch(&cache.source, g_vs, src);
        self.backprop_branch(&cache.target, g_vt, dst);
        Ok(parts)
    }

    /// Gradient of `grad_out * y_hat` with respect to every parameter.
    pub fn backward(&self, cache: &ForwardCache, grad_out: f64) -> Result<Gradients, ModelError> {
        let [mut a, b] = self.backward_parts(cache, grad_out)?;
        a.add(&b);
        Ok(a)
    }

    /// Loss and parameter gradient for one labeled pair.
    pub fn pair_gradient(&self, pair: &LabeledPair) -> Result<(f64, Gradients), ModelError> {
        let mut g = Gradients::zeros(self);
        let loss = self.accumulate_pair(pair, &mut g)?;
        Ok((loss, g))
    }

    /// Adds the loss gradient of `pair` to `acc` and returns the loss.
    fn accumulate_pair(&self, pair: &LabeledPair, acc: &mut Gradients) -> Result<f64, ModelError> {
        let cache = self.forward(pair.source, pair.target)?;
        let margin = self.config.margin;
        let loss = contrastive_loss(cache.y_hat, pair.label, margin);
        let grad_out = loss_grad(cache.y_hat, pair.label, margin);
        if grad_out == 0.0 {
            return Ok(loss);
        }
        let g_vr: Vec<f64> = crossprod::scaled_cosine_grad(&cache.v_r, &self.reference, EPS)?
            .into_iter()
            .map(|g| g * grad_out)
            .collect();
        if g_vr.iter().all(|&g| g == 0.0) {
            return Ok(loss);
        }
        let ops = self.frame.operands(&cache.source.v, &cache.target.v);
        let g_vs = crossprod::cross_n_vjp(&ops, 0, &g_vr)?;
        let g_vt = crossprod::cross_n_vjp(&ops, 1, &g_vr)?;
        self.backprop_branch(&cache.source, g_vs, acc);
        self.backprop_branch(&cache.target, g_vt, acc);
        Ok(loss)
    }

    /// Summed loss and gradient over a batch. Pairs are accumulated in sorted
    /// order, so the result does not depend on the order of `batch`.
    pub fn batch_gradient(&self, batch: &[LabeledPair]) -> Result<(f64, Gradients), ModelError> {
        let mut sorted = batch.to_vec();
        sorted.sort_unstable();
        let chunks = sorted
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| {
                let mut acc = Gradients::zeros(self);
                let mut loss = 0.0;
                for pair in chunk {
                    loss += self.accumulate_pair(pair, &mut acc)?;
                }
                Ok((loss, acc))
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        let mut total = Gradients::zeros(self);
        let mut loss = 0.0;
        for (l, g) in &chunks {
            loss += l;
            total.add(g);
        }
        Ok((loss, total))
    }

    fn apply_gradients(&mut self, grads: &Gradients, scale: f64) {
        let k = self.config.input_dim;
        for (node, g) in &grads.inputs {
            for (p, d) in self.inputs[node * k..(node + 1) * k].iter_mut().zip(g) {
                *p -= scale * d;
            }
        }
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (p, d) in layer.weights.iter_mut().zip(g) {
                *p -= scale * d;
            }
        }
    }

    fn check_pairs(&self, pairs: &[LabeledPair]) -> Result<(), ModelError> {
        if pairs.is_empty() {
            return Err(ModelError::NoPairs);
        }
        for p in pairs {
            self.check_node(p.source)?;
            self.check_node(p.target)?;
        }
        Ok(())
    }

    /// Mini-batch gradient descent for `config.epochs` epochs, continuing the
    /// epoch count of a resumed model. Each batch applies the mean gradient.
    /// The shuffle of epoch `e` is seeded from `(rng_seed, e)`.
    pub fn train(&mut self, pairs: &[LabeledPair]) -> Result<Vec<TrainStats>, ModelError> {
        self.train_epochs(pairs, self.config.epochs)
    }

    pub fn train_epochs(
        &mut self,
        pairs: &[LabeledPair],
        epochs: usize,
    ) -> Result<Vec<TrainStats>, ModelError> {
        self.check_pairs(pairs)?;
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        let mut stats = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            let epoch = self.epochs_trained + 1;
            let mut rng = seed::rng(seed::item_seed(self.config.rng_seed, 1_000 + epoch as u64));
            order.sort_unstable();
            order.shuffle(&mut rng);
            let mut total = 0.0;
            let mut batch = Vec::with_capacity(self.config.batch_size);
            for (b, idx) in order.chunks(self.config.batch_size).enumerate() {
                batch.clear();
                batch.extend(idx.iter().map(|&i| pairs[i]));
                let (loss, grads) = self.batch_gradient(&batch)?;
                if !loss.is_finite() {
                    let pair = batch
                        .iter()
                        .copied()
                        .find(|p| !self.loss(p).map(f64::is_finite).unwrap_or(false))
                        .unwrap_or(batch[0]);
                    return Err(ModelError::NonFinite {
                        epoch,
                        batch: b,
                        pair,
                    });
                }
                total += loss;
                self.apply_gradients(&grads, self.config.learning_rate / batch.len() as f64);
            }
            self.epochs_trained = epoch;
            let s = TrainStats {
                epoch,
                mean_loss: total / pairs.len() as f64,
                pairs_seen: pairs.len(),
            };
            info!("{s}");
            stats.push(s);
        }
        Ok(stats)
    }
}
