//! Directed graph node embeddings that encode edge direction.
//!
//! Two embeddings are learned for every node. A proximity embedding comes from
//! skip-gram training on undirected random walks and says whether two nodes
//! are close. A direction embedding comes from a siamese network whose two
//! outputs are combined with the (generalized) cross product; the alignment of
//! that product with a fixed reference vector says which way the edge points.
//! Because the cross product is anti-commutative, the prediction for `(s, t)`
//! and `(t, s)` always sums to one.
//!
//! The crate is split along the pipeline:
//!
//! * [`graph`]: edge list ingestion, train/test splits, negative edges, walks
//!   and direction training pairs.
//! * [`crossprod`]: 3-D and N-D cross products, their Jacobians and the scaled
//!   cosine head.
//! * [`proximity`]: skip-gram proximity embeddings and threshold selection.
//! * [`direction`]: the siamese direction model with hand-written backprop.
//! * [`evaluate`]: ROC-AUC link prediction and top-k recommendation metrics.

pub mod crossprod;
pub mod direction;
pub mod evaluate;
pub mod graph;
pub mod proximity;
pub mod seed;

pub use crossprod::{ConstantFrame, CrossError, EPS};
pub use direction::{DirectionModel, ModelConfig, ModelError, TrainStats};
pub use evaluate::{EvalError, MetricsReport, ScoredPair};
pub use graph::{
    DatasetType, DirectedGraph, GraphError, IdMap, LabeledPair, NodeId, SplitSpec, WalkConfig,
};
pub use proximity::{EmbeddingTable, ProximityError, SkipGramConfig};
