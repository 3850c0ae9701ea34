//! Directed graph structure, ingestion, splits and training-pair generation.

mod io;
mod split;
mod walks;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

pub use io::{
    load_edge_list, read_dense_edge_list, read_id_map, read_pairs, write_edge_list, write_id_map,
    write_pairs, IdMap, LoadedGraph,
};
pub use split::{
    build_test_set, build_test_sets, sample_non_edges, split_edges, validation_pairs,
    validation_split,
};
pub use walks::{bounded_reach, build_direction_pairs, generate_walks, DIRECTION_BFS_LIMIT};

/// Dense 0-based node id.
pub type NodeId = usize;

#[derive(Debug, Error)]
pub enum GraphError {
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
    #[error("graph has no edges after removing {self_loops} self-loop(s)")]
    Empty { self_loops: usize },
    #[error("test fraction {fraction} of {edges} edge(s) yields no test edges")]
    NoTestEdges { fraction: f64, edges: usize },
    #[error("test fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("gave up sampling non-edges: found {found} of {wanted} after {attempts} attempts")]
    TooDense {
        found: usize,
        wanted: usize,
        attempts: usize,
    },
    #[error("node {node} out of range for a graph with {node_count} node(s)")]
    UnknownNode { node: NodeId, node_count: usize },
    #[error("self-pair ({0}, {0}) is not a valid labeled pair")]
    SelfPair(NodeId),
    #[error("test positives must be non-empty and labeled 1")]
    BadPositives,
    #[error("{0}")]
    Config(String),
}

/// Immutable directed graph with sorted forward and reverse adjacency.
///
/// Invariants: no self-loops, no duplicate entries, and `v` is in `out_adj[u]`
/// exactly when `u` is in `in_adj[v]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    out_adj: Vec<Vec<NodeId>>,
    in_adj: Vec<Vec<NodeId>>,
    edge_count: usize,
}

impl DirectedGraph {
    /// Builds a graph over `node_count` nodes. Self-loops and duplicate edges
    /// are dropped; endpoints must be `< node_count`.
    pub fn from_edges<I>(node_count: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut out_adj = vec![Vec::new(); node_count];
        for (u, v) in edges {
            for node in [u, v] {
                if node >= node_count {
                    return Err(GraphError::UnknownNode { node, node_count });
                }
            }
            if u != v {
                out_adj[u].push(v);
            }
        }
        Ok(Self::from_out_adj(out_adj))
    }

    fn from_out_adj(mut out_adj: Vec<Vec<NodeId>>) -> Self {
        let mut in_adj = vec![Vec::new(); out_adj.len()];
        let mut edge_count = 0;
        for (u, succ) in out_adj.iter_mut().enumerate() {
            succ.sort_unstable();
            succ.dedup();
            edge_count += succ.len();
            for &v in succ.iter() {
                in_adj[v].push(u);
            }
        }
        // Pushed in increasing `u`, so already sorted.
        Self {
            out_adj,
            in_adj,
            edge_count,
        }
    }

    pub fn node_count(&self) -> usize {
        self.out_adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn successors(&self, u: NodeId) -> &[NodeId] {
        &self.out_adj[u]
    }

    pub fn predecessors(&self, v: NodeId) -> &[NodeId] {
        &self.in_adj[v]
    }

    pub fn out_degree(&self, u: NodeId) -> usize {
        self.out_adj[u].len()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        u < self.out_adj.len() && self.out_adj[u].binary_search(&v).is_ok()
    }

    /// Edges in `(source, target)` lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.out_adj
            .iter()
            .enumerate()
            .flat_map(|(u, succ)| succ.iter().map(move |&v| (u, v)))
    }

    /// Sorted union of successors and predecessors, for every node.
    pub fn undirected_adjacency(&self) -> Vec<Vec<NodeId>> {
        self.out_adj
            .iter()
            .zip(&self.in_adj)
            .map(|(out, inc)| {
                let mut merged = Vec::with_capacity(out.len() + inc.len());
                let (mut i, mut j) = (0, 0);
                while i < out.len() || j < inc.len() {
                    let next = match (out.get(i), inc.get(j)) {
                        (Some(&a), Some(&b)) if a == b => {
                            i += 1;
                            j += 1;
                            a
                        }
                        (Some(&a), Some(&b)) if a < b => {
                            i += 1;
                            a
                        }
                        (Some(_), Some(&b)) => {
                            j += 1;
                            b
                        }
                        (Some(&a), None) => {
                            i += 1;
                            a
                        }
                        (None, Some(&b)) => {
                            j += 1;
                            b
                        }
                        (None, None) => unreachable!(),
                    };
                    merged.push(next);
                }
                merged
            })
            .collect()
    }
}

/// A `(source, target, label)` triple. Label 1 means the directed edge
/// `source -> target` exists, 0 means it does not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabeledPair {
    pub source: NodeId,
    pub target: NodeId,
    pub label: u8,
}

impl LabeledPair {
    pub fn new(source: NodeId, target: NodeId, label: u8) -> Result<Self, GraphError> {
        if source == target {
            return Err(GraphError::SelfPair(source));
        }
        Ok(Self {
            source,
            target,
            label: label.min(1),
        })
    }

    pub(crate) fn pos(source: NodeId, target: NodeId) -> Self {
        debug_assert_ne!(source, target);
        Self {
            source,
            target,
            label: 1,
        }
    }

    pub(crate) fn neg(source: NodeId, target: NodeId) -> Self {
        debug_assert_ne!(source, target);
        Self {
            source,
            target,
            label: 0,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.label == 1
    }
}

/// Test set composition.
///
/// * `Type1`: positives, reverse negatives and random negatives.
/// * `Type2`: positives and reverse negatives.
/// * `Type3`: positives and random negatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DatasetType {
    Type1,
    Type2,
    Type3,
}

impl DatasetType {
    pub const ALL: [DatasetType; 3] = [DatasetType::Type1, DatasetType::Type2, DatasetType::Type3];

    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetType::Type1 => "type1",
            DatasetType::Type2 => "type2",
            DatasetType::Type3 => "type3",
        }
    }
}

impl fmt::Display for DatasetType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetType {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "type1" | "1" => Ok(DatasetType::Type1),
            "type2" | "2" => Ok(DatasetType::Type2),
            "type3" | "3" => Ok(DatasetType::Type3),
            other => Err(GraphError::Config(format!(
                "unknown dataset type '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub rng_seed: u64,
}

impl SplitSpec {
    pub fn new(test_fraction: f64, rng_seed: u64) -> Result<Self, GraphError> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(GraphError::BadFraction(test_fraction));
        }
        Ok(Self {
            test_fraction,
            rng_seed,
        })
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkConfig {
    pub num_walks_per_node: usize,
    pub walk_length: usize,
    /// Hop bound used when building direction training pairs.
    pub max_hop_for_direction: usize,
    pub rng_seed: u64,
}

impl WalkConfig {
    pub fn validate(&self) -> Result<(), GraphError> {
        if self.num_walks_per_node == 0 || self.walk_length == 0 {
            return Err(GraphError::Config(
                "walk count and walk length must be positive".into(),
            ));
        }
        if self.max_hop_for_direction == 0 {
            return Err(GraphError::Config("max hop must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            num_walks_per_node: 40,
            walk_length: 40,
            max_hop_for_direction: 3,
            rng_seed: 0,
        }
    }
}
