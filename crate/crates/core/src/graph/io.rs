use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;

use super::{DirectedGraph, GraphError, LabeledPair, NodeId};

/// Mapping between original node tokens and dense internal ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    originals: Vec<String>,
    index: HashMap<String, NodeId>,
}

impl IdMap {
    pub fn len(&self) -> usize {
        self.originals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.originals.is_empty()
    }

    fn intern(&mut self, token: &str) -> NodeId {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.originals.len();
        self.originals.push(token.to_owned());
        self.index.insert(token.to_owned(), id);
        id
    }

    pub fn original(&self, id: NodeId) -> Option<&str> {
        self.originals.get(id).map(String::as_str)
    }

    pub fn internal(&self, original: &str) -> Option<NodeId> {
        self.index.get(original).copied()
    }
}

/// Result of [`load_edge_list`].
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: DirectedGraph,
    pub ids: IdMap,
    pub self_loops: usize,
    pub duplicates: usize,
}

fn open(path: &Path) -> Result<BufReader<File>, GraphError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| GraphError::Io {
            path: path.to_owned(),
            source,
        })
}

fn create(path: &Path) -> Result<BufWriter<File>, GraphError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| GraphError::Io {
            path: path.to_owned(),
            source,
        })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> GraphError + '_ {
    move |source| GraphError::Io {
        path: path.to_owned(),
        source,
    }
}

fn is_comment(line: &str) -> bool {
    line.is_empty() || line.starts_with('%') || line.starts_with('#')
}

/// Reads a Konect-style edge list: one `src dst` pair per line, `%` or `#`
/// comments. Columns past the second (weights, timestamps) are ignored.
///
/// Tokens are remapped to dense ids in order of first appearance. Duplicate
/// edges collapse and self-loops are dropped; both are counted.
pub fn load_edge_list(path: impl AsRef<Path>) -> Result<LoadedGraph, GraphError> {
    let path = path.as_ref();
    let reader = open(path)?;
    let mut ids = IdMap::default();
    let mut edges = Vec::new();
    let mut self_loops = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let line = line.trim();
        if is_comment(line) {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let (Some(src), Some(dst)) = (tokens.next(), tokens.next()) else {
            return Err(GraphError::Malformed {
                path: path.to_owned(),
                line: lineno + 1,
                message: format!("expected 'source target', got '{line}'"),
            });
        };
        let (u, v) = (ids.intern(src), ids.intern(dst));
        if u == v {
            self_loops += 1;
        } else {
            edges.push((u, v));
        }
    }
    let raw = edges.len();
    let graph = DirectedGraph::from_edges(ids.len(), edges)?;
    if graph.edge_count() == 0 {
        return Err(GraphError::Empty { self_loops });
    }
    let duplicates = raw - graph.edge_count();
    if self_loops > 0 {
        warn!("{}: dropped {self_loops} self-loop(s)", path.display());
    }
    if duplicates > 0 {
        warn!(
            "{}: collapsed {duplicates} duplicate edge(s)",
            path.display()
        );
    }
    Ok(LoadedGraph {
        graph,
        ids,
        self_loops,
        duplicates,
    })
}

/// Writes the graph with internal ids, preceded by a `% nodes N edges M`
/// header so isolated nodes survive a round trip through
/// [`read_dense_edge_list`].
pub fn write_edge_list(graph: &DirectedGraph, path: impl AsRef<Path>) -> Result<(), GraphError> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(
            out,
            "% nodes {} edges {}",
            graph.node_count(),
            graph.edge_count()
        )?;
        for (u, v) in graph.edges() {
            writeln!(out, "{u} {v}")?;
        }
        out.flush()
    };
    write(&mut out).map_err(io_err(path))
}

fn parse_id(path: &Path, lineno: usize, token: &str) -> Result<NodeId, GraphError> {
    token.parse().map_err(|_| GraphError::Malformed {
        path: path.to_owned(),
        line: lineno + 1,
        message: format!("'{token}' is not a node id"),
    })
}

fn node_header(line: &str) -> Option<usize> {
    let mut words = line.trim_start_matches(['%', '#']).split_whitespace();
    while let Some(w) = words.next() {
        if w == "nodes" {
            return words.next()?.parse().ok();
        }
    }
    None
}

/// Reads an edge list whose tokens already are dense internal ids, as written
/// by [`write_edge_list`]. Node count comes from the `% nodes N` header when
/// present, otherwise from the largest id.
pub fn read_dense_edge_list(path: impl AsRef<Path>) -> Result<DirectedGraph, GraphError> {
    let path = path.as_ref();
    let reader = open(path)?;
    let mut declared = None;
    let mut edges = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let line = line.trim();
        if is_comment(line) {
            if declared.is_none() && !line.is_empty() {
                declared = node_header(line);
            }
            continue;
        }
        let mut tokens = line.split_whitespace();
        let (Some(a), Some(b)) = (tokens.next(), tokens.next()) else {
            return Err(GraphError::Malformed {
                path: path.to_owned(),
                line: lineno + 1,
                message: format!("expected 'source target', got '{line}'"),
            });
        };
        edges.push((parse_id(path, lineno, a)?, parse_id(path, lineno, b)?));
    }
    let max_id = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
    let node_count = declared.unwrap_or(0).max(max_id);
    let graph = DirectedGraph::from_edges(node_count, edges)?;
    if graph.edge_count() == 0 {
        return Err(GraphError::Empty { self_loops: 0 });
    }
    Ok(graph)
}

/// Writes `src dst label` lines.
pub fn write_pairs(pairs: &[LabeledPair], path: impl AsRef<Path>) -> Result<(), GraphError> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        for p in pairs {
            writeln!(out, "{} {} {}", p.source, p.target, p.label)?;
        }
        out.flush()
    };
    write(&mut out).map_err(io_err(path))
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<LabeledPair>, GraphError> {
    let path = path.as_ref();
    let reader = open(path)?;
    let mut pairs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let line = line.trim();
        if is_comment(line) {
            continue;
        }
        let malformed = |message: String| GraphError::Malformed {
            path: path.to_owned(),
            line: lineno + 1,
            message,
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let [s, t, label] = tokens[..] else {
            return Err(malformed(format!(
                "expected 'source target label', got '{line}'"
            )));
        };
        let label = match label {
            "0" => 0,
            "1" => 1,
            other => return Err(malformed(format!("label must be 0 or 1, got '{other}'"))),
        };
        let (s, t) = (parse_id(path, lineno, s)?, parse_id(path, lineno, t)?);
        let pair = LabeledPair::new(s, t, label).map_err(|e| malformed(e.to_string()))?;
        pairs.push(pair);
    }
    Ok(pairs)
}

/// Writes `original internal` lines in internal id order.
pub fn write_id_map(ids: &IdMap, path: impl AsRef<Path>) -> Result<(), GraphError> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        for (internal, original) in ids.originals.iter().enumerate() {
            writeln!(out, "{original} {internal}")?;
        }
        out.flush()
    };
    write(&mut out).map_err(io_err(path))
}

pub fn read_id_map(path: impl AsRef<Path>) -> Result<IdMap, GraphError> {
    let path = path.as_ref();
    let reader = open(path)?;
    let mut ids = IdMap::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let line = line.trim();
        if is_comment(line) {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let [original, internal] = tokens[..] else {
            return Err(GraphError::Malformed {
                path: path.to_owned(),
                line: lineno + 1,
                message: format!("expected 'original internal', got '{line}'"),
            });
        };
        let internal = parse_id(path, lineno, internal)?;
        if internal != ids.len() || ids.internal(original).is_some() {
            return Err(GraphError::Malformed {
                path: path.to_owned(),
                line: lineno + 1,
                message: "internal ids must be dense, unique and in order".into(),
            });
        }
        ids.intern(original);
    }
    Ok(ids)
}
