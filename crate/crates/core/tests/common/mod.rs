#![allow(dead_code)]

use std::collections::VecDeque;

use greed::graph::{DirectedGraph, NodeId};

/// Determinant by Laplace expansion along the first row.
pub fn laplace_det(m: &[Vec<f64>]) -> f64 {
    match m.len() {
        0 => 1.0,
        1 => m[0][0],
        n => (0..n)
            .map(|j| {
                let minor: Vec<Vec<f64>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|&(c, _)| c != j)
                            .map(|(_, &v)| v)
                            .collect()
                    })
                    .collect();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[0][j] * laplace_det(&minor)
            })
            .sum(),
    }
}

/// Generalized cross product of `dim - 1` operands: the vector whose dot
/// product with any `w` equals `det([w; operands])`.
pub fn oracle_cross(ops: &[Vec<f64>]) -> Vec<f64> {
    let dim = ops.len() + 1;
    (0..dim)
        .map(|i| {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            let mut rows = vec![e];
            rows.extend(ops.iter().cloned());
            laplace_det(&rows)
        })
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `(1 + cos) / 2`, 0.5 when `v_r` is (near) zero.
pub fn oracle_scaled_cosine(v_r: &[f64], v_d: &[f64]) -> f64 {
    let nr = norm(v_r);
    if nr < 1e-12 {
        return 0.5;
    }
    let c = (dot(v_r, v_d) / (nr * norm(v_d))).clamp(-1.0, 1.0);
    (1.0 + c) / 2.0
}

/// Minimum hop distance from `s` to every node, `usize::MAX` if unreachable.
pub fn hop_distances(g: &DirectedGraph, s: NodeId) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.node_count()];
    dist[s] = 0;
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        for &v in g.successors(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Layered random DAG: `n / width` layers of `width` nodes. Every node links
/// to `deg` distinct nodes of the next layer and, with probability `skip`, to
/// one node two layers ahead.
pub fn layered_dag(n: usize, width: usize, deg: usize, skip: f64, seed: u64) -> DirectedGraph {
    use rand::seq::index;
    use rand::Rng;
    let mut rng = greed::seed::rng(seed);
    let layers = n / width;
    let mut edges = Vec::new();
    for l in 0..layers.saturating_sub(1) {
        for i in 0..width {
            let u = l * width + i;
            for j in index::sample(&mut rng, width, deg) {
                edges.push((u, (l + 1) * width + j));
            }
            if l + 2 < layers && rng.random_bool(skip) {
                edges.push((u, (l + 2) * width + rng.random_range(0..width)));
            }
        }
    }
    DirectedGraph::from_edges(n, edges).expect("valid edges")
}

/// Direction score of `(s, t)` recomputed from dense parameter groups
/// (inputs, then one weight matrix per layer). The source branch reads
/// `src`, the target branch reads `dst`; pass the same groups for the model
/// as trained.
pub fn oracle_y_hat(
    model: &greed::DirectionModel,
    src: &[Vec<f64>],
    dst: &[Vec<f64>],
    s: NodeId,
    t: NodeId,
) -> f64 {
    let branch = |params: &[Vec<f64>], node: NodeId| -> Vec<f64> {
        let k = model.config().input_dim;
        let mut h = params[0][node * k..(node + 1) * k].to_vec();
        let layers = model.layers();
        for (l, layer) in layers.iter().enumerate() {
            let w = &params[l + 1];
            let z: Vec<f64> = (0..layer.rows)
                .map(|r| dot(&w[r * layer.cols..(r + 1) * layer.cols], &h))
                .collect();
            h = if l + 1 < layers.len() {
                z.into_iter().map(|v| v.max(0.0)).collect()
            } else {
                z
            };
        }
        h
    };
    let mut ops = vec![branch(src, s), branch(dst, t)];
    ops.extend(model.frame().vectors().iter().cloned());
    oracle_scaled_cosine(&oracle_cross(&ops), model.reference())
}

pub fn oracle_loss(y_hat: f64, label: u8, margin: f64) -> f64 {
    if label == 1 {
        (1.0 - y_hat).powi(2)
    } else {
        (y_hat - margin).max(0.0).powi(2)
    }
}

/// Dense parameter groups of `model`, in `Gradients::to_dense` order.
pub fn dense_params(model: &greed::DirectionModel) -> Vec<Vec<f64>> {
    std::iter::once(model.inputs().to_vec())
        .chain(model.layers().iter().map(|l| l.weights.clone()))
        .collect()
}

/// Relative error with a floor on the denominator so that near-zero
/// gradients are compared absolutely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

/// Central-difference gradient of the contrastive loss of `pair` with respect
/// to every dense parameter, and the largest relative error against
/// `analytic` (also dense).
pub fn fd_max_error(
    model: &greed::DirectionModel,
    pair: &greed::graph::LabeledPair,
    analytic: &[Vec<f64>],
    step: f64,
) -> f64 {
    let margin = model.config().margin;
    let base = dense_params(model);
    let loss = |p: &[Vec<f64>]| {
        oracle_loss(
            oracle_y_hat(model, p, p, pair.source, pair.target),
            pair.label,
            margin,
        )
    };
    let mut worst: f64 = 0.0;
    let mut params = base.clone();
    for g in 0..base.len() {
        for i in 0..base[g].len() {
            params[g][i] = base[g][i] + step;
            let plus = loss(&params);
            params[g][i] = base[g][i] - step;
            let minus = loss(&params);
            params[g][i] = base[g][i];
            worst = worst.max(rel_err(analytic[g][i], (plus - minus) / (2.0 * step)));
        }
    }
    worst
}
