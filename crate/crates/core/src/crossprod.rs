//! Cross products and the scaled cosine head.
//!
//! The N-dimensional cross product takes `N - 1` operands in `R^N`. Component
//! `i` is the signed cofactor of the formal determinant whose first row is the
//! basis `(e_0, ..., e_{N-1})` and whose remaining rows are the operands in
//! order:
//!
//! ```text
//! out[i] = (-1)^i * det(operands with column i removed)
//! ```
//!
//! For `N = 3` this is the right-handed product `a x b`. Swapping any two
//! operands swaps two determinant rows and negates the output, which is the
//! property the direction model is built on.

use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::seed;

/// Norm guard on the cross product output. Below it, predictions are the
/// neutral 0.5 and gradients are zero.
pub const EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum CrossError {
    #[error("cross product in dimension {dim} needs {} operands, got {got}", dim - 1)]
    OperandCount { dim: usize, got: usize },
    #[error("operand {index} has length {len}, expected {dim}")]
    OperandDim {
        index: usize,
        len: usize,
        dim: usize,
    },
    #[error("cross product needs dimension >= 3, got {0}")]
    DimTooSmall(usize),
    #[error("operand index {index} out of range for {count} operands")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("reference vector has zero norm")]
    ZeroReference,
    #[error("vectors have lengths {0} and {1}")]
    LengthMismatch(usize, usize),
}

/// Right-handed 3-D cross product.
pub fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        -(a[0] * b[2] - a[2] * b[0]),
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn check_operands<V: AsRef<[f64]>>(operands: &[V]) -> Result<usize, CrossError> {
    let dim = operands.len() + 1;
    if dim < 3 {
        return Err(CrossError::DimTooSmall(dim));
    }
    for (index, op) in operands.iter().enumerate() {
        let len = op.as_ref().len();
        if len != dim {
            return Err(CrossError::OperandDim { index, len, dim });
        }
    }
    Ok(dim)
}

/// Determinant of a square row-major matrix. Closed forms for sizes up to 3,
/// Gaussian elimination with partial pivoting beyond.
fn det(m: &mut [f64], n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        3 => {
            m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
                + m[2] * (m[3] * m[7] - m[4] * m[6])
        }
        _ => {
            let mut sign = 1.0;
            for col in 0..n {
                let pivot = (col..n)
                    .max_by(|&a, &b| m[a * n + col].abs().total_cmp(&m[b * n + col].abs()))
                    .unwrap();
                if m[pivot * n + col] == 0.0 {
                    return 0.0;
                }
                if pivot != col {
                    for k in 0..n {
                        m.swap(pivot * n + k, col * n + k);
                    }
                    sign = -sign;
                }
                let p = m[col * n + col];
                for row in col + 1..n {
                    let f = m[row * n + col] / p;
                    if f != 0.0 {
                        for k in col..n {
                            m[row * n + k] -= f * m[col * n + k];
                        }
                    }
                }
            }
            (0..n).fold(sign, |acc, i| acc * m[i * n + i])
        }
    }
}

/// Cofactor expansion given operand rows, without validation.
fn cross_rows<V: AsRef<[f64]>>(operands: &[V], dim: usize, out: &mut [f64]) {
    let k = dim - 1;
    let mut minor = vec![0.0; k * k];
    for (i, slot) in out.iter_mut().enumerate() {
        for (r, op) in operands.iter().enumerate() {
            let op = op.as_ref();
            let row = &mut minor[r * k..(r + 1) * k];
            row[..i].copy_from_slice(&op[..i]);
            row[i..].copy_from_slice(&op[i + 1..]);
        }
        let d = det(&mut minor, k);
        *slot = if i % 2 == 0 { d } else { -d };
    }
}

/// Generalized cross product of `dim - 1` operands of length `dim`.
pub fn cross_n<V: AsRef<[f64]>>(operands: &[V]) -> Result<Vec<f64>, CrossError> {
    let dim = check_operands(operands)?;
    let mut out = vec![0.0; dim];
    cross_rows(operands, dim, &mut out);
    Ok(out)
}

/// Jacobian of [`cross_n`] with respect to operand `index`, row-major
/// `dim x dim`. Column `j` is the cross product with that operand replaced by
/// the basis vector `e_j`; the product is linear in each operand, so this is
/// exact.
pub fn cross_n_jacobian<V: AsRef<[f64]>>(
    operands: &[V],
    index: usize,
) -> Result<Vec<f64>, CrossError> {
    let dim = check_operands(operands)?;
    if index >= operands.len() {
        return Err(CrossError::IndexOutOfRange {
            index,
            count: operands.len(),
        });
    }
    let mut rows: Vec<Vec<f64>> = operands.iter().map(|o| o.as_ref().to_vec()).collect();
    let mut jac = vec![0.0; dim * dim];
    let mut col = vec![0.0; dim];
    for j in 0..dim {
        rows[index].iter_mut().for_each(|x| *x = 0.0);
        rows[index][j] = 1.0;
        cross_rows(&rows, dim, &mut col);
        for (i, &c) in col.iter().enumerate() {
            jac[i * dim + j] = c;
        }
    }
    Ok(jac)
}

/// `J^T g` for the Jacobian with respect to operand `index`: the gradient of
/// `g . cross_n(operands)` with respect to that operand.
pub fn cross_n_vjp<V: AsRef<[f64]>>(
    operands: &[V],
    index: usize,
    grad: &[f64],
) -> Result<Vec<f64>, CrossError> {
    let dim = check_operands(operands)?;
    if grad.len() != dim {
        return Err(CrossError::LengthMismatch(grad.len(), dim));
    }
    if dim == 3 {
        // d(g . (a x b))/da = b x g and d/db = g x a.
        let a = as3(operands[0].as_ref());
        let b = as3(operands[1].as_ref());
        let g = as3(grad);
        return match index {
            0 => Ok(cross3(&b, &g).to_vec()),
            1 => Ok(cross3(&g, &a).to_vec()),
            _ => Err(CrossError::IndexOutOfRange { index, count: 2 }),
        };
    }
    let jac = cross_n_jacobian(operands, index)?;
    Ok((0..dim)
        .map(|j| (0..dim).map(|i| jac[i * dim + j] * grad[i]).sum())
        .collect())
}

fn as3(v: &[f64]) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_head(v_r: &[f64], v_d: &[f64]) -> Result<f64, CrossError> {
    if v_r.len() != v_d.len() {
        return Err(CrossError::LengthMismatch(v_r.len(), v_d.len()));
    }
    let nd = norm(v_d);
    if nd == 0.0 {
        return Err(CrossError::ZeroReference);
    }
    Ok(nd)
}

/// `(1 + cos(v_d, v_r)) / 2`, or exactly 0.5 when `||v_r|| < eps`.
pub fn scaled_cosine(v_r: &[f64], v_d: &[f64], eps: f64) -> Result<f64, CrossError> {
    let nd = check_head(v_r, v_d)?;
    let nr = norm(v_r);
    if nr < eps {
        return Ok(0.5);
    }
    let cos = (dot(v_d, v_r) / (nd * nr)).clamp(-1.0, 1.0);
    Ok((1.0 + cos) / 2.0)
}

/// Gradient of [`scaled_cosine`] with respect to `v_r`:
/// `(v_d / (|v_d| |v_r|) - v_r cos / |v_r|^2) / 2`, zero below `eps`.
pub fn scaled_cosine_grad(v_r: &[f64], v_d: &[f64], eps: f64) -> Result<Vec<f64>, CrossError> {
    let nd = check_head(v_r, v_d)?;
    let nr = norm(v_r);
    if nr < eps {
        return Ok(vec![0.0; v_r.len()]);
    }
    let cos = dot(v_d, v_r) / (nd * nr);
    Ok(v_r
        .iter()
        .zip(v_d)
        .map(|(&r, &d)| 0.5 * (d / (nd * nr) - r * cos / (nr * nr)))
        .collect())
}

/// `dim - 3` fixed, mutually independent vectors that fill the extra operand
/// slots of the N-D cross product after source and target.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantFrame {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

impl ConstantFrame {
    /// Samples standard normal vectors from `rng_seed`, resampling until
    /// they have full rank.
    pub fn new(dim: usize, rng_seed: u64) -> Result<Self, CrossError> {
        if dim < 3 {
            return Err(CrossError::DimTooSmall(dim));
        }
        let count = dim - 3;
        let mut rng = seed::rng(rng_seed);
        loop {
            let vectors: Vec<Vec<f64>> = (0..count)
                .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
                .collect();
            if rank(&vectors, dim) == count {
                return Ok(Self { dim, vectors });
            }
        }
    }

    /// Frame from explicit vectors; fails if they are not `dim - 3`
    /// independent vectors of length `dim`.
    pub fn from_vectors(dim: usize, vectors: Vec<Vec<f64>>) -> Result<Self, CrossError> {
        if dim < 3 {
            return Err(CrossError::DimTooSmall(dim));
        }
        if vectors.len() != dim - 3 {
            return Err(CrossError::OperandCount {
                dim,
                got: vectors.len() + 2,
            });
        }
        if let Some((index, v)) = vectors.iter().enumerate().find(|(_, v)| v.len() != dim) {
            return Err(CrossError::OperandDim {
                index: index + 2,
                len: v.len(),
                dim,
            });
        }
        if rank(&vectors, dim) != vectors.len() {
            return Err(CrossError::OperandCount {
                dim,
                got: rank(&vectors, dim) + 2,
            });
        }
        Ok(Self { dim, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// Operand list `(source, target, c_1, ..., c_{dim-3})`.
    pub fn operands<'a>(&'a self, source: &'a [f64], target: &'a [f64]) -> Vec<&'a [f64]> {
        let mut ops = Vec::with_capacity(self.dim - 1);
        ops.push(source);
        ops.push(target);
        ops.extend(self.vectors.iter().map(Vec::as_slice));
        ops
    }
}

/// Numerical rank by Gaussian elimination with a relative tolerance.
fn rank(rows: &[Vec<f64>], dim: usize) -> usize {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let scale = m
        .iter()
        .flatten()
        .fold(0.0f64, |acc, x| acc.max(x.abs()))
        .max(1.0);
    let tol = 1e-10 * scale;
    let mut rank = 0;
    for col in 0..dim {
        let Some(pivot) =
            (rank..m.len()).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
        else {
            break;
        };
        if m[pivot][col].abs() <= tol {
            continue;
        }
        m.swap(rank, pivot);
        let (top, below) = m.split_at_mut(rank + 1);
        let lead = &top[rank];
        for row in below {
            let f = row[col] / lead[col];
            for (x, &y) in row[col..dim].iter_mut().zip(&lead[col..dim]) {
                *x -= f * y;
            }
        }
        rank += 1;
    }
    rank
}
