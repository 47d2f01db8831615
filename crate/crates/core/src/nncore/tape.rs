//! Reverse-mode tape over dense double-precision tensors of rank at most
//! three. Recording order is the topological order; the backward pass
//! visits nodes exactly once in reverse.
//!
//! Vectors are `[n, 1]` matrices and scalars have shape `[1]`. In debug
//! builds every op asserts its output is finite.

use super::kernels::{gelu, gelu_prime, gemm_nn, gemm_nt, gemm_tn, sigmoid, softplus};

pub const LAYERNORM_EPS: f64 = 1e-5;

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddRow(Var, Var),
    MulRow(Var, Var),
    MatMul(Var, Var),
    /// `a^T * b` without materializing the transpose.
    MatMulTN(Var, Var),
    Gelu(Var),
    Softplus(Var),
    LayerNorm(Var),
    MeanRows(Var),
    Sum(Var),
    Mean(Var),
    Mse(Var, Var),
    Concat(Var, Var),
    GatherRows(Var, Vec<usize>),
    ScatterRows(Var, Vec<usize>),
}

struct Node {
    shape: Vec<usize>,
    values: Vec<f64>,
    op: Op,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn rows_cols(shape: &[usize]) -> (usize, usize) {
    assert_eq!(shape.len(), 2, "rank-2 tensor required, got shape {shape:?}");
    (shape[0], shape[1])
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Vec<f64>>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].values
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    /// Gradient of the last backward target with respect to `v`.
    pub fn grad(&self, v: Var) -> &[f64] {
        assert!(!self.grads.is_empty(), "backward has not run");
        &self.grads[v.0]
    }

    fn push(&mut self, shape: Vec<usize>, values: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(numel(&shape), values.len());
        debug_assert!(
            values.iter().all(|x| x.is_finite()),
            "non-finite values out of {op:?}"
        );
        assert!(!shape.is_empty() && shape.len() <= 3, "rank must be 1..=3");
        self.nodes.push(Node { shape, values, op });
        Var(self.nodes.len() - 1)
    }

    /// Inserts an input tensor. Leaves created for model parameters get
    /// their gradients read back after [`Tape::backward`]; constant inputs
    /// simply ignore theirs.
    pub fn leaf(&mut self, shape: impl Into<Vec<usize>>, values: Vec<f64>) -> Var {
        self.push(shape.into(), values, Op::Leaf)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add shape mismatch");
        let values = self.zip_values(a, b, |x, y| x + y);
        self.push(self.nodes[a.0].shape.clone(), values, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "sub shape mismatch");
        let values = self.zip_values(a, b, |x, y| x - y);
        self.push(self.nodes[a.0].shape.clone(), values, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul shape mismatch");
        let values = self.zip_values(a, b, |x, y| x * y);
        self.push(self.nodes[a.0].shape.clone(), values, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let values = self.nodes[a.0].values.iter().map(|x| x * c).collect();
        self.push(self.nodes[a.0].shape.clone(), values, Op::Scale(a, c))
    }

    /// Adds a `1 x d` row vector to every row of an `n x d` matrix.
    pub fn add_row(&mut self, a: Var, r: Var) -> Var {
        let (n, d) = rows_cols(self.shape(a));
        let (rn, rd) = rows_cols(self.shape(r));
        assert!(rn == 1 && rd == d, "add_row wants (n x d) + (1 x d)");
        let rv = &self.nodes[r.0].values;
        let values = self.nodes[a.0]
            .values
            .chunks(d)
            .flat_map(|row| row.iter().zip(rv).map(|(x, y)| x + y).collect::<Vec<_>>())
            .collect();
        self.push(vec![n, d], values, Op::AddRow(a, r))
    }

    /// Multiplies every row of an `n x d` matrix by a `1 x d` row vector.
    pub fn mul_row(&mut self, a: Var, r: Var) -> Var {
        let (n, d) = rows_cols(self.shape(a));
        let (rn, rd) = rows_cols(self.shape(r));
        assert!(rn == 1 && rd == d, "mul_row wants (n x d) * (1 x d)");
        let rv = &self.nodes[r.0].values;
        let values = self.nodes[a.0]
            .values
            .chunks(d)
            .flat_map(|row| row.iter().zip(rv).map(|(x, y)| x * y).collect::<Vec<_>>())
            .collect();
        self.push(vec![n, d], values, Op::MulRow(a, r))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = rows_cols(self.shape(a));
        let (k2, n) = rows_cols(self.shape(b));
        assert_eq!(k, k2, "matmul inner dimension mismatch");
        let mut values = vec![0.0; m * n];
        gemm_nn(m, k, n, &self.nodes[a.0].values, &self.nodes[b.0].values, &mut values, false);
        self.push(vec![m, n], values, Op::MatMul(a, b))
    }

    /// `a^T * b` for `a: (l x m)`, `b: (l x n)`.
    pub fn matmul_tn(&mut self, a: Var, b: Var) -> Var {
        let (l, m) = rows_cols(self.shape(a));
        let (l2, n) = rows_cols(self.shape(b));
        assert_eq!(l, l2, "matmul_tn leading dimension mismatch");
        let mut values = vec![0.0; m * n];
        gemm_tn(m, l, n, &self.nodes[a.0].values, &self.nodes[b.0].values, &mut values, false);
        self.push(vec![m, n], values, Op::MatMulTN(a, b))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let values = self.nodes[a.0].values.iter().map(|&x| gelu(x)).collect();
        self.push(self.nodes[a.0].shape.clone(), values, Op::Gelu(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let values = self.nodes[a.0].values.iter().map(|&x| softplus(x)).collect();
        self.push(self.nodes[a.0].shape.clone(), values, Op::Softplus(a))
    }

    /// Row-wise normalization to zero mean and unit variance (no affine).
    pub fn layernorm(&mut self, a: Var) -> Var {
        let (n, d) = rows_cols(self.shape(a));
        let mut values = Vec::with_capacity(n * d);
        for row in self.nodes[a.0].values.chunks(d) {
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + LAYERNORM_EPS).sqrt();
            values.extend(row.iter().map(|x| (x - mean) * inv));
        }
        self.push(vec![n, d], values, Op::LayerNorm(a))
    }

    /// Column means: `n x d -> 1 x d`.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let (n, d) = rows_cols(self.shape(a));
        let mut values = vec![0.0; d];
        for row in self.nodes[a.0].values.chunks(d) {
            for (acc, &x) in values.iter_mut().zip(row) {
                *acc += x;
            }
        }
        for acc in &mut values {
            *acc /= n as f64;
        }
        self.push(vec![1, d], values, Op::MeanRows(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.nodes[a.0].values.iter().sum();
        self.push(vec![1], vec![total], Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.nodes[a.0].values.len();
        let total: f64 = self.nodes[a.0].values.iter().sum();
        self.push(vec![1], vec![total / n as f64], Op::Mean(a))
    }

    /// Mean squared error between same-shape tensors; scalar output.
    pub fn mse(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mse shape mismatch");
        let n = self.nodes[a.0].values.len();
        let total: f64 = self.nodes[a.0]
            .values
            .iter()
            .zip(&self.nodes[b.0].values)
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        self.push(vec![1], vec![total / n as f64], Op::Mse(a, b))
    }

    /// Column-wise concatenation of `(n x ca)` and `(n x cb)`.
    pub fn concat(&mut self, a: Var, b: Var) -> Var {
        let (n, ca) = rows_cols(self.shape(a));
        let (n2, cb) = rows_cols(self.shape(b));
        assert_eq!(n, n2, "concat row mismatch");
        let mut values = Vec::with_capacity(n * (ca + cb));
        for i in 0..n {
            values.extend_from_slice(&self.nodes[a.0].values[i * ca..(i + 1) * ca]);
            values.extend_from_slice(&self.nodes[b.0].values[i * cb..(i + 1) * cb]);
        }
        self.push(vec![n, ca + cb], values, Op::Concat(a, b))
    }

    /// Selects rows by index (`K v`, `S v`). Indices may repeat.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Var {
        let (n, d) = rows_cols(self.shape(a));
        let mut values = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            assert!(i < n, "gather index {i} out of bounds ({n} rows)");
            values.extend_from_slice(&self.nodes[a.0].values[i * d..(i + 1) * d]);
        }
        self.push(vec![idx.len(), d], values, Op::GatherRows(a, idx.to_vec()))
    }

    /// Places rows at the given indices of an otherwise-zero `n_rows x d`
    /// matrix (`K^T v`, `S^T v`). Indices must be distinct.
    pub fn scatter_rows(&mut self, a: Var, idx: &[usize], n_rows: usize) -> Var {
        let (r, d) = rows_cols(self.shape(a));
        assert_eq!(r, idx.len(), "scatter index count mismatch");
        let mut values = vec![0.0; n_rows * d];
        for (pos, &i) in idx.iter().enumerate() {
            assert!(i < n_rows, "scatter index {i} out of bounds ({n_rows} rows)");
            values[i * d..(i + 1) * d]
                .copy_from_slice(&self.nodes[a.0].values[pos * d..(pos + 1) * d]);
        }
        self.push(vec![n_rows, d], values, Op::ScatterRows(a, idx.to_vec()))
    }

    fn zip_values(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.nodes[a.0]
            .values
            .iter()
            .zip(&self.nodes[b.0].values)
            .map(|(&x, &y)| f(x, y))
            .collect()
    }

    /// Reverse pass from a scalar node. Populates gradients for every
    /// node; parents accumulate, so reused subexpressions are handled.
    pub fn backward(&mut self, loss: Var) {
        assert_eq!(numel(self.shape(loss)), 1, "backward target must be scalar");
        let mut grads: Vec<Vec<f64>> =
            self.nodes.iter().map(|n| vec![0.0; n.values.len()]).collect();
        grads[loss.0][0] = 1.0;

        for id in (0..self.nodes.len()).rev() {
            if grads[id].iter().all(|&g| g == 0.0) {
                continue;
            }
            let g = std::mem::take(&mut grads[id]);
            let op = self.nodes[id].op.clone();
            match op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    axpy(&mut grads[a.0], &g, 1.0);
                    axpy(&mut grads[b.0], &g, 1.0);
                }
                Op::Sub(a, b) => {
                    axpy(&mut grads[a.0], &g, 1.0);
                    axpy(&mut grads[b.0], &g, -1.0);
                }
                Op::Mul(a, b) => {
                    for (i, &gi) in g.iter().enumerate() {
                        grads[a.0][i] += gi * self.nodes[b.0].values[i];
                    }
                    for (i, &gi) in g.iter().enumerate() {
                        grads[b.0][i] += gi * self.nodes[a.0].values[i];
                    }
                }
                Op::Scale(a, c) => axpy(&mut grads[a.0], &g, c),
                Op::AddRow(a, r) => {
                    axpy(&mut grads[a.0], &g, 1.0);
                    let d = self.nodes[r.0].values.len();
                    for row in g.chunks(d) {
                        for (acc, &x) in grads[r.0].iter_mut().zip(row) {
                            *acc += x;
                        }
                    }
                }
                Op::MulRow(a, r) => {
                    let d = self.nodes[r.0].values.len();
                    let rv = &self.nodes[r.0].values;
                    for (i, &gi) in g.iter().enumerate() {
                        grads[a.0][i] += gi * rv[i % d];
                    }
                    let av = &self.nodes[a.0].values;
                    for (i, &gi) in g.iter().enumerate() {
                        grads[r.0][i % d] += gi * av[i];
                    }
                }
                Op::MatMul(a, b) => {
                    let (m, k) = rows_cols(&self.nodes[a.0].shape);
                    let n = self.nodes[b.0].shape[1];
                    // dA += dC * B^T ; dB += A^T * dC
                    gemm_nt(m, n, k, &g, &self.nodes[b.0].values, &mut grads[a.0], true);
                    gemm_tn(k, m, n, &self.nodes[a.0].values, &g, &mut grads[b.0], true);
                }
                Op::MatMulTN(a, b) => {
                    let (l, m) = rows_cols(&self.nodes[a.0].shape);
                    let n = self.nodes[b.0].shape[1];
                    // C = A^T B. dA += B * dC^T ; dB += A * dC.
                    gemm_nt(l, n, m, &self.nodes[b.0].values, &g, &mut grads[a.0], true);
                    gemm_nn(l, m, n, &self.nodes[a.0].values, &g, &mut grads[b.0], true);
                }
                Op::Gelu(a) => {
                    for (i, &gi) in g.iter().enumerate() {
                        grads[a.0][i] += gi * gelu_prime(self.nodes[a.0].values[i]);
                    }
                }
                Op::Softplus(a) => {
                    for (i, &gi) in g.iter().enumerate() {
                        grads[a.0][i] += gi * sigmoid(self.nodes[a.0].values[i]);
                    }
                }
                Op::LayerNorm(a) => {
                    let (_, d) = rows_cols(&self.nodes[a.0].shape);
                    let dn = d as f64;
                    for (row_idx, (row_g, row_x)) in
                        g.chunks(d).zip(self.nodes[a.0].values.chunks(d)).enumerate()
                    {
                        let mean = row_x.iter().sum::<f64>() / dn;
                        let var =
                            row_x.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / dn;
                        let inv = 1.0 / (var + LAYERNORM_EPS).sqrt();
                        let xhat: Vec<f64> = row_x.iter().map(|x| (x - mean) * inv).collect();
                        let g_mean = row_g.iter().sum::<f64>() / dn;
                        let gx_mean =
                            row_g.iter().zip(&xhat).map(|(gi, xi)| gi * xi).sum::<f64>() / dn;
                        let out = &mut grads[a.0][row_idx * d..(row_idx + 1) * d];
                        for j in 0..d {
                            out[j] += inv * (row_g[j] - g_mean - xhat[j] * gx_mean);
                        }
                    }
                }
                Op::MeanRows(a) => {
                    let (n, d) = rows_cols(&self.nodes[a.0].shape);
                    let w = 1.0 / n as f64;
                    for row in grads[a.0].chunks_mut(d) {
                        for (acc, &gi) in row.iter_mut().zip(&g) {
                            *acc += gi * w;
                        }
                    }
                }
                Op::Sum(a) => axpy_scalar(&mut grads[a.0], g[0]),
                Op::Mean(a) => {
                    let w = g[0] / self.nodes[a.0].values.len() as f64;
                    axpy_scalar(&mut grads[a.0], w);
                }
                Op::Mse(a, b) => {
                    let n = self.nodes[a.0].values.len() as f64;
                    let w = 2.0 * g[0] / n;
                    for i in 0..self.nodes[a.0].values.len() {
                        let diff = self.nodes[a.0].values[i] - self.nodes[b.0].values[i];
                        grads[a.0][i] += w * diff;
                        grads[b.0][i] -= w * diff;
                    }
                }
                Op::Concat(a, b) => {
                    let (n, ca) = rows_cols(&self.nodes[a.0].shape);
                    let cb = self.nodes[b.0].shape[1];
                    for i in 0..n {
                        let row = &g[i * (ca + cb)..(i + 1) * (ca + cb)];
                        for j in 0..ca {
                            grads[a.0][i * ca + j] += row[j];
                        }
                        for j in 0..cb {
                            grads[b.0][i * cb + j] += row[ca + j];
                        }
                    }
                }
                Op::GatherRows(a, idx) => {
                    let d = self.nodes[a.0].shape[1];
                    for (pos, &i) in idx.iter().enumerate() {
                        let src = &g[pos * d..(pos + 1) * d];
                        let dst = &mut grads[a.0][i * d..(i + 1) * d];
                        for (o, &x) in dst.iter_mut().zip(src) {
                            *o += x;
                        }
                    }
                }
                Op::ScatterRows(a, idx) => {
                    let d = self.nodes[a.0].shape[1];
                    for (pos, &i) in idx.iter().enumerate() {
                        let src = &g[i * d..(i + 1) * d];
                        let dst = &mut grads[a.0][pos * d..(pos + 1) * d];
                        for (o, &x) in dst.iter_mut().zip(src) {
                            *o += x;
                        }
                    }
                }
            }
            grads[id] = g;
        }
        self.grads = grads;
    }
}

fn axpy(acc: &mut [f64], x: &[f64], c: f64) {
    for (a, &v) in acc.iter_mut().zip(x) {
        *a += c * v;
    }
}

fn axpy_scalar(acc: &mut [f64], c: f64) {
    for a in acc.iter_mut() {
        *a += c;
    }
}
