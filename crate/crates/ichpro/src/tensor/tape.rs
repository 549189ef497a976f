//! Dynamic tape: records operations during the forward pass, replays them
//! in reverse to accumulate gradients.
//!
//! Nodes only ever reference earlier nodes, so creation order is a valid
//! topological order and the backward loop is a single reverse sweep.
//! One backward per recording; re-running without a fresh forward is an
//! error.

use super::kernels;
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a tensor stored on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorId(pub(crate) usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Scale { a: usize, c: f64 },
    ScalarMul { s: usize, a: usize },
    AddRowBroadcast { x: usize, b: usize },
    AddChannelBias { x: usize, b: usize },
    Matmul { a: usize, b: usize, m: usize, k: usize, n: usize },
    MatmulNT { a: usize, b: usize, m: usize, k: usize, n: usize },
    MatmulTN { a: usize, b: usize, m: usize, k: usize, n: usize },
    Transpose { a: usize, rows: usize, cols: usize },
    Relu { a: usize },
    Exp { a: usize },
    Ln { a: usize },
    Softmax { a: usize, axis: usize },
    LogSoftmax { a: usize, axis: usize },
    MaskedSoftmaxRows { a: usize, mask: Vec<bool> },
    MaskedLogSumExpRows { a: usize, mask: Vec<bool> },
    RowsL2Normalize { a: usize },
    SumAll { a: usize },
    MeanAll { a: usize },
    MaskedMeanRows { a: usize, keep: Vec<bool> },
    ConcatCols { a: usize, b: usize },
    ConcatRows { parts: Vec<usize> },
    SliceCols { a: usize, start: usize, len: usize },
    GatherRows { a: usize, idx: Vec<usize> },
    PickPerRow { a: usize, idx: Vec<usize> },
    Embedding { table: usize, ids: Vec<usize> },
    Reshape { a: usize },
    Conv3 { vol: usize, ker: usize, stride: usize },
    GlobalAvgPool3 { a: usize },
    UpsampleNearest2 { a: usize, factor: usize },
    SoftPool2d { a: usize, h: usize, w: usize, kernel: usize, stride: usize },
    MulConst { a: usize, c: Vec<f64> },
}

struct Node {
    t: Tensor,
    op: Op,
}

/// Ordered record of executed operations plus their value buffers.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    backward_done: bool,
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

    /// Insert an existing tensor as a leaf.
    pub fn leaf(&mut self, t: Tensor) -> TensorId {
        self.push(t, Op::Leaf)
    }

    /// Leaf that tracks gradients (a trainable parameter block).
    pub fn param(&mut self, shape: &[usize], data: &[f64]) -> Result<TensorId> {
        let t = Tensor::new(shape.to_vec(), data.to_vec())?.with_grad();
        Ok(self.leaf(t))
    }

    /// Leaf that does not track gradients.
    pub fn constant(&mut self, shape: &[usize], data: &[f64]) -> Result<TensorId> {
        let t = Tensor::new(shape.to_vec(), data.to_vec())?;
        Ok(self.leaf(t))
    }

    pub fn tensor(&self, id: TensorId) -> &Tensor {
        &self.nodes[id.0].t
    }

    pub fn data(&self, id: TensorId) -> &[f64] {
        self.nodes[id.0].t.data()
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        self.nodes[id.0].t.shape()
    }

    /// Gradient of a leaf after `backward`; `None` for detached tensors.
    pub fn grad(&self, id: TensorId) -> Option<&[f64]> {
        self.nodes[id.0].t.grad.as_deref()
    }

    fn push(&mut self, t: Tensor, op: Op) -> TensorId {
        self.nodes.push(Node { t, op });
        TensorId(self.nodes.len() - 1)
    }

    fn out(&mut self, shape: Vec<usize>, data: Vec<f64>, requires_grad: bool, op: Op) -> Result<TensorId> {
        let mut t = Tensor::new(shape, data)?;
        t.requires_grad = requires_grad;
        Ok(self.push(t, op))
    }

    fn wants(&self, id: usize) -> bool {
        self.nodes[id].t.requires_grad
    }

    // ── elementwise and linear ops ──────────────────────────────────────

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.binary_same_shape(a, b, "add")?;
        let data = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x + y).collect();
        let rg = self.wants(a.0) || self.wants(b.0);
        self.out(self.shape(a).to_vec(), data, rg, Op::Add { a: a.0, b: b.0 })
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.binary_same_shape(a, b, "sub")?;
        let data = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x - y).collect();
        let rg = self.wants(a.0) || self.wants(b.0);
        self.out(self.shape(a).to_vec(), data, rg, Op::Sub { a: a.0, b: b.0 })
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.binary_same_shape(a, b, "mul")?;
        let data = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x * y).collect();
        let rg = self.wants(a.0) || self.wants(b.0);
        self.out(self.shape(a).to_vec(), data, rg, Op::Mul { a: a.0, b: b.0 })
    }

    pub fn scale(&mut self, a: TensorId, c: f64) -> Result<TensorId> {
        let data = self.data(a).iter().map(|x| x * c).collect();
        let rg = self.wants(a.0);
        self.out(self.shape(a).to_vec(), data, rg, Op::Scale { a: a.0, c })
    }

    /// Multiply a tensor by a learnable scalar (shape `[1]`).
    pub fn scalar_mul(&mut self, s: TensorId, a: TensorId) -> Result<TensorId> {
        if !self.tensor(s).is_scalar() {
            return Err(Error::ShapeMismatch {
                context: "scalar_mul gate",
                lhs: self.shape(s).to_vec(),
                rhs: vec![1],
            });
        }
        let sv = self.data(s)[0];
        let data = self.data(a).iter().map(|x| x * sv).collect();
        let rg = self.wants(a.0) || self.wants(s.0);
        self.out(self.shape(a).to_vec(), data, rg, Op::ScalarMul { s: s.0, a: a.0 })
    }

    /// x: [n, m] plus bias [m] broadcast over rows.
    pub fn add_row_broadcast(&mut self, x: TensorId, b: TensorId) -> Result<TensorId> {
        let (n, m) = self.dims2(x, "add_row_broadcast input")?;
        if self.shape(b) != [m] {
            return Err(Error::ShapeMismatch {
                context: "add_row_broadcast bias",
                lhs: self.shape(x).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let xd = self.data(x);
        let bd = self.data(b);
        let mut data = Vec::with_capacity(n * m);
        for i in 0..n {
            for j in 0..m {
                data.push(xd[i * m + j] + bd[j]);
            }
        }
        let rg = self.wants(x.0) || self.wants(b.0);
        self.out(vec![n, m], data, rg, Op::AddRowBroadcast { x: x.0, b: b.0 })
    }

    /// x: [c, ...] plus per-channel bias [c] broadcast over the trailing axes.
    pub fn add_channel_bias(&mut self, x: TensorId, b: TensorId) -> Result<TensorId> {
        let xs = self.shape(x).to_vec();
        let c = xs[0];
        if self.shape(b) != [c] {
            return Err(Error::ShapeMismatch {
                context: "add_channel_bias",
                lhs: xs,
                rhs: self.shape(b).to_vec(),
            });
        }
        let block = self.tensor(x).numel() / c;
        let xd = self.data(x);
        let bd = self.data(b);
        let mut data = Vec::with_capacity(xd.len());
        for ch in 0..c {
            let bias = bd[ch];
            for v in &xd[ch * block..(ch + 1) * block] {
                data.push(v + bias);
            }
        }
        let rg = self.wants(x.0) || self.wants(b.0);
        self.out(xs, data, rg, Op::AddChannelBias { x: x.0, b: b.0 })
    }

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (m, k) = self.dims2(a, "matmul lhs")?;
        let (k2, n) = self.dims2(b, "matmul rhs")?;
        if k != k2 {
            return Err(Error::ShapeMismatch {
                context: "matmul inner dimension",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let mut data = vec![0.0; m * n];
        kernels::matmul_acc(self.data(a), self.data(b), m, k, n, &mut data);
        let rg = self.wants(a.0) || self.wants(b.0);
        self.out(vec![m, n], data, rg, Op::Matmul { a: a.0, b: b.0, m, k, n })
    }

    /// A[m,k] * B[n,k]^T -> [m,n], without materializing the transpose.
    pub fn matmul_nt(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (m, k) = self.dims2(a, "matmul_nt lhs")?;
        let (n, k2) = self.dims2(b, "matmul_nt rhs")?;
        if k != k2 {
            return Err(Error::ShapeMismatch {
                context: "matmul_nt inner dimension",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let mut data = vec![0.0; m * n];
        // out[m,n] = A * B^T: reuse the nt kernel with its (g, b) roles
        kernels::matmul_nt_acc(self.data(a), self.data(b), m, n, k, &mut data);
        let rg = self.wants(a.0) || self.wants(b.0);
        self.out(vec![m, n], data, rg, Op::MatmulNT { a: a.0, b: b.0, m, k, n })
    }

    /// A[k,m]^T * B[k,n] -> [m,n], without materializing the transpose.
    pub fn matmul_tn(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (k, m) = self.dims2(a, "matmul_tn lhs")?;
        let (k2, n) = self.dims2(b, "matmul_tn rhs")?;
        if k != k2 {
            return Err(Error::ShapeMismatch {
                context: "matmul_tn inner dimension",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let mut data = vec![0.0; m * n];
        kernels::matmul_tn_acc(self.data(a), self.data(b), k, m, n, &mut data);
        let rg = self.wants(a.0) || self.wants(b.0);
        self.out(vec![m, n], data, rg, Op::MatmulTN { a: a.0, b: b.0, m, k, n })
    }

    pub fn transpose(&mut self, a: TensorId) -> Result<TensorId> {
        let (rows, cols) = self.dims2(a, "transpose")?;
        let ad = self.data(a);
        let mut data = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                data[j * rows + i] = ad[i * cols + j];
            }
        }
        let rg = self.wants(a.0);
        self.out(vec![cols, rows], data, rg, Op::Transpose { a: a.0, rows, cols })
    }

    pub fn relu(&mut self, a: TensorId) -> Result<TensorId> {
        let data = self.data(a).iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
        let rg = self.wants(a.0);
        self.out(self.shape(a).to_vec(), data, rg, Op::Relu { a: a.0 })
    }

    pub fn exp(&mut self, a: TensorId) -> Result<TensorId> {
        let data = self.data(a).iter().map(|x| x.exp()).collect();
        let rg = self.wants(a.0);
        self.out(self.shape(a).to_vec(), data, rg, Op::Exp { a: a.0 })
    }

    pub fn ln(&mut self, a: TensorId) -> Result<TensorId> {
        if self.data(a).iter().any(|&x| x <= 0.0) {
            return Err(Error::domain("ln requires strictly positive input"));
        }
        let data = self.data(a).iter().map(|x| x.ln()).collect();
        let rg = self.wants(a.0);
        self.out(self.shape(a).to_vec(), data, rg, Op::Ln { a: a.0 })
    }

    // ── softmax family ──────────────────────────────────────────────────

    pub fn softmax(&mut self, a: TensorId, axis: usize) -> Result<TensorId> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() {
            return Err(Error::InvalidAxis { axis, rank: shape.len() });
        }
        let mut data = self.data(a).to_vec();
        if shape.len() == 2 && axis == 0 {
            kernels::softmax_cols_2d(&mut data, shape[0], shape[1]);
        } else {
            for_each_axis_slice(&shape, axis, |start, len, stride| {
                kernels::softmax_slice(&mut data, start, len, stride);
            });
        }
        let rg = self.wants(a.0);
        self.out(shape, data, rg, Op::Softmax { a: a.0, axis })
    }

    pub fn log_softmax(&mut self, a: TensorId, axis: usize) -> Result<TensorId> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() {
            return Err(Error::InvalidAxis { axis, rank: shape.len() });
        }
        let mut data = self.data(a).to_vec();
        for_each_axis_slice(&shape, axis, |start, len, stride| {
            kernels::log_softmax_slice(&mut data, start, len, stride);
        });
        let rg = self.wants(a.0);
        self.out(shape, data, rg, Op::LogSoftmax { a: a.0, axis })
    }

    /// Row-wise softmax over the entries where `mask` is true.
    /// Masked entries yield 0; a fully masked row yields an all-zero row.
    pub fn masked_softmax_rows(&mut self, a: TensorId, mask: &[bool]) -> Result<TensorId> {
        let (n, m) = self.dims2(a, "masked_softmax_rows")?;
        if mask.len() != n * m {
            return Err(Error::ShapeMismatch {
                context: "masked_softmax_rows mask",
                lhs: vec![n, m],
                rhs: vec![mask.len()],
            });
        }
        let ad = self.data(a);
        let mut data = vec![0.0; n * m];
        for i in 0..n {
            let row = &ad[i * m..(i + 1) * m];
            let rm = &mask[i * m..(i + 1) * m];
            let mut max = f64::NEG_INFINITY;
            for j in 0..m {
                if rm[j] {
                    max = max.max(row[j]);
                }
            }
            if max == f64::NEG_INFINITY {
                continue; // fully masked row stays zero
            }
            let mut sum = 0.0;
            for j in 0..m {
                if rm[j] {
                    let e = (row[j] - max).exp();
                    data[i * m + j] = e;
                    sum += e;
                }
            }
            for j in 0..m {
                data[i * m + j] /= sum;
            }
        }
        let rg = self.wants(a.0);
        self.out(vec![n, m], data, rg, Op::MaskedSoftmaxRows { a: a.0, mask: mask.to_vec() })
    }

    /// Per row: log sum of exp over unmasked entries. Output shape `[n]`.
    pub fn masked_logsumexp_rows(&mut self, a: TensorId, mask: &[bool]) -> Result<TensorId> {
        let (n, m) = self.dims2(a, "masked_logsumexp_rows")?;
        if mask.len() != n * m {
            return Err(Error::ShapeMismatch {
                context: "masked_logsumexp_rows mask",
                lhs: vec![n, m],
                rhs: vec![mask.len()],
            });
        }
        let ad = self.data(a);
        let mut data = vec![0.0; n];
        for i in 0..n {
            let row = &ad[i * m..(i + 1) * m];
            let rm = &mask[i * m..(i + 1) * m];
            let mut max = f64::NEG_INFINITY;
            for j in 0..m {
                if rm[j] {
                    max = max.max(row[j]);
                }
            }
            if max == f64::NEG_INFINITY {
                return Err(Error::domain(format!(
                    "masked_logsumexp_rows: row {i} has no unmasked entries"
                )));
            }
            let mut sum = 0.0;
            for j in 0..m {
                if rm[j] {
                    sum += (row[j] - max).exp();
                }
            }
            data[i] = max + sum.ln();
        }
        let rg = self.wants(a.0);
        self.out(vec![n], data, rg, Op::MaskedLogSumExpRows { a: a.0, mask: mask.to_vec() })
    }

    /// Normalize each row to unit L2 norm. Errors on a (near-)zero row.
    pub fn rows_l2_normalize(&mut self, a: TensorId) -> Result<TensorId> {
        let (n, m) = self.dims2(a, "rows_l2_normalize")?;
        let ad = self.data(a);
        let mut data = vec![0.0; n * m];
        for i in 0..n {
            let row = &ad[i * m..(i + 1) * m];
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-12 {
                return Err(Error::domain(format!("rows_l2_normalize: row {i} has zero norm")));
            }
            for j in 0..m {
                data[i * m + j] = row[j] / norm;
            }
        }
        let rg = self.wants(a.0);
        self.out(vec![n, m], data, rg, Op::RowsL2Normalize { a: a.0 })
    }

    // ── reductions ─────────────────────────────────────────────────────

    pub fn sum_all(&mut self, a: TensorId) -> Result<TensorId> {
        let s: f64 = self.data(a).iter().sum();
        let rg = self.wants(a.0);
        self.out(vec![1], vec![s], rg, Op::SumAll { a: a.0 })
    }

    pub fn mean_all(&mut self, a: TensorId) -> Result<TensorId> {
        let n = self.tensor(a).numel() as f64;
        let s: f64 = self.data(a).iter().sum();
        let rg = self.wants(a.0);
        self.out(vec![1], vec![s / n], rg, Op::MeanAll { a: a.0 })
    }

    /// Mean over the rows of `[n, m]` where `keep` is true, giving `[1, m]`.
    pub fn masked_mean_rows(&mut self, a: TensorId, keep: &[bool]) -> Result<TensorId> {
        let (n, m) = self.dims2(a, "masked_mean_rows")?;
        if keep.len() != n {
            return Err(Error::ShapeMismatch {
                context: "masked_mean_rows mask",
                lhs: vec![n],
                rhs: vec![keep.len()],
            });
        }
        let count = keep.iter().filter(|&&k| k).count();
        if count == 0 {
            return Err(Error::domain("masked_mean_rows: no rows kept"));
        }
        let ad = self.data(a);
        let mut data = vec![0.0; m];
        for i in 0..n {
            if keep[i] {
                for j in 0..m {
                    data[j] += ad[i * m + j];
                }
            }
        }
        for v in &mut data {
            *v /= count as f64;
        }
        let rg = self.wants(a.0);
        self.out(vec![1, m], data, rg, Op::MaskedMeanRows { a: a.0, keep: keep.to_vec() })
    }

    // ── shape ops ──────────────────────────────────────────────────────

    pub fn concat_cols(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (n, pa) = self.dims2(a, "concat_cols lhs")?;
        let (n2, pb) = self.dims2(b, "concat_cols rhs")?;
        if n != n2 {
            return Err(Error::ShapeMismatch {
                context: "concat_cols row count",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let ad = self.data(a);
        let bd = self.data(b);
        let mut data = Vec::with_capacity(n * (pa + pb));
        for i in 0..n {
            data.extend_from_slice(&ad[i * pa..(i + 1) * pa]);
            data.extend_from_slice(&bd[i * pb..(i + 1) * pb]);
        }
        let rg = self.wants(a.0) || self.wants(b.0);
        self.out(vec![n, pa + pb], data, rg, Op::ConcatCols { a: a.0, b: b.0 })
    }

    /// Stack matrices with equal column counts on top of each other.
    pub fn concat_rows(&mut self, parts: &[TensorId]) -> Result<TensorId> {
        if parts.is_empty() {
            return Err(Error::domain("concat_rows: empty part list"));
        }
        let (_, cols) = self.dims2(parts[0], "concat_rows")?;
        let mut total_rows = 0;
        for &p in parts {
            let (r, c) = self.dims2(p, "concat_rows part")?;
            if c != cols {
                return Err(Error::ShapeMismatch {
                    context: "concat_rows column count",
                    lhs: vec![cols],
                    rhs: vec![c],
                });
            }
            total_rows += r;
        }
        let mut data = Vec::with_capacity(total_rows * cols);
        for &p in parts {
            data.extend_from_slice(self.data(p));
        }
        let rg = parts.iter().any(|p| self.wants(p.0));
        self.out(
            vec![total_rows, cols],
            data,
            rg,
            Op::ConcatRows { parts: parts.iter().map(|p| p.0).collect() },
        )
    }

    pub fn slice_cols(&mut self, a: TensorId, start: usize, len: usize) -> Result<TensorId> {
        let (n, m) = self.dims2(a, "slice_cols")?;
        if start + len > m {
            return Err(Error::domain(format!(
                "slice_cols: range {start}..{} out of {m} columns",
                start + len
            )));
        }
        let ad = self.data(a);
        let mut data = Vec::with_capacity(n * len);
        for i in 0..n {
            data.extend_from_slice(&ad[i * m + start..i * m + start + len]);
        }
        let rg = self.wants(a.0);
        self.out(vec![n, len], data, rg, Op::SliceCols { a: a.0, start, len })
    }

    pub fn gather_rows(&mut self, a: TensorId, idx: &[usize]) -> Result<TensorId> {
        let (n, m) = self.dims2(a, "gather_rows")?;
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::domain(format!("gather_rows: row {bad} out of {n}")));
        }
        let ad = self.data(a);
        let mut data = Vec::with_capacity(idx.len() * m);
        for &i in idx {
            data.extend_from_slice(&ad[i * m..(i + 1) * m]);
        }
        let rg = self.wants(a.0);
        self.out(vec![idx.len(), m], data, rg, Op::GatherRows { a: a.0, idx: idx.to_vec() })
    }

    /// One entry per row: out[i] = a[i, idx[i]]. Output shape `[n]`.
    pub fn pick_per_row(&mut self, a: TensorId, idx: &[usize]) -> Result<TensorId> {
        let (n, m) = self.dims2(a, "pick_per_row")?;
        if idx.len() != n {
            return Err(Error::ShapeMismatch {
                context: "pick_per_row index count",
                lhs: vec![n],
                rhs: vec![idx.len()],
            });
        }
        if let Some(&bad) = idx.iter().find(|&&j| j >= m) {
            return Err(Error::domain(format!("pick_per_row: column {bad} out of {m}")));
        }
        let ad = self.data(a);
        let data = idx.iter().enumerate().map(|(i, &j)| ad[i * m + j]).collect();
        let rg = self.wants(a.0);
        self.out(vec![n], data, rg, Op::PickPerRow { a: a.0, idx: idx.to_vec() })
    }

    /// Row lookup into an embedding table `[v, dim]` for each id.
    pub fn embedding(&mut self, table: TensorId, ids: &[usize]) -> Result<TensorId> {
        let (v, dim) = self.dims2(table, "embedding table")?;
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(Error::domain(format!("token id {bad} out of vocab {v}")));
        }
        let td = self.data(table);
        let mut data = Vec::with_capacity(ids.len() * dim);
        for &i in ids {
            data.extend_from_slice(&td[i * dim..(i + 1) * dim]);
        }
        let rg = self.wants(table.0);
        self.out(vec![ids.len(), dim], data, rg, Op::Embedding { table: table.0, ids: ids.to_vec() })
    }

    pub fn reshape(&mut self, a: TensorId, shape: &[usize]) -> Result<TensorId> {
        let numel: usize = shape.iter().product();
        if numel != self.tensor(a).numel() {
            return Err(Error::ShapeMismatch {
                context: "reshape",
                lhs: self.shape(a).to_vec(),
                rhs: shape.to_vec(),
            });
        }
        let data = self.data(a).to_vec();
        let rg = self.wants(a.0);
        self.out(shape.to_vec(), data, rg, Op::Reshape { a: a.0 })
    }

    // ── structured ops ─────────────────────────────────────────────────

    /// Valid 3D cross-correlation. vol: [c_in, d, h, w], ker: [c_out, c_in, k, k, k].
    pub fn conv3(&mut self, vol: TensorId, ker: TensorId, stride: usize) -> Result<TensorId> {
        let vs = self.shape(vol).to_vec();
        let ks = self.shape(ker).to_vec();
        if vs.len() != 4 || ks.len() != 5 {
            return Err(Error::ShapeMismatch {
                context: "conv3 expects [c,d,h,w] volume and [c2,c,k,k,k] kernels",
                lhs: vs,
                rhs: ks,
            });
        }
        let (c_in, d, h, w) = (vs[0], vs[1], vs[2], vs[3]);
        let (c_out, kc, k) = (ks[0], ks[1], ks[2]);
        if kc != c_in || ks[3] != k || ks[4] != k {
            return Err(Error::ShapeMismatch { context: "conv3 kernel layout", lhs: vs, rhs: ks });
        }
        if stride < 1 {
            return Err(Error::domain("conv3: stride must be >= 1"));
        }
        if k > d || k > h || k > w {
            return Err(Error::domain(format!(
                "conv3: kernel extent {k} exceeds input extents {d}x{h}x{w}"
            )));
        }
        let (od, oh, ow) = kernels::conv3_out_dims(d, h, w, k, stride);
        let mut data = vec![0.0; c_out * od * oh * ow];
        kernels::conv3_forward(self.data(vol), self.data(ker), c_in, d, h, w, c_out, k, stride, &mut data);
        let rg = self.wants(vol.0) || self.wants(ker.0);
        self.out(vec![c_out, od, oh, ow], data, rg, Op::Conv3 { vol: vol.0, ker: ker.0, stride })
    }

    /// [c, d, h, w] -> [1, c] mean over the spatial axes.
    pub fn global_avg_pool3(&mut self, a: TensorId) -> Result<TensorId> {
        let s = self.shape(a).to_vec();
        if s.len() != 4 {
            return Err(Error::ShapeMismatch {
                context: "global_avg_pool3 expects [c,d,h,w]",
                lhs: s,
                rhs: vec![],
            });
        }
        let c = s[0];
        let block = s[1] * s[2] * s[3];
        let ad = self.data(a);
        let data = (0..c)
            .map(|ch| ad[ch * block..(ch + 1) * block].iter().sum::<f64>() / block as f64)
            .collect();
        let rg = self.wants(a.0);
        self.out(vec![1, c], data, rg, Op::GlobalAvgPool3 { a: a.0 })
    }

    /// Nearest-neighbour upsampling of [c, h, w] by an integer factor.
    pub fn upsample_nearest2(&mut self, a: TensorId, factor: usize) -> Result<TensorId> {
        if factor < 1 {
            return Err(Error::domain("upsample_nearest2: factor must be >= 1"));
        }
        let s = self.shape(a).to_vec();
        if s.len() != 3 {
            return Err(Error::ShapeMismatch {
                context: "upsample_nearest2 expects [c,h,w]",
                lhs: s,
                rhs: vec![],
            });
        }
        let (c, h, w) = (s[0], s[1], s[2]);
        let (nh, nw) = (h * factor, w * factor);
        let ad = self.data(a);
        let mut data = vec![0.0; c * nh * nw];
        for ch in 0..c {
            for y in 0..nh {
                let sy = y / factor;
                for x in 0..nw {
                    data[(ch * nh + y) * nw + x] = ad[(ch * h + sy) * w + x / factor];
                }
            }
        }
        let rg = self.wants(a.0);
        self.out(vec![c, nh, nw], data, rg, Op::UpsampleNearest2 { a: a.0, factor })
    }

    /// Exponentially weighted pooling over spatial regions.
    ///
    /// `a` is `[s, ch]` with positions laid out as an `h`×`w` row-major grid.
    /// Each kernel×kernel region is reduced per channel to
    /// sum_i softmax(region)_i * region_i.
    pub fn softpool2d(&mut self, a: TensorId, h: usize, w: usize, kernel: usize, stride: usize) -> Result<TensorId> {
        let (s, ch) = self.dims2(a, "softpool2d")?;
        if s != h * w {
            return Err(Error::ShapeMismatch {
                context: "softpool2d grid",
                lhs: vec![s],
                rhs: vec![h, w],
            });
        }
        if kernel == 0 || stride == 0 {
            return Err(Error::domain("softpool2d: kernel and stride must be >= 1"));
        }
        if kernel > h || kernel > w {
            return Err(Error::domain(format!(
                "softpool2d: kernel {kernel} exceeds grid {h}x{w}"
            )));
        }
        if (h - kernel) % stride != 0 || (w - kernel) % stride != 0 {
            return Err(Error::config(format!(
                "softpool2d: grid {h}x{w} not tileable by kernel {kernel} stride {stride}"
            )));
        }
        let (oh, ow) = ((h - kernel) / stride + 1, (w - kernel) / stride + 1);
        let ad = self.data(a);
        let mut data = vec![0.0; oh * ow * ch];
        let mut region = vec![0.0; kernel * kernel];
        for oy in 0..oh {
            for ox in 0..ow {
                for c in 0..ch {
                    for dy in 0..kernel {
                        for dx in 0..kernel {
                            let p = (oy * stride + dy) * w + ox * stride + dx;
                            region[dy * kernel + dx] = ad[p * ch + c];
                        }
                    }
                    data[(oy * ow + ox) * ch + c] = kernels::softpool_region(&region);
                }
            }
        }
        let rg = self.wants(a.0);
        self.out(vec![oh * ow, ch], data, rg, Op::SoftPool2d { a: a.0, h, w, kernel, stride })
    }

    /// Elementwise product with a constant buffer of identical shape.
    pub fn mul_const(&mut self, a: TensorId, c: &[f64]) -> Result<TensorId> {
        if c.len() != self.tensor(a).numel() {
            return Err(Error::ShapeMismatch {
                context: "mul_const",
                lhs: self.shape(a).to_vec(),
                rhs: vec![c.len()],
            });
        }
        let data = self.data(a).iter().zip(c).map(|(x, y)| x * y).collect();
        let rg = self.wants(a.0);
        self.out(self.shape(a).to_vec(), data, rg, Op::MulConst { a: a.0, c: c.to_vec() })
    }

    // ── backward ───────────────────────────────────────────────────────

    /// Reverse sweep from a scalar loss. Populates `grad` on every
    /// gradient-tracking leaf. A second call without re-recording fails.
    pub fn backward(&mut self, loss: TensorId) -> Result<()> {
        if self.backward_done {
            return Err(Error::Tape("backward already run on this tape; re-record the forward pass"));
        }
        if !self.tensor(loss).is_scalar() {
            return Err(Error::Tape("backward requires a scalar loss"));
        }
        self.backward_done = true;
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].t.requires_grad {
                continue;
            }
            self.accumulate_inputs(i, &g, &mut grads);
            if matches!(self.nodes[i].op, Op::Leaf) {
                self.nodes[i].t.grad = Some(g);
            }
        }
        Ok(())
    }

    fn accumulate_inputs(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        // Allocate-or-get the gradient buffer of an input node.
        macro_rules! gbuf {
            ($id:expr) => {{
                let numel = self.nodes[$id].t.numel();
                grads[$id].get_or_insert_with(|| vec![0.0; numel]).as_mut_slice()
            }};
        }
        macro_rules! wants {
            ($id:expr) => {
                self.nodes[$id].t.requires_grad
            };
        }
        match &node.op {
            Op::Leaf => {}
            Op::Add { a, b } => {
                if wants!(*a) {
                    for (o, gv) in gbuf!(*a).iter_mut().zip(g) {
                        *o += gv;
                    }
                }
                if wants!(*b) {
                    for (o, gv) in gbuf!(*b).iter_mut().zip(g) {
                        *o += gv;
                    }
                }
            }
            Op::Sub { a, b } => {
                if wants!(*a) {
                    for (o, gv) in gbuf!(*a).iter_mut().zip(g) {
                        *o += gv;
                    }
                }
                if wants!(*b) {
                    for (o, gv) in gbuf!(*b).iter_mut().zip(g) {
                        *o -= gv;
                    }
                }
            }
            Op::Mul { a, b } => {
                if wants!(*a) {
                    let bd = self.nodes[*b].t.data();
                    for ((o, gv), bv) in gbuf!(*a).iter_mut().zip(g).zip(bd) {
                        *o += gv * bv;
                    }
                }
                if wants!(*b) {
                    let ad = self.nodes[*a].t.data();
                    for ((o, gv), av) in gbuf!(*b).iter_mut().zip(g).zip(ad) {
                        *o += gv * av;
                    }
                }
            }
            Op::Scale { a, c } => {
                if wants!(*a) {
                    for (o, gv) in gbuf!(*a).iter_mut().zip(g) {
                        *o += gv * c;
                    }
                }
            }
            Op::ScalarMul { s, a } => {
                if wants!(*s) {
                    let ad = self.nodes[*a].t.data();
                    let dot: f64 = g.iter().zip(ad).map(|(gv, av)| gv * av).sum();
                    gbuf!(*s)[0] += dot;
                }
                if wants!(*a) {
                    let sv = self.nodes[*s].t.data()[0];
                    for (o, gv) in gbuf!(*a).iter_mut().zip(g) {
                        *o += gv * sv;
                    }
                }
            }
            Op::AddRowBroadcast { x, b } => {
                let m = self.nodes[*b].t.numel();
                if wants!(*x) {
                    for (o, gv) in gbuf!(*x).iter_mut().zip(g) {
                        *o += gv;
                    }
                }
                if wants!(*b) {
                    let gb = gbuf!(*b);
                    for (pos, gv) in g.iter().enumerate() {
                        gb[pos % m] += gv;
                    }
                }
            }
            Op::AddChannelBias { x, b } => {
                let c = self.nodes[*b].t.numel();
                let block = node.t.numel() / c;
                if wants!(*x) {
                    for (o, gv) in gbuf!(*x).iter_mut().zip(g) {
                        *o += gv;
                    }
                }
                if wants!(*b) {
                    let gb = gbuf!(*b);
                    for ch in 0..c {
                        gb[ch] += g[ch * block..(ch + 1) * block].iter().sum::<f64>();
                    }
                }
            }
            Op::Matmul { a, b, m, k, n } => {
                if wants!(*a) {
                    let bd = self.nodes[*b].t.data();
                    kernels::matmul_nt_acc(g, bd, *m, *k, *n, gbuf!(*a));
                }
                if wants!(*b) {
                    let ad = self.nodes[*a].t.data();
                    kernels::matmul_tn_acc(ad, g, *m, *k, *n, gbuf!(*b));
                }
            }
            Op::MatmulNT { a, b, m, k, n } => {
                // C = A * B^T with A [m,k], B [n,k]
                if wants!(*a) {
                    let bd = self.nodes[*b].t.data();
                    kernels::matmul_acc(g, bd, *m, *n, *k, gbuf!(*a));
                }
                if wants!(*b) {
                    let ad = self.nodes[*a].t.data();
                    kernels::matmul_tn_acc(g, ad, *m, *n, *k, gbuf!(*b));
                }
            }
            Op::MatmulTN { a, b, m, k, n } => {
                // C = A^T * B with A [k,m], B [k,n]
                if wants!(*a) {
                    let bd = self.nodes[*b].t.data();
                    kernels::matmul_nt_acc(bd, g, *k, *m, *n, gbuf!(*a));
                }
                if wants!(*b) {
                    let ad = self.nodes[*a].t.data();
                    kernels::matmul_acc(ad, g, *k, *m, *n, gbuf!(*b));
                }
            }
            Op::Transpose { a, rows, cols } => {
                if wants!(*a) {
                    let ga = gbuf!(*a);
                    for i2 in 0..*rows {
                        for j in 0..*cols {
                            ga[i2 * cols + j] += g[j * rows + i2];
                        }
                    }
                }
            }
            Op::Relu { a } => {
                if wants!(*a) {
                    let ad = self.nodes[*a].t.data();
                    for ((o, gv), av) in gbuf!(*a).iter_mut().zip(g).zip(ad) {
                        if *av > 0.0 {
                            *o += gv;
                        }
                    }
                }
            }
            Op::Exp { a } => {
                if wants!(*a) {
                    let yd = node.t.data();
                    for ((o, gv), yv) in gbuf!(*a).iter_mut().zip(g).zip(yd) {
                        *o += gv * yv;
                    }
                }
            }
            Op::Ln { a } => {
                if wants!(*a) {
                    let ad = self.nodes[*a].t.data();
                    for ((o, gv), av) in gbuf!(*a).iter_mut().zip(g).zip(ad) {
                        *o += gv / av;
                    }
                }
            }
            Op::Softmax { a, axis } => {
                if wants!(*a) {
                    let y = node.t.data();
                    let shape = node.t.shape().to_vec();
                    let ga = gbuf!(*a);
                    if shape.len() == 2 && *axis == 0 {
                        // column-wise, kept row-major for cache friendliness
                        let (n, m) = (shape[0], shape[1]);
                        let mut dot = vec![0.0; m];
                        for i2 in 0..n {
                            for j in 0..m {
                                dot[j] += g[i2 * m + j] * y[i2 * m + j];
                            }
                        }
                        for i2 in 0..n {
                            for j in 0..m {
                                let idx = i2 * m + j;
                                ga[idx] += y[idx] * (g[idx] - dot[j]);
                            }
                        }
                    } else {
                        for_each_axis_slice(&shape, *axis, |start, len, stride| {
                            let mut dot = 0.0;
                            for q in 0..len {
                                let idx = start + q * stride;
                                dot += g[idx] * y[idx];
                            }
                            for q in 0..len {
                                let idx = start + q * stride;
                                ga[idx] += y[idx] * (g[idx] - dot);
                            }
                        });
                    }
                }
            }
            Op::LogSoftmax { a, axis } => {
                if wants!(*a) {
                    let y = node.t.data();
                    let shape = node.t.shape().to_vec();
                    let ga = gbuf!(*a);
                    for_each_axis_slice(&shape, *axis, |start, len, stride| {
                        let mut gsum = 0.0;
                        for q in 0..len {
                            gsum += g[start + q * stride];
                        }
                        for q in 0..len {
                            let idx = start + q * stride;
                            ga[idx] += g[idx] - y[idx].exp() * gsum;
                        }
                    });
                }
            }
            Op::MaskedSoftmaxRows { a, mask } => {
                if wants!(*a) {
                    // masked outputs are exactly 0, so the dense softmax
                    // jacobian restricted to the row already vanishes there
                    let y = node.t.data();
                    let (n, m) = (node.t.shape()[0], node.t.shape()[1]);
                    let ga = gbuf!(*a);
                    for r in 0..n {
                        let mut dot = 0.0;
                        for j in 0..m {
                            let idx = r * m + j;
                            dot += g[idx] * y[idx];
                        }
                        for j in 0..m {
                            let idx = r * m + j;
                            if mask[idx] {
                                ga[idx] += y[idx] * (g[idx] - dot);
                            }
                        }
                    }
                }
            }
            Op::MaskedLogSumExpRows { a, mask } => {
                if wants!(*a) {
                    let y = node.t.data(); // [n]
                    let ad = self.nodes[*a].t.data();
                    let (n, m) = (self.nodes[*a].t.shape()[0], self.nodes[*a].t.shape()[1]);
                    let ga = gbuf!(*a);
                    for r in 0..n {
                        for j in 0..m {
                            let idx = r * m + j;
                            if mask[idx] {
                                ga[idx] += g[r] * (ad[idx] - y[r]).exp();
                            }
                        }
                    }
                }
            }
            Op::RowsL2Normalize { a } => {
                if wants!(*a) {
                    let y = node.t.data();
                    let ad = self.nodes[*a].t.data();
                    let (n, m) = (node.t.shape()[0], node.t.shape()[1]);
                    let ga = gbuf!(*a);
                    for r in 0..n {
                        let row = &ad[r * m..(r + 1) * m];
                        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                        let yrow = &y[r * m..(r + 1) * m];
                        let grow = &g[r * m..(r + 1) * m];
                        let ydotg: f64 = yrow.iter().zip(grow).map(|(yv, gv)| yv * gv).sum();
                        for j in 0..m {
                            ga[r * m + j] += (grow[j] - yrow[j] * ydotg) / norm;
                        }
                    }
                }
            }
            Op::SumAll { a } => {
                if wants!(*a) {
                    let gv = g[0];
                    for o in gbuf!(*a).iter_mut() {
                        *o += gv;
                    }
                }
            }
            Op::MeanAll { a } => {
                if wants!(*a) {
                    let numel = self.nodes[*a].t.numel() as f64;
                    let gv = g[0] / numel;
                    for o in gbuf!(*a).iter_mut() {
                        *o += gv;
                    }
                }
            }
            Op::MaskedMeanRows { a, keep } => {
                if wants!(*a) {
                    let m = node.t.shape()[1];
                    let count = keep.iter().filter(|&&k| k).count() as f64;
                    let ga = gbuf!(*a);
                    for (r, &kept) in keep.iter().enumerate() {
                        if kept {
                            for j in 0..m {
                                ga[r * m + j] += g[j] / count;
                            }
                        }
                    }
                }
            }
            Op::ConcatCols { a, b } => {
                let (n, pa) = (self.nodes[*a].t.shape()[0], self.nodes[*a].t.shape()[1]);
                let pb = self.nodes[*b].t.shape()[1];
                if wants!(*a) {
                    let ga = gbuf!(*a);
                    for i2 in 0..n {
                        for j in 0..pa {
                            ga[i2 * pa + j] += g[i2 * (pa + pb) + j];
                        }
                    }
                }
                if wants!(*b) {
                    let gb = gbuf!(*b);
                    for i2 in 0..n {
                        for j in 0..pb {
                            gb[i2 * pb + j] += g[i2 * (pa + pb) + pa + j];
                        }
                    }
                }
            }
            Op::ConcatRows { parts } => {
                let mut offset = 0;
                for &p in parts {
                    let numel = self.nodes[p].t.numel();
                    if wants!(p) {
                        for (o, gv) in gbuf!(p).iter_mut().zip(&g[offset..offset + numel]) {
                            *o += gv;
                        }
                    }
                    offset += numel;
                }
            }
            Op::SliceCols { a, start, len } => {
                if wants!(*a) {
                    let m = self.nodes[*a].t.shape()[1];
                    let n = self.nodes[*a].t.shape()[0];
                    let ga = gbuf!(*a);
                    for i2 in 0..n {
                        for j in 0..*len {
                            ga[i2 * m + start + j] += g[i2 * len + j];
                        }
                    }
                }
            }
            Op::GatherRows { a, idx } => {
                if wants!(*a) {
                    let m = self.nodes[*a].t.shape()[1];
                    let ga = gbuf!(*a);
                    for (r, &src) in idx.iter().enumerate() {
                        for j in 0..m {
                            ga[src * m + j] += g[r * m + j];
                        }
                    }
                }
            }
            Op::PickPerRow { a, idx } => {
                if wants!(*a) {
                    let m = self.nodes[*a].t.shape()[1];
                    let ga = gbuf!(*a);
                    for (r, &j) in idx.iter().enumerate() {
                        ga[r * m + j] += g[r];
                    }
                }
            }
            Op::Embedding { table, ids } => {
                if wants!(*table) {
                    let dim = self.nodes[*table].t.shape()[1];
                    let gt = gbuf!(*table);
                    for (r, &id) in ids.iter().enumerate() {
                        for j in 0..dim {
                            gt[id * dim + j] += g[r * dim + j];
                        }
                    }
                }
            }
            Op::Reshape { a } => {
                if wants!(*a) {
                    for (o, gv) in gbuf!(*a).iter_mut().zip(g) {
                        *o += gv;
                    }
                }
            }
            Op::Conv3 { vol, ker, stride } => {
                let vs = self.nodes[*vol].t.shape().to_vec();
                let ks = self.nodes[*ker].t.shape().to_vec();
                let vd = self.nodes[*vol].t.data();
                let kd = self.nodes[*ker].t.data();
                let want_v = wants!(*vol);
                let want_k = wants!(*ker);
                // the two gradient buffers live at different indices; split
                // the borrow manually
                if want_v {
                    kernels::conv3_backward(
                        vd, kd, g, vs[0], vs[1], vs[2], vs[3], ks[0], ks[2], *stride,
                        Some(gbuf!(*vol)),
                        None,
                    );
                }
                if want_k {
                    kernels::conv3_backward(
                        vd, kd, g, vs[0], vs[1], vs[2], vs[3], ks[0], ks[2], *stride,
                        None,
                        Some(gbuf!(*ker)),
                    );
                }
            }
            Op::GlobalAvgPool3 { a } => {
                if wants!(*a) {
                    let s = self.nodes[*a].t.shape().to_vec();
                    let block = s[1] * s[2] * s[3];
                    let ga = gbuf!(*a);
                    for ch in 0..s[0] {
                        let gv = g[ch] / block as f64;
                        for o in &mut ga[ch * block..(ch + 1) * block] {
                            *o += gv;
                        }
                    }
                }
            }
            Op::UpsampleNearest2 { a, factor } => {
                if wants!(*a) {
                    let s = self.nodes[*a].t.shape().to_vec();
                    let (c, h, w) = (s[0], s[1], s[2]);
                    let (nh, nw) = (h * factor, w * factor);
                    let ga = gbuf!(*a);
                    for ch in 0..c {
                        for y in 0..nh {
                            for x in 0..nw {
                                ga[(ch * h + y / factor) * w + x / factor] +=
                                    g[(ch * nh + y) * nw + x];
                            }
                        }
                    }
                }
            }
            Op::SoftPool2d { a, h, w, kernel, stride } => {
                if wants!(*a) {
                    let ad = self.nodes[*a].t.data();
                    let yd = node.t.data();
                    let ch = self.nodes[*a].t.shape()[1];
                    let (oh, ow) = ((h - kernel) / stride + 1, (w - kernel) / stride + 1);
                    let ga = gbuf!(*a);
                    let kk = kernel * kernel;
                    let mut vals = vec![0.0; kk];
                    let mut idxs = vec![0usize; kk];
                    for oy in 0..oh {
                        for ox in 0..ow {
                            for c in 0..ch {
                                for dy in 0..*kernel {
                                    for dx in 0..*kernel {
                                        let p = (oy * stride + dy) * w + ox * stride + dx;
                                        vals[dy * kernel + dx] = ad[p * ch + c];
                                        idxs[dy * kernel + dx] = p * ch + c;
                                    }
                                }
                                let out_idx = (oy * ow + ox) * ch + c;
                                let o = yd[out_idx];
                                let gv = g[out_idx];
                                let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                                let wsum: f64 = vals.iter().map(|v| (v - max).exp()).sum();
                                // d out / d a_k = w_k * (1 + a_k - out)
                                for (q, &src) in idxs.iter().enumerate() {
                                    let wk = (vals[q] - max).exp() / wsum;
                                    ga[src] += gv * wk * (1.0 + vals[q] - o);
                                }
                            }
                        }
                    }
                }
            }
            Op::MulConst { a, c } => {
                if wants!(*a) {
                    for ((o, gv), cv) in gbuf!(*a).iter_mut().zip(g).zip(c) {
                        *o += gv * cv;
                    }
                }
            }
        }
    }

    // ── helpers ────────────────────────────────────────────────────────

    fn dims2(&self, a: TensorId, context: &'static str) -> Result<(usize, usize)> {
        let s = self.shape(a);
        if s.len() != 2 {
            return Err(Error::ShapeMismatch {
                context,
                lhs: s.to_vec(),
                rhs: vec![0, 0],
            });
        }
        Ok((s[0], s[1]))
    }

    fn binary_same_shape(&self, a: TensorId, b: TensorId, context: &'static str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::ShapeMismatch {
                context: match context {
                    "add" => "elementwise add",
                    "sub" => "elementwise sub",
                    _ => "elementwise mul",
                },
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }
}

/// Visit every 1-D slice along `axis` of a tensor with the given shape,
/// calling `f(start, len, stride)` per slice.
fn for_each_axis_slice(shape: &[usize], axis: usize, mut f: impl FnMut(usize, usize, usize)) {
    let len = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    for o in 0..outer {
        for i in 0..inner {
            f(o * len * inner + i, len, inner);
        }
    }
}
