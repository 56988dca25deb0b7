//! Eager computation tape: forward values are computed as nodes are pushed,
//! and `backward` replays the recorded primitives in reverse.
//!
//! The primitive set is fixed — matrix product, transpose, bias/elementwise
//! add, elementwise multiply, constant scale, tanh, masked softmax,
//! cross-entropy, embedding lookup, row/column concatenation, row slice,
//! and mean. The two models in this crate are built from exactly these.

use super::error::NumError;
use super::ops;
use super::params::{ParamId, ParamSet};
use super::scalar::Scalar;
use super::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op<S> {
    Input,
    Param(ParamId),
    Matmul(NodeId, NodeId),
    Transpose(NodeId),
    AddBias(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, S),
    Tanh(NodeId),
    MaskedSoftmax(NodeId, Vec<bool>),
    CrossEntropy(NodeId, Vec<usize>),
    Embedding(NodeId, Vec<usize>),
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    SliceRows(NodeId, usize, usize),
    Mean(NodeId),
}

struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
}

/// Recorded forward computation over one batch.
pub struct Tape<S> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<S> {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>) -> NodeId {
        debug_assert!(
            value.data().iter().all(|x| x.is_finite()),
            "non-finite value pushed onto the tape"
        );
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { value, op });
        id
    }

    /// Constant leaf (no gradient flows out of it).
    pub fn input(&mut self, value: Tensor<S>) -> NodeId {
        self.push(value, Op::Input)
    }

    /// Convenience for an all-zero constant leaf.
    pub fn zeros(&mut self, shape: &[usize]) -> NodeId {
        self.input(Tensor::zeros(shape))
    }

    /// Leaf bound to a parameter; `backward` accumulates into its grad.
    pub fn param(&mut self, params: &ParamSet<S>, id: ParamId) -> NodeId {
        self.push(params.get(id).value.clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        let v = ops::matmul(self.value(a), self.value(b), "matmul")?;
        Ok(self.push(v, Op::Matmul(a, b)))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = ops::transpose(self.value(a));
        self.push(v, Op::Transpose(a))
    }

    pub fn add_bias(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId, NumError> {
        let v = ops::add_bias(self.value(a), self.value(bias), "add_bias")?;
        Ok(self.push(v, Op::AddBias(a, bias)))
    }

    /// `a · w + bias` in one call.
    pub fn linear(&mut self, a: NodeId, w: NodeId, bias: NodeId) -> Result<NodeId, NumError> {
        let prod = self.matmul(a, w)?;
        self.add_bias(prod, bias)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(NumError::DimMismatch {
                op: "add",
                left: av.shape().to_vec(),
                right: bv.shape().to_vec(),
            });
        }
        let mut v = av.clone();
        for (o, &x) in v.data_mut().iter_mut().zip(bv.data()) {
            *o += x;
        }
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(NumError::DimMismatch {
                op: "mul",
                left: av.shape().to_vec(),
                right: bv.shape().to_vec(),
            });
        }
        let mut v = av.clone();
        for (o, &x) in v.data_mut().iter_mut().zip(bv.data()) {
            *o *= x;
        }
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: NodeId, c: S) -> NodeId {
        let mut v = self.value(a).clone();
        for o in v.data_mut() {
            *o *= c;
        }
        self.push(v, Op::Scale(a, c))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        for o in v.data_mut() {
            *o = o.tanh();
        }
        self.push(v, Op::Tanh(a))
    }

    /// Row-wise softmax over the columns where `mask` is true; masked
    /// columns are exactly zero.
    pub fn masked_softmax(&mut self, a: NodeId, mask: &[bool]) -> Result<NodeId, NumError> {
        let v = ops::masked_softmax(self.value(a), mask)?;
        Ok(self.push(v, Op::MaskedSoftmax(a, mask.to_vec())))
    }

    /// Mean over rows of `−log softmax(row)[label]`; returns a 1-element node.
    pub fn cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId, NumError> {
        let loss = ops::cross_entropy(self.value(logits), labels)?;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy(logits, labels.to_vec()),
        ))
    }

    /// Gather rows of `table` (a 2-D node) at `ids`.
    pub fn embedding(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId, NumError> {
        let t = self.value(table);
        let (rows, cols) = t.dims2();
        let mut data = Vec::with_capacity(ids.len() * cols);
        for &id in ids {
            if id >= rows {
                return Err(NumError::EmbeddingIdOutOfRange { id, rows });
            }
            data.extend_from_slice(t.row(id));
        }
        let v = Tensor::from_vec(&[ids.len(), cols], data)?;
        Ok(self.push(v, Op::Embedding(table, ids.to_vec())))
    }

    /// Concatenate along columns; all parts must share the row count.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId, NumError> {
        assert!(!parts.is_empty(), "concat_cols of nothing");
        let (rows, _) = self.value(parts[0]).dims2();
        let mut total_cols = 0;
        for &p in parts {
            let (r, c) = self.value(p).dims2();
            if r != rows {
                return Err(NumError::DimMismatch {
                    op: "concat_cols",
                    left: self.value(parts[0]).shape().to_vec(),
                    right: self.value(p).shape().to_vec(),
                });
            }
            total_cols += c;
        }
        let mut out = Tensor::zeros(&[rows, total_cols]);
        let mut offset = 0;
        for &p in parts {
            let pv = self.value(p);
            let (_, c) = pv.dims2();
            for r in 0..rows {
                let src = pv.row(r);
                let dst_start = r * total_cols + offset;
                out.data_mut()[dst_start..dst_start + c].copy_from_slice(src);
            }
            offset += c;
        }
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    /// Concatenate along rows; all parts must share the column count.
    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId, NumError> {
        assert!(!parts.is_empty(), "concat_rows of nothing");
        let (_, cols) = self.value(parts[0]).dims2();
        let mut total_rows = 0;
        for &p in parts {
            let (r, c) = self.value(p).dims2();
            if c != cols {
                return Err(NumError::DimMismatch {
                    op: "concat_rows",
                    left: self.value(parts[0]).shape().to_vec(),
                    right: self.value(p).shape().to_vec(),
                });
            }
            total_rows += r;
        }
        let mut data = Vec::with_capacity(total_rows * cols);
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        let out = Tensor::from_vec(&[total_rows, cols], data)?;
        Ok(self.push(out, Op::ConcatRows(parts.to_vec())))
    }

    /// Rows `start .. start+len` of a 2-D node.
    pub fn slice_rows(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId, NumError> {
        let v = self.value(a);
        let (rows, cols) = v.dims2();
        if start + len > rows || len == 0 {
            return Err(NumError::BadShape {
                op: "slice_rows",
                expected: "a nonempty in-bounds row range",
                got: vec![start, len, rows],
            });
        }
        let data = v.data()[start * cols..(start + len) * cols].to_vec();
        let out = Tensor::from_vec(&[len, cols], data)?;
        Ok(self.push(out, Op::SliceRows(a, start, len)))
    }

    /// Mean over every element; returns a 1-element node.
    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        let n = v.len().max(1);
        let sum: S = v.data().iter().copied().sum();
        let value = Tensor::scalar(sum / S::of(n as f64));
        self.push(value, Op::Mean(a))
    }

    /// Reverse pass from a 1-element `loss` node. Gradients of parameter
    /// leaves are accumulated (added) into `params`; calling `backward`
    /// again without `params.zero_grads()` keeps accumulating.
    pub fn backward(&mut self, loss: NodeId, params: &mut ParamSet<S>) -> Result<(), NumError> {
        if self.value(loss).len() != 1 {
            return Err(NumError::NonScalarLoss {
                shape: self.value(loss).shape().to_vec(),
            });
        }
        let mut grads: Vec<Tensor<S>> = self
            .nodes
            .iter()
            .map(|n| Tensor::zeros(n.value.shape()))
            .collect();
        grads[loss.0].data_mut()[0] = S::one();

        for i in (0..=loss.0).rev() {
            let g = std::mem::replace(&mut grads[i], Tensor::zeros(&[0]));
            if g.data().iter().all(|&x| x == S::zero()) {
                continue;
            }
            match &self.nodes[i].op {
                Op::Input => {}
                Op::Param(pid) => {
                    let dst = params.get_mut(*pid);
                    for (d, &s) in dst.grad.data_mut().iter_mut().zip(g.data()) {
                        *d += s;
                    }
                }
                Op::Matmul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let (n, k) = av.dims2();
                    let (_, m) = bv.dims2();
                    // da += g · bᵀ
                    {
                        let (gd, bd) = (g.data(), bv.data());
                        let da = grads[a.0].data_mut();
                        for r in 0..n {
                            for p in 0..k {
                                let brow = &bd[p * m..(p + 1) * m];
                                let grow = &gd[r * m..(r + 1) * m];
                                let mut acc = S::zero();
                                for (gv, bvv) in grow.iter().zip(brow) {
                                    acc += *gv * *bvv;
                                }
                                da[r * k + p] += acc;
                            }
                        }
                    }
                    // db += aᵀ · g
                    {
                        let (gd, ad) = (g.data(), av.data());
                        let db = grads[b.0].data_mut();
                        for r in 0..n {
                            let grow = &gd[r * m..(r + 1) * m];
                            for p in 0..k {
                                let avv = ad[r * k + p];
                                if avv == S::zero() {
                                    continue;
                                }
                                let dbrow = &mut db[p * m..(p + 1) * m];
                                for (d, &gv) in dbrow.iter_mut().zip(grow) {
                                    *d += avv * gv;
                                }
                            }
                        }
                    }
                }
                Op::Transpose(a) => {
                    let gt = ops::transpose(&g);
                    for (d, &s) in grads[a.0].data_mut().iter_mut().zip(gt.data()) {
                        *d += s;
                    }
                }
                Op::AddBias(a, bias) => {
                    let (rows, cols) = g.dims2();
                    for (d, &s) in grads[a.0].data_mut().iter_mut().zip(g.data()) {
                        *d += s;
                    }
                    let db = grads[bias.0].data_mut();
                    for r in 0..rows {
                        for c in 0..cols {
                            db[c] += g.data()[r * cols + c];
                        }
                    }
                }
                Op::Add(a, b) => {
                    for (d, &s) in grads[a.0].data_mut().iter_mut().zip(g.data()) {
                        *d += s;
                    }
                    for (d, &s) in grads[b.0].data_mut().iter_mut().zip(g.data()) {
                        *d += s;
                    }
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    {
                        let bv = self.nodes[b.0].value.data().to_vec();
                        for ((d, &s), &x) in grads[a.0].data_mut().iter_mut().zip(g.data()).zip(&bv)
                        {
                            *d += s * x;
                        }
                    }
                    {
                        let av = self.nodes[a.0].value.data().to_vec();
                        for ((d, &s), &x) in grads[b.0].data_mut().iter_mut().zip(g.data()).zip(&av)
                        {
                            *d += s * x;
                        }
                    }
                }
                Op::Scale(a, c) => {
                    let c = *c;
                    for (d, &s) in grads[a.0].data_mut().iter_mut().zip(g.data()) {
                        *d += s * c;
                    }
                }
                Op::Tanh(a) => {
                    let y = &self.nodes[i].value;
                    let da = grads[a.0].data_mut();
                    for ((d, &s), &yv) in da.iter_mut().zip(g.data()).zip(y.data()) {
                        *d += s * (S::one() - yv * yv);
                    }
                }
                Op::MaskedSoftmax(a, _mask) => {
                    // y is zero on masked slots, so y·(g − Σ g·y) vanishes there.
                    let y = &self.nodes[i].value;
                    let (rows, cols) = y.dims2();
                    let da = grads[a.0].data_mut();
                    for r in 0..rows {
                        let yrow = &y.data()[r * cols..(r + 1) * cols];
                        let grow = &g.data()[r * cols..(r + 1) * cols];
                        let mut dot = S::zero();
                        for (&yv, &gv) in yrow.iter().zip(grow) {
                            dot += yv * gv;
                        }
                        for c in 0..cols {
                            da[r * cols + c] += yrow[c] * (grow[c] - dot);
                        }
                    }
                }
                Op::CrossEntropy(logits, labels) => {
                    let g0 = g.item();
                    let lv = &self.nodes[logits.0].value;
                    let (rows, cols) = lv.dims2();
                    let inv_n = S::one() / S::of(rows as f64);
                    let dl = grads[logits.0].data_mut();
                    for r in 0..rows {
                        let probs = ops::softmax_row(lv.row(r));
                        for c in 0..cols {
                            let delta = if c == labels[r] { S::one() } else { S::zero() };
                            dl[r * cols + c] += g0 * (probs[c] - delta) * inv_n;
                        }
                    }
                }
                Op::Embedding(table, ids) => {
                    let (_, cols) = g.dims2();
                    let dt = grads[table.0].data_mut();
                    for (r, &id) in ids.iter().enumerate() {
                        let grow = &g.data()[r * cols..(r + 1) * cols];
                        let drow = &mut dt[id * cols..(id + 1) * cols];
                        for (d, &s) in drow.iter_mut().zip(grow) {
                            *d += s;
                        }
                    }
                }
                Op::ConcatCols(parts) => {
                    let parts = parts.clone();
                    let (rows, total_cols) = g.dims2();
                    let mut offset = 0;
                    for p in parts {
                        let (_, c) = self.nodes[p.0].value.dims2();
                        let dp = grads[p.0].data_mut();
                        for r in 0..rows {
                            let src =
                                &g.data()[r * total_cols + offset..r * total_cols + offset + c];
                            for (d, &s) in dp[r * c..(r + 1) * c].iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                        offset += c;
                    }
                }
                Op::ConcatRows(parts) => {
                    let parts = parts.clone();
                    let mut offset = 0;
                    for p in parts {
                        let len = self.nodes[p.0].value.len();
                        let src = &g.data()[offset..offset + len];
                        for (d, &s) in grads[p.0].data_mut().iter_mut().zip(src) {
                            *d += s;
                        }
                        offset += len;
                    }
                }
                Op::SliceRows(a, start, _len) => {
                    let (_, cols) = self.nodes[a.0].value.dims2();
                    let da = grads[a.0].data_mut();
                    let base = start * cols;
                    for (d, &s) in da[base..base + g.len()].iter_mut().zip(g.data()) {
                        *d += s;
                    }
                }
                Op::Mean(a) => {
                    let n = self.nodes[a.0].value.len().max(1);
                    let s = g.item() / S::of(n as f64);
                    for d in grads[a.0].data_mut() {
                        *d += s;
                    }
                }
            }
        }
        Ok(())
    }
}
