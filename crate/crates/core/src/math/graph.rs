//! Tape-style reverse-mode differentiation over [`Tensor`]s.
//!
//! A [`Graph`] records every operation as it is evaluated. Nodes are
//! appended in evaluation order, so the node list is already a topological
//! order and [`Graph::backward`] walks it once in reverse. Parameters are
//! bound into a graph at most once; every use of a parameter therefore
//! shares one node and its gradient is the sum over all uses.

use std::collections::HashMap;

use super::tensor::{self, check_same, matmul_nt, matmul_tn, sigmoid, softmax_rows, Tensor};
use super::{ParamId, ParamStore};
use crate::error::{Error, Result};

/// Floor applied to gold-tag probabilities inside the log of the
/// cross-entropy loss.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param,
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Softmax(NodeId),
    ConcatRows(Vec<NodeId>),
    ConcatCols(Vec<NodeId>),
    SliceRows { src: NodeId, start: usize },
    SliceCols { src: NodeId, start: usize },
    MaxOverRows { src: NodeId, argmax: Vec<usize> },
    MeanRows(NodeId),
    Sum(NodeId),
    GatherRows { src: NodeId, index: Vec<Option<usize>> },
    CrossEntropy { probs: NodeId, gold: Vec<usize> },
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
    /// Whether any parameter is upstream of this node.
    tracked: bool,
}

/// Gradients of a scalar loss with respect to the parameters bound in a graph.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    grads: HashMap<ParamId, Tensor>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.grads.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    /// Global L2 norm over every gradient entry.
    pub fn global_norm(&self) -> f64 {
        self.grads.values().map(Tensor::squared_norm).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        self.grads.values_mut().for_each(|g| g.scale_assign(s));
    }
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    bound: HashMap<ParamId, NodeId>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> [usize; 2] {
        self.nodes[id.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op, tracked: bool) -> NodeId {
        self.nodes.push(Node { value, op, tracked });
        NodeId(self.nodes.len() - 1)
    }

    fn tracked(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].tracked)
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Constant, false)
    }

    /// Binds a parameter into the graph, reusing the existing node if the
    /// parameter was bound before.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        if let Some(&node) = self.bound.get(&id) {
            return node;
        }
        let node = self.push(store.get(id).clone(), Op::Param, true);
        self.bound.insert(id, node);
        node
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = tensor::matmul(self.value(a), self.value(b))?;
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), tracked))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).transpose();
        let tracked = self.tracked(&[a]);
        self.push(value, Op::Transpose(a), tracked)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        check_same("add", self.value(a), self.value(b))?;
        let mut value = self.value(a).clone();
        value.add_assign(self.value(b));
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), tracked))
    }

    /// Adds the `1 × n` row `row` to every row of `a`.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let (av, rv) = (self.value(a), self.value(row));
        if rv.rows() != 1 || rv.cols() != av.cols() {
            return Err(Error::ShapeMismatch {
                op: "add_row",
                left: av.shape(),
                right: rv.shape(),
            });
        }
        let mut value = av.clone();
        for r in 0..value.rows() {
            for (x, b) in value.row_slice_mut(r).iter_mut().zip(rv.data()) {
                *x += b;
            }
        }
        let tracked = self.tracked(&[a, row]);
        Ok(self.push(value, Op::AddRow(a, row), tracked))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        check_same("sub", self.value(a), self.value(b))?;
        let value = Tensor::new(
            self.value(a).rows(),
            self.value(a).cols(),
            self.value(a)
                .data()
                .iter()
                .zip(self.value(b).data())
                .map(|(x, y)| x - y)
                .collect(),
        )?;
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(value, Op::Sub(a, b), tracked))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        check_same("mul", self.value(a), self.value(b))?;
        let value = Tensor::new(
            self.value(a).rows(),
            self.value(a).cols(),
            self.value(a)
                .data()
                .iter()
                .zip(self.value(b).data())
                .map(|(x, y)| x * y)
                .collect(),
        )?;
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(value, Op::Mul(a, b), tracked))
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let value = self.value(a).map(|x| x * s);
        let tracked = self.tracked(&[a]);
        self.push(value, Op::Scale(a, s), tracked)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(f64::tanh);
        let tracked = self.tracked(&[a]);
        self.push(value, Op::Tanh(a), tracked)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(sigmoid);
        let tracked = self.tracked(&[a]);
        self.push(value, Op::Sigmoid(a), tracked)
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let value = softmax_rows(self.value(a));
        let tracked = self.tracked(&[a]);
        self.push(value, Op::Softmax(a), tracked)
    }

    /// Stacks inputs vertically; all inputs need the same column count.
    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::InvalidTensor("concat_rows of nothing".into()))?;
        let cols = self.value(first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            if v.cols() != cols {
                return Err(Error::ShapeMismatch {
                    op: "concat_rows",
                    left: self.value(first).shape(),
                    right: v.shape(),
                });
            }
            rows += v.rows();
            data.extend_from_slice(v.data());
        }
        let value = Tensor::new(rows, cols, data)?;
        let tracked = self.tracked(parts);
        Ok(self.push(value, Op::ConcatRows(parts.to_vec()), tracked))
    }

    /// Joins inputs side by side; all inputs need the same row count.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::InvalidTensor("concat_cols of nothing".into()))?;
        let rows = self.value(first).rows();
        for &p in parts {
            if self.value(p).rows() != rows {
                return Err(Error::ShapeMismatch {
                    op: "concat_cols",
                    left: self.value(first).shape(),
                    right: self.value(p).shape(),
                });
            }
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let value = Tensor::new(rows, cols, data)?;
        let tracked = self.tracked(parts);
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), tracked))
    }

    /// Rows `start .. start + len` of `src`.
    pub fn slice_rows(&mut self, src: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let v = self.value(src);
        if len == 0 || start + len > v.rows() {
            return Err(Error::InvalidTensor(format!(
                "slice_rows {start}..{} out of bounds for shape {:?}",
                start + len,
                v.shape()
            )));
        }
        let value = Tensor::new(
            len,
            v.cols(),
            v.data()[start * v.cols()..(start + len) * v.cols()].to_vec(),
        )?;
        let tracked = self.tracked(&[src]);
        Ok(self.push(value, Op::SliceRows { src, start }, tracked))
    }

    /// Columns `start .. start + len` of `src`.
    pub fn slice_cols(&mut self, src: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let v = self.value(src);
        if len == 0 || start + len > v.cols() {
            return Err(Error::InvalidTensor(format!(
                "slice_cols {start}..{} out of bounds for shape {:?}",
                start + len,
                v.shape()
            )));
        }
        let mut data = Vec::with_capacity(v.rows() * len);
        for r in 0..v.rows() {
            data.extend_from_slice(&v.row_slice(r)[start..start + len]);
        }
        let value = Tensor::new(v.rows(), len, data)?;
        let tracked = self.tracked(&[src]);
        Ok(self.push(value, Op::SliceCols { src, start }, tracked))
    }

    /// Column-wise maximum over rows, giving a `1 × n` row. The gradient
    /// goes to the first row attaining the maximum.
    pub fn max_over_rows(&mut self, src: NodeId) -> NodeId {
        let v = self.value(src);
        let mut argmax = vec![0usize; v.cols()];
        let mut out = v.row_slice(0).to_vec();
        for r in 1..v.rows() {
            for (c, &x) in v.row_slice(r).iter().enumerate() {
                if x > out[c] {
                    out[c] = x;
                    argmax[c] = r;
                }
            }
        }
        let tracked = self.tracked(&[src]);
        self.push(Tensor::row(out), Op::MaxOverRows { src, argmax }, tracked)
    }

    /// Column-wise mean over rows, giving a `1 × n` row.
    pub fn mean_rows(&mut self, src: NodeId) -> NodeId {
        let v = self.value(src);
        let n = v.rows() as f64;
        let mut out = vec![0.0; v.cols()];
        for r in 0..v.rows() {
            for (o, x) in out.iter_mut().zip(v.row_slice(r)) {
                *o += x;
            }
        }
        out.iter_mut().for_each(|x| *x /= n);
        let tracked = self.tracked(&[src]);
        self.push(Tensor::row(out), Op::MeanRows(src), tracked)
    }

    pub fn sum(&mut self, src: NodeId) -> NodeId {
        let value = Tensor::scalar(self.value(src).sum());
        let tracked = self.tracked(&[src]);
        self.push(value, Op::Sum(src), tracked)
    }

    /// Selects rows of `src` by index; `None` yields a zero row.
    pub fn gather_rows(&mut self, src: NodeId, index: &[Option<usize>]) -> Result<NodeId> {
        let v = self.value(src);
        if index.is_empty() {
            return Err(Error::InvalidTensor("gather_rows with no indices".into()));
        }
        let mut data = Vec::with_capacity(index.len() * v.cols());
        for &i in index {
            match i {
                Some(i) if i < v.rows() => data.extend_from_slice(v.row_slice(i)),
                Some(i) => {
                    return Err(Error::InvalidTensor(format!(
                        "gather_rows index {i} out of range for {} rows",
                        v.rows()
                    )))
                }
                None => data.extend(std::iter::repeat_n(0.0, v.cols())),
            }
        }
        let value = Tensor::new(index.len(), v.cols(), data)?;
        let tracked = self.tracked(&[src]);
        Ok(self.push(
            value,
            Op::GatherRows {
                src,
                index: index.to_vec(),
            },
            tracked,
        ))
    }

    /// `-Σ_t ln p[t, gold_t]` over a `T × K` matrix of row distributions,
    /// with probabilities floored at [`PROB_FLOOR`].
    pub fn cross_entropy(&mut self, probs: NodeId, gold: &[usize]) -> Result<NodeId> {
        let p = self.value(probs);
        if p.rows() != gold.len() {
            return Err(Error::ShapeMismatch {
                op: "cross_entropy",
                left: p.shape(),
                right: [gold.len(), 1],
            });
        }
        let mut loss = 0.0;
        for (t, &g) in gold.iter().enumerate() {
            if g >= p.cols() {
                return Err(Error::InvalidTensor(format!(
                    "gold index {g} out of range for {} tags",
                    p.cols()
                )));
            }
            loss -= p.get(t, g).max(PROB_FLOOR).ln();
        }
        let tracked = self.tracked(&[probs]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                probs,
                gold: gold.to_vec(),
            },
            tracked,
        ))
    }

    /// Reverse pass from a scalar node. Every bound parameter receives a
    /// gradient (zero when the loss does not depend on it).
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let shape = self.shape(loss);
        if shape != [1, 1] {
            return Err(Error::NonScalarLoss(shape));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.tracked {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads);
            // keep parameter gradients for collection below
            if matches!(node.op, Op::Param) {
                grads[idx] = Some(g);
            }
        }

        let mut out = Gradients::default();
        for (&pid, &node) in &self.bound {
            let g = if node.0 <= loss.0 { grads[node.0].take() } else { None };
            let g = g.unwrap_or_else(|| {
                let [r, c] = self.shape(node);
                Tensor::zeros(r, c)
            });
            out.grads.insert(pid, g);
        }
        Ok(out)
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let y = &node.value;
        match &node.op {
            Op::Constant | Op::Param => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.nodes[a.0].tracked {
                    self.accumulate(grads, *a, matmul_nt(g, bv));
                }
                if self.nodes[b.0].tracked {
                    self.accumulate(grads, *b, matmul_tn(av, g));
                }
            }
            Op::Transpose(a) => self.accumulate(grads, *a, g.transpose()),
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::AddRow(a, row) => {
                self.accumulate(grads, *a, g.clone());
                let mut col_sums = vec![0.0; g.cols()];
                for r in 0..g.rows() {
                    for (s, x) in col_sums.iter_mut().zip(g.row_slice(r)) {
                        *s += x;
                    }
                }
                self.accumulate(grads, *row, Tensor::row(col_sums));
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                self.accumulate(grads, *a, zip_map(g, bv, |x, y| x * y));
                self.accumulate(grads, *b, zip_map(g, av, |x, y| x * y));
            }
            Op::Scale(a, s) => self.accumulate(grads, *a, g.map(|x| x * s)),
            Op::Tanh(a) => self.accumulate(grads, *a, zip_map(g, y, |gx, yx| gx * (1.0 - yx * yx))),
            Op::Sigmoid(a) => self.accumulate(grads, *a, zip_map(g, y, |gx, yx| gx * yx * (1.0 - yx))),
            Op::Softmax(a) => {
                let mut dx = Tensor::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row_slice(r), g.row_slice(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                    for (d, (p, q)) in dx.row_slice_mut(r).iter_mut().zip(yr.iter().zip(gr)) {
                        *d = p * (q - dot);
                    }
                }
                self.accumulate(grads, *a, dx);
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let rows = self.value(p).rows();
                    let cols = g.cols();
                    let part = Tensor::new(rows, cols, g.data()[offset * cols..(offset + rows) * cols].to_vec())
                        .expect("concat_rows slice");
                    self.accumulate(grads, p, part);
                    offset += rows;
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let cols = self.value(p).cols();
                    let mut data = Vec::with_capacity(g.rows() * cols);
                    for r in 0..g.rows() {
                        data.extend_from_slice(&g.row_slice(r)[offset..offset + cols]);
                    }
                    let part = Tensor::new(g.rows(), cols, data).expect("concat_cols slice");
                    self.accumulate(grads, p, part);
                    offset += cols;
                }
            }
            Op::SliceRows { src, start } => {
                let [r, c] = self.shape(*src);
                let mut dx = Tensor::zeros(r, c);
                dx.data_mut()[start * c..start * c + g.len()].copy_from_slice(g.data());
                self.accumulate(grads, *src, dx);
            }
            Op::SliceCols { src, start } => {
                let [r, c] = self.shape(*src);
                let mut dx = Tensor::zeros(r, c);
                for row in 0..r {
                    dx.row_slice_mut(row)[*start..start + g.cols()].copy_from_slice(g.row_slice(row));
                }
                self.accumulate(grads, *src, dx);
            }
            Op::MaxOverRows { src, argmax } => {
                let [r, c] = self.shape(*src);
                let mut dx = Tensor::zeros(r, c);
                for (col, &row) in argmax.iter().enumerate() {
                    dx.set(row, col, g.get(0, col));
                }
                self.accumulate(grads, *src, dx);
            }
            Op::MeanRows(src) => {
                let [r, c] = self.shape(*src);
                let mut dx = Tensor::zeros(r, c);
                for row in 0..r {
                    for (d, x) in dx.row_slice_mut(row).iter_mut().zip(g.data()) {
                        *d = x / r as f64;
                    }
                }
                self.accumulate(grads, *src, dx);
            }
            Op::Sum(src) => {
                let [r, c] = self.shape(*src);
                self.accumulate(grads, *src, Tensor::filled(r, c, g.item()));
            }
            Op::GatherRows { src, index } => {
                let [r, c] = self.shape(*src);
                let mut dx = Tensor::zeros(r, c);
                for (out_row, i) in index.iter().enumerate() {
                    if let Some(i) = i {
                        for (d, x) in dx.row_slice_mut(*i).iter_mut().zip(g.row_slice(out_row)) {
                            *d += x;
                        }
                    }
                }
                self.accumulate(grads, *src, dx);
            }
            Op::CrossEntropy { probs, gold } => {
                let p = self.value(*probs);
                let mut dx = Tensor::zeros(p.rows(), p.cols());
                let scale = g.item();
                for (t, &k) in gold.iter().enumerate() {
                    let pk = p.get(t, k);
                    if pk > PROB_FLOOR {
                        dx.set(t, k, -scale / pk);
                    }
                }
                self.accumulate(grads, *probs, dx);
            }
        }
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
        if !self.nodes[id.0].tracked {
            return;
        }
        match &mut grads[id.0] {
            Some(acc) => acc.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor::new(
        a.rows(),
        a.cols(),
        a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect(),
    )
    .expect("zip_map shapes")
}
