//! Define-by-run reverse-mode automatic differentiation over dense
//! matrices and sparse-dense products.
//!
//! A [`Tape`] records every operation in topological order; calling
//! [`Tape::backward`] on a scalar (1x1) node accumulates gradients for
//! every trainable leaf. Tapes are rebuilt each training step, so the
//! recorded graph always matches the current batch.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::tensor::matrix::{matmul, matmul_nt, matmul_tn, DenseMatrix};
use crate::tensor::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

enum Op<S> {
    Leaf { trainable: bool },
    MatMul(NodeId, NodeId),
    Spmm { a: Arc<SparseMatrix<S>>, x: NodeId },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    AddRow { x: NodeId, row: NodeId },
    MulRow { x: NodeId, row: NodeId },
    Relu(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Exp(NodeId),
    Softplus(NodeId),
    Clamp { x: NodeId, lo: S, hi: S },
    Transpose(NodeId),
    ConcatCols(NodeId, NodeId),
    ConcatRows(NodeId, NodeId),
    GatherRows { x: NodeId, idx: Arc<Vec<usize>> },
    Sum(NodeId),
    Mean(NodeId),
    Square(NodeId),
    ScalarMul(NodeId, S),
}

impl<S> Op<S> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf { .. } => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Spmm { .. } => "spmm",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::AddRow { .. } => "add_row",
            Op::MulRow { .. } => "mul_row",
            Op::Relu(..) => "relu",
            Op::Tanh(..) => "tanh",
            Op::Sigmoid(..) => "sigmoid",
            Op::Exp(..) => "exp",
            Op::Softplus(..) => "softplus",
            Op::Clamp { .. } => "clamp",
            Op::Transpose(..) => "transpose",
            Op::ConcatCols(..) => "concat_cols",
            Op::ConcatRows(..) => "concat_rows",
            Op::GatherRows { .. } => "gather_rows",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
            Op::Square(..) => "square",
            Op::ScalarMul(..) => "scalar_mul",
        }
    }
}

struct Node<S> {
    op: Op<S>,
    value: DenseMatrix<S>,
}

pub struct Tape<S> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by [`Tape::backward`], indexed by node.
pub struct Gradients<S> {
    grads: Vec<Option<DenseMatrix<S>>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn get(&self, id: NodeId) -> Option<&DenseMatrix<S>> {
        self.grads[id.0].as_ref()
    }
}

/// Numerically stable logistic sigmoid.
pub fn sigmoid_scalar<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// softplus(x) = ln(1 + e^x), computed without overflow.
pub fn softplus_scalar<S: Scalar>(x: S) -> S {
    let zero = S::zero();
    let pos = if x > zero { x } else { zero };
    pos + (-x.abs()).exp().ln_1p()
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &DenseMatrix<S> {
        &self.nodes[id.0].value
    }

    /// Non-trainable input (data, noise, constants).
    pub fn constant(&mut self, value: DenseMatrix<S>) -> NodeId {
        self.push_unchecked(Op::Leaf { trainable: false }, value)
    }

    /// Trainable leaf parameter.
    pub fn var(&mut self, value: DenseMatrix<S>) -> NodeId {
        self.push_unchecked(Op::Leaf { trainable: true }, value)
    }

    fn push_unchecked(&mut self, op: Op<S>, value: DenseMatrix<S>) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, value });
        id
    }

    fn push(&mut self, op: Op<S>, value: DenseMatrix<S>) -> Result<NodeId> {
        if !value.all_finite() {
            return Err(Error::Numerical(format!(
                "non-finite output in {}",
                op.name()
            )));
        }
        Ok(self.push_unchecked(op, value))
    }

    fn shape(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.shape()
    }

    fn shape_err(&self, op: &str, ids: &[NodeId]) -> Error {
        let shapes: Vec<String> = ids
            .iter()
            .map(|id| {
                let (r, c) = self.shape(*id);
                format!("{}x{}", r, c)
            })
            .collect();
        Error::Contract(format!("{}: incompatible shapes [{}]", op, shapes.join(", ")))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.shape(a).1 != self.shape(b).0 {
            return Err(self.shape_err("matmul", &[a, b]));
        }
        let value = matmul(&self.nodes[a.0].value, &self.nodes[b.0].value);
        self.push(Op::MatMul(a, b), value)
    }

    /// Sparse-dense product; the sparse operand is fixed data and
    /// receives no gradient.
    pub fn spmm(&mut self, a: Arc<SparseMatrix<S>>, x: NodeId) -> Result<NodeId> {
        if a.cols() != self.shape(x).0 {
            return Err(Error::Contract(format!(
                "spmm: sparse {}x{} against dense {}x{}",
                a.rows(),
                a.cols(),
                self.shape(x).0,
                self.shape(x).1
            )));
        }
        let value = a.mul_dense(&self.nodes[x.0].value);
        self.push(Op::Spmm { a, x }, value)
    }

    fn binary_same_shape(
        &mut self,
        a: NodeId,
        b: NodeId,
        make: impl Fn(NodeId, NodeId) -> Op<S>,
        f: impl Fn(S, S) -> S,
    ) -> Result<NodeId> {
        let op = make(a, b);
        if self.shape(a) != self.shape(b) {
            return Err(self.shape_err(op.name(), &[a, b]));
        }
        let (rows, cols) = self.shape(a);
        let av = self.nodes[a.0].value.data();
        let bv = self.nodes[b.0].value.data();
        let data: Vec<S> = av.iter().zip(bv).map(|(&x, &y)| f(x, y)).collect();
        let value = DenseMatrix::from_vec(rows, cols, data)?;
        self.push(op, value)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape(a, b, Op::Add, |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape(a, b, Op::Sub, |x, y| x - y)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape(a, b, Op::Mul, |x, y| x * y)
    }

    fn row_broadcast(
        &mut self,
        x: NodeId,
        row: NodeId,
        make: impl Fn(NodeId, NodeId) -> Op<S>,
        f: impl Fn(S, S) -> S,
    ) -> Result<NodeId> {
        let op = make(x, row);
        let (rows, cols) = self.shape(x);
        if self.shape(row) != (1, cols) {
            return Err(self.shape_err(op.name(), &[x, row]));
        }
        let xv = &self.nodes[x.0].value;
        let rv = self.nodes[row.0].value.row(0);
        let mut out = DenseMatrix::zeros(rows, cols);
        for i in 0..rows {
            let xrow = xv.row(i);
            let orow = out.row_mut(i);
            for ((o, &xval), &rval) in orow.iter_mut().zip(xrow).zip(rv) {
                *o = f(xval, rval);
            }
        }
        self.push(op, out)
    }

    /// Broadcast-add a 1xC row vector to every row of x.
    pub fn add_row(&mut self, x: NodeId, row: NodeId) -> Result<NodeId> {
        self.row_broadcast(x, row, |x, row| Op::AddRow { x, row }, |a, b| a + b)
    }

    /// Broadcast-multiply every row of x by a 1xC row vector.
    pub fn mul_row(&mut self, x: NodeId, row: NodeId) -> Result<NodeId> {
        self.row_broadcast(x, row, |x, row| Op::MulRow { x, row }, |a, b| a * b)
    }

    fn unary(
        &mut self,
        x: NodeId,
        op: Op<S>,
        f: impl Fn(S) -> S,
    ) -> Result<NodeId> {
        let value = self.nodes[x.0].value.map(f);
        self.push(op, value)
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, Op::Relu(x), |v| if v > S::zero() { v } else { S::zero() })
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, Op::Tanh(x), |v| v.tanh())
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, Op::Sigmoid(x), sigmoid_scalar)
    }

    pub fn exp(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, Op::Exp(x), |v| v.exp())
    }

    pub fn softplus(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, Op::Softplus(x), softplus_scalar)
    }

    pub fn clamp(&mut self, x: NodeId, lo: S, hi: S) -> Result<NodeId> {
        if lo > hi {
            return Err(Error::Contract("clamp: lo > hi".into()));
        }
        self.unary(x, Op::Clamp { x, lo, hi }, |v| {
            if v < lo {
                lo
            } else if v > hi {
                hi
            } else {
                v
            }
        })
    }

    pub fn square(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, Op::Square(x), |v| v * v)
    }

    pub fn scalar_mul(&mut self, x: NodeId, c: S) -> Result<NodeId> {
        self.unary(x, Op::ScalarMul(x, c), |v| v * c)
    }

    pub fn transpose(&mut self, x: NodeId) -> Result<NodeId> {
        let value = self.nodes[x.0].value.transpose();
        self.push(Op::Transpose(x), value)
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ra, ca) = self.shape(a);
        let (rb, cb) = self.shape(b);
        if ra != rb {
            return Err(self.shape_err("concat_cols", &[a, b]));
        }
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        let mut out = DenseMatrix::zeros(ra, ca + cb);
        for i in 0..ra {
            out.row_mut(i)[..ca].copy_from_slice(av.row(i));
            out.row_mut(i)[ca..].copy_from_slice(bv.row(i));
        }
        self.push(Op::ConcatCols(a, b), out)
    }

    pub fn concat_rows(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ra, ca) = self.shape(a);
        let (rb, cb) = self.shape(b);
        if ca != cb {
            return Err(self.shape_err("concat_rows", &[a, b]));
        }
        let mut data = Vec::with_capacity((ra + rb) * ca);
        data.extend_from_slice(self.nodes[a.0].value.data());
        data.extend_from_slice(self.nodes[b.0].value.data());
        let value = DenseMatrix::from_vec(ra + rb, ca, data)?;
        self.push(Op::ConcatRows(a, b), value)
    }

    /// Select rows of x by index; duplicate indices are allowed.
    pub fn gather_rows(&mut self, x: NodeId, idx: Arc<Vec<usize>>) -> Result<NodeId> {
        let (rows, cols) = self.shape(x);
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(Error::Contract(format!(
                "gather_rows: index {} out of bounds for {} rows",
                bad, rows
            )));
        }
        let xv = &self.nodes[x.0].value;
        let mut out = DenseMatrix::zeros(idx.len(), cols);
        for (r, &i) in idx.iter().enumerate() {
            out.row_mut(r).copy_from_slice(xv.row(i));
        }
        self.push(Op::GatherRows { x, idx }, out)
    }

    /// Sum of all entries, as a 1x1 matrix.
    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        let total = self.nodes[x.0].value.data().iter().copied().sum();
        self.push(Op::Sum(x), DenseMatrix::scalar(total))
    }

    /// Mean of all entries, as a 1x1 matrix.
    pub fn mean(&mut self, x: NodeId) -> Result<NodeId> {
        let n = self.nodes[x.0].value.len();
        if n == 0 {
            return Err(Error::Contract("mean of an empty matrix".into()));
        }
        let total: S = self.nodes[x.0].value.data().iter().copied().sum();
        let value = DenseMatrix::scalar(total / S::from_f64(n as f64));
        self.push(Op::Mean(x), value)
    }

    /// Reverse-topological gradient accumulation from a scalar loss.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients<S>> {
        if self.shape(loss) != (1, 1) {
            let (r, c) = self.shape(loss);
            return Err(Error::Contract(format!(
                "backward requires a 1x1 loss node, got {}x{}",
                r, c
            )));
        }
        let mut grads: Vec<Option<DenseMatrix<S>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(DenseMatrix::scalar(S::one()));

        for id in (0..=loss.0).rev() {
            let Some(go) = grads[id].take() else { continue };
            self.accumulate(id, &go, &mut grads);
            grads[id] = Some(go);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, id: usize, go: &DenseMatrix<S>, grads: &mut [Option<DenseMatrix<S>>]) {
        let node = &self.nodes[id];
        let add_to = |grads: &mut [Option<DenseMatrix<S>>], target: NodeId, delta: DenseMatrix<S>| {
            match &mut grads[target.0] {
                Some(g) => g.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            }
        };
        match &node.op {
            Op::Leaf { .. } => {}
            Op::MatMul(a, b) => {
                let av = &self.nodes[a.0].value;
                let bv = &self.nodes[b.0].value;
                add_to(grads, *a, matmul_nt(go, bv));
                add_to(grads, *b, matmul_tn(av, go));
            }
            Op::Spmm { a, x } => {
                add_to(grads, *x, a.transpose_mul_dense(go));
            }
            Op::Add(a, b) => {
                add_to(grads, *a, go.clone());
                add_to(grads, *b, go.clone());
            }
            Op::Sub(a, b) => {
                add_to(grads, *a, go.clone());
                let mut neg = go.clone();
                neg.scale(-S::one());
                add_to(grads, *b, neg);
            }
            Op::Mul(a, b) => {
                let av = &self.nodes[a.0].value;
                let bv = &self.nodes[b.0].value;
                add_to(grads, *a, elementwise(go, bv));
                add_to(grads, *b, elementwise(go, av));
            }
            Op::AddRow { x, row } => {
                add_to(grads, *x, go.clone());
                add_to(grads, *row, col_sums(go));
            }
            Op::MulRow { x, row } => {
                let xv = &self.nodes[x.0].value;
                let rv = &self.nodes[row.0].value;
                let mut gx = DenseMatrix::zeros(go.rows(), go.cols());
                for i in 0..go.rows() {
                    let grow = go.row(i);
                    let orow = gx.row_mut(i);
                    for ((o, &g), &r) in orow.iter_mut().zip(grow).zip(rv.row(0)) {
                        *o = g * r;
                    }
                }
                add_to(grads, *x, gx);
                add_to(grads, *row, col_sums(&elementwise(go, xv)));
            }
            Op::Relu(x) => {
                let xv = &self.nodes[x.0].value;
                add_to(grads, *x, masked(go, xv, |v| v > S::zero()));
            }
            Op::Tanh(x) => {
                let yv = &node.value;
                let gx = DenseMatrix::from_fn(go.rows(), go.cols(), |i, j| {
                    let y = yv.get(i, j);
                    go.get(i, j) * (S::one() - y * y)
                });
                add_to(grads, *x, gx);
            }
            Op::Sigmoid(x) => {
                let yv = &node.value;
                let gx = DenseMatrix::from_fn(go.rows(), go.cols(), |i, j| {
                    let y = yv.get(i, j);
                    go.get(i, j) * y * (S::one() - y)
                });
                add_to(grads, *x, gx);
            }
            Op::Exp(x) => {
                add_to(grads, *x, elementwise(go, &node.value));
            }
            Op::Softplus(x) => {
                let xv = &self.nodes[x.0].value;
                let gx = DenseMatrix::from_fn(go.rows(), go.cols(), |i, j| {
                    go.get(i, j) * sigmoid_scalar(xv.get(i, j))
                });
                add_to(grads, *x, gx);
            }
            Op::Clamp { x, lo, hi } => {
                let xv = &self.nodes[x.0].value;
                add_to(grads, *x, masked(go, xv, |v| v >= *lo && v <= *hi));
            }
            Op::Transpose(x) => {
                add_to(grads, *x, go.transpose());
            }
            Op::ConcatCols(a, b) => {
                let ca = self.shape(*a).1;
                let mut ga = DenseMatrix::zeros(go.rows(), ca);
                let mut gb = DenseMatrix::zeros(go.rows(), go.cols() - ca);
                for i in 0..go.rows() {
                    ga.row_mut(i).copy_from_slice(&go.row(i)[..ca]);
                    gb.row_mut(i).copy_from_slice(&go.row(i)[ca..]);
                }
                add_to(grads, *a, ga);
                add_to(grads, *b, gb);
            }
            Op::ConcatRows(a, b) => {
                let ra = self.shape(*a).0;
                let cols = go.cols();
                let ga = DenseMatrix::from_vec(ra, cols, go.data()[..ra * cols].to_vec())
                    .expect("split shapes align");
                let gb = DenseMatrix::from_vec(
                    go.rows() - ra,
                    cols,
                    go.data()[ra * cols..].to_vec(),
                )
                .expect("split shapes align");
                add_to(grads, *a, ga);
                add_to(grads, *b, gb);
            }
            Op::GatherRows { x, idx } => {
                let (rows, cols) = self.shape(*x);
                let mut gx = DenseMatrix::zeros(rows, cols);
                for (r, &i) in idx.iter().enumerate() {
                    let grow = go.row(r);
                    let orow = gx.row_mut(i);
                    for (o, &g) in orow.iter_mut().zip(grow) {
                        *o += g;
                    }
                }
                add_to(grads, *x, gx);
            }
            Op::Sum(x) => {
                let g = go.get(0, 0);
                let (rows, cols) = self.shape(*x);
                add_to(grads, *x, DenseMatrix::from_fn(rows, cols, |_, _| g));
            }
            Op::Mean(x) => {
                let (rows, cols) = self.shape(*x);
                let g = go.get(0, 0) / S::from_f64((rows * cols) as f64);
                add_to(grads, *x, DenseMatrix::from_fn(rows, cols, |_, _| g));
            }
            Op::Square(x) => {
                let xv = &self.nodes[x.0].value;
                let two = S::from_f64(2.0);
                let gx = DenseMatrix::from_fn(go.rows(), go.cols(), |i, j| {
                    go.get(i, j) * two * xv.get(i, j)
                });
                add_to(grads, *x, gx);
            }
            Op::ScalarMul(x, c) => {
                let mut gx = go.clone();
                gx.scale(*c);
                add_to(grads, *x, gx);
            }
        }
    }

    /// Ids of all trainable leaves, in creation order.
    pub fn trainable_leaves(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.op {
                Op::Leaf { trainable: true } => Some(NodeId(i)),
                _ => None,
            })
            .collect()
    }
}

fn elementwise<S: Scalar>(a: &DenseMatrix<S>, b: &DenseMatrix<S>) -> DenseMatrix<S> {
    debug_assert_eq!(a.shape(), b.shape());
    DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| a.get(i, j) * b.get(i, j))
}

fn masked<S: Scalar>(
    go: &DenseMatrix<S>,
    x: &DenseMatrix<S>,
    keep: impl Fn(S) -> bool,
) -> DenseMatrix<S> {
    DenseMatrix::from_fn(go.rows(), go.cols(), |i, j| {
        if keep(x.get(i, j)) {
            go.get(i, j)
        } else {
            S::zero()
        }
    })
}

fn col_sums<S: Scalar>(m: &DenseMatrix<S>) -> DenseMatrix<S> {
    let mut out = DenseMatrix::zeros(1, m.cols());
    for i in 0..m.rows() {
        let row = m.row(i);
        let orow = out.row_mut(0);
        for (o, &v) in orow.iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> DenseMatrix<f64> {
        DenseMatrix::from_vec(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn relu_forward_definition() {
        let mut t = Tape::new();
        let x = t.constant(m(1, 3, &[-1.0, 0.0, 2.0]));
        let y = t.relu(x).unwrap();
        assert_eq!(t.value(y).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn matmul_identity() {
        let mut t = Tape::new();
        let i = t.constant(DenseMatrix::identity(3));
        let x = t.constant(m(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let y = t.matmul(i, x).unwrap();
        assert_eq!(t.value(y), t.value(x));
    }

    #[test]
    fn backward_through_relu_sum() {
        // loss = sum(relu(x)), x = [-1, 2] -> grad [0, 1]
        let mut t = Tape::new();
        let x = t.var(m(1, 2, &[-1.0, 2.0]));
        let r = t.relu(x).unwrap();
        let loss = t.sum(r).unwrap();
        let grads = t.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[0.0, 1.0]);
    }

    #[test]
    fn sigmoid_grad_at_zero() {
        // loss = sum(sigmoid(x)), x = 0 -> grad 0.25
        let mut t = Tape::new();
        let x = t.var(m(1, 1, &[0.0]));
        let s = t.sigmoid(x).unwrap();
        let loss = t.sum(s).unwrap();
        let grads = t.backward(loss).unwrap();
        assert!((grads.get(x).unwrap().get(0, 0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut t = Tape::new();
        let x = t.var(m(1, 2, &[1.0, 2.0]));
        let y = t.relu(x).unwrap();
        assert!(matches!(t.backward(y), Err(Error::Contract(_))));
    }

    #[test]
    fn shape_mismatch_is_contract_violation() {
        let mut t = Tape::new();
        let a = t.constant(m(1, 2, &[1.0, 2.0]));
        let b = t.constant(m(1, 3, &[1.0, 2.0, 3.0]));
        assert!(matches!(t.add(a, b), Err(Error::Contract(_))));
        assert!(matches!(t.matmul(a, b), Err(Error::Contract(_))));
    }

    #[test]
    fn non_finite_output_is_numerical_error() {
        let mut t = Tape::new();
        let x = t.constant(m(1, 1, &[800.0]));
        let e = t.exp(x); // overflows f64
        assert!(matches!(e, Err(Error::Numerical(_))));
    }

    #[test]
    fn sigmoid_saturates_without_overflow() {
        let mut t = Tape::new();
        let x = t.constant(m(1, 2, &[40.0, -40.0]));
        let y = t.sigmoid(x).unwrap();
        assert!((t.value(y).get(0, 0) - 1.0).abs() < 1e-12);
        assert!(t.value(y).get(0, 1) > 0.0);
        assert!(t.value(y).get(0, 1) < 1e-12);
    }

    #[test]
    fn gather_rows_accumulates_duplicate_indices() {
        let mut t = Tape::new();
        let x = t.var(m(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let g = t.gather_rows(x, Arc::new(vec![0, 0, 1])).unwrap();
        let loss = t.sum(g).unwrap();
        let grads = t.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[2.0, 2.0, 1.0, 1.0]);
    }

    #[test]
    fn fan_out_accumulates() {
        // loss = sum(x + x) -> grad 2
        let mut t = Tape::new();
        let x = t.var(m(1, 1, &[3.0]));
        let y = t.add(x, x).unwrap();
        let loss = t.sum(y).unwrap();
        let grads = t.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().get(0, 0), 2.0);
    }

    #[test]
    fn mean_backward_divides_by_count() {
        let mut t = Tape::new();
        let x = t.var(m(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let loss = t.mean(x).unwrap();
        let grads = t.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[0.25; 4]);
    }

    #[test]
    fn softplus_matches_log1p_exp() {
        for &x in &[-50.0f64, -2.0, 0.0, 1.5, 30.0, 700.0] {
            let sp = softplus_scalar(x);
            let reference = if x < 100.0 { (1.0f64 + x.exp()).ln() } else { x };
            assert!((sp - reference).abs() < 1e-12, "x={x} sp={sp} ref={reference}");
        }
    }
}
