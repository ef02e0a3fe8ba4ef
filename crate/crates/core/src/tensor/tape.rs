use std::sync::Arc;

use super::{gemm, MatView, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Column-wise reduction over the rows of each block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolMode {
    Sum,
    Mean,
    Max,
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `x · w + b` with `b` broadcast over rows.
    Affine(Var, Var, Var),
    Relu(Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Hadamard(Var, Var),
    SumAll(Var),
    /// Each `block`-row slab of `input` is left-multiplied by a constant
    /// square matrix (or its transpose).
    BlockLeftMul {
        matrix: Arc<Tensor>,
        transpose: bool,
        input: Var,
        block: usize,
    },
    /// Row `k` of every block is scaled by `gains[k]`.
    ScaleRows {
        input: Var,
        gains: Var,
        block: usize,
    },
    Pool {
        input: Var,
        mode: PoolMode,
        block: usize,
        /// For max pooling: absolute row index of the winner per (block, col).
        argmax: Vec<usize>,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Tensor,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records one forward pass. Nodes are appended in evaluation order, so the
/// node list is already a topological order of the computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every leaf that requires them.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Moves a gradient out; returns zeros of `shape` if nothing reached `var`.
    pub fn take_or_zeros(&mut self, var: Var, shape: (usize, usize)) -> Tensor {
        self.grads
            .get_mut(var.0)
            .and_then(Option::take)
            .unwrap_or_else(|| Tensor::zeros(shape.0, shape.1))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A learnable leaf: gradients flow into it.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A constant leaf: no gradient is tracked.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn shape(&self, var: Var) -> (usize, usize) {
        self.nodes[var.0].value.shape()
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    /// `x · w + b`, where `b` is `1×n` and added to every row.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.1 != ws.0 || bs != (1, ws.1) {
            return Err(Error::shape("affine", xs, ws));
        }
        let bias = self.value(b).data();
        let mut value = Tensor::zeros(xs.0, ws.1);
        for r in 0..xs.0 {
            value.row_mut(r).copy_from_slice(bias);
        }
        gemm(self.value(x).view(), self.value(w).view(), value.data_mut(), true);
        let rg = self.any_grad(&[x, w, b]);
        Ok(self.push(value, Op::Affine(x, w, b), rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v.max(0.0));
        let rg = self.any_grad(&[x]);
        self.push(value, Op::Relu(x), rg)
    }

    /// Adds a `1×n` bias to every row of an `m×n` matrix.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xs, bs) = (self.shape(x), self.shape(bias));
        if bs.0 != 1 || bs.1 != xs.1 {
            return Err(Error::shape("add_bias", xs, bs));
        }
        let mut value = self.value(x).clone();
        let b = self.value(bias).data().to_vec();
        for r in 0..xs.0 {
            for (v, bv) in value.row_mut(r).iter_mut().zip(&b) {
                *v += bv;
            }
        }
        let rg = self.any_grad(&[x, bias]);
        Ok(self.push(value, Op::AddBias(x, bias), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).hadamard(self.value(b))?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Hadamard(a, b), rg))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let value = Tensor::filled(1, 1, self.value(x).sum());
        let rg = self.any_grad(&[x]);
        self.push(value, Op::SumAll(x), rg)
    }

    /// Applies `matrix` (or `matrixᵀ`) from the left to each consecutive
    /// `block`-row slab of `input`. `matrix` must be `block × block`.
    pub fn block_left_mul(
        &mut self,
        matrix: &Arc<Tensor>,
        transpose: bool,
        input: Var,
        block: usize,
    ) -> Result<Var> {
        let xs = self.shape(input);
        if matrix.rows() != block || matrix.cols() != block || block == 0 || !xs.0.is_multiple_of(block) {
            return Err(Error::shape("block_left_mul", matrix.shape(), xs));
        }
        let x = self.value(input);
        let mut value = Tensor::zeros(xs.0, xs.1);
        let mv = if transpose {
            matrix.view().t()
        } else {
            matrix.view()
        };
        for b in 0..xs.0 / block {
            let out = &mut value.data_mut()[b * block * xs.1..(b + 1) * block * xs.1];
            gemm(mv, MatView::rows_of(x, b * block, block), out, false);
        }
        let rg = self.any_grad(&[input]);
        Ok(self.push(
            value,
            Op::BlockLeftMul {
                matrix: Arc::clone(matrix),
                transpose,
                input,
                block,
            },
            rg,
        ))
    }

    /// Scales row `k` of every `block`-row slab by `gains[k]`; `gains` is `block×1`.
    pub fn scale_rows(&mut self, input: Var, gains: Var, block: usize) -> Result<Var> {
        let (xs, gs) = (self.shape(input), self.shape(gains));
        if gs != (block, 1) || block == 0 || xs.0 % block != 0 {
            return Err(Error::shape("scale_rows", xs, gs));
        }
        let g = self.value(gains).data().to_vec();
        let mut value = self.value(input).clone();
        for r in 0..xs.0 {
            let gk = g[r % block];
            value.row_mut(r).iter_mut().for_each(|v| *v *= gk);
        }
        let rg = self.any_grad(&[input, gains]);
        Ok(self.push(
            value,
            Op::ScaleRows {
                input,
                gains,
                block,
            },
            rg,
        ))
    }

    /// Reduces each `block`-row slab to one row. Max pooling routes the
    /// gradient to the first row attaining the maximum.
    pub fn pool(&mut self, input: Var, mode: PoolMode, block: usize) -> Result<Var> {
        let xs = self.shape(input);
        if block == 0 || !xs.0.is_multiple_of(block) {
            return Err(Error::shape("pool", (block, xs.1), xs));
        }
        let nb = xs.0 / block;
        let x = self.value(input);
        let mut value = Tensor::zeros(nb, xs.1);
        let mut argmax = Vec::new();
        match mode {
            PoolMode::Sum | PoolMode::Mean => {
                for b in 0..nb {
                    for r in b * block..(b + 1) * block {
                        for (acc, v) in value.row_mut(b).iter_mut().zip(x.row(r)) {
                            *acc += v;
                        }
                    }
                }
                if mode == PoolMode::Mean {
                    let inv = 1.0 / block as f64;
                    value.data_mut().iter_mut().for_each(|v| *v *= inv);
                }
            }
            PoolMode::Max => {
                argmax.reserve(nb * xs.1);
                for b in 0..nb {
                    for c in 0..xs.1 {
                        let mut best = b * block;
                        for r in b * block + 1..(b + 1) * block {
                            if x.get(r, c) > x.get(best, c) {
                                best = r;
                            }
                        }
                        value.set(b, c, x.get(best, c));
                        argmax.push(best);
                    }
                }
            }
        }
        let rg = self.any_grad(&[input]);
        Ok(self.push(
            value,
            Op::Pool {
                input,
                mode,
                block,
                argmax,
            },
            rg,
        ))
    }

    /// Mean cross-entropy of `B×C` logits against one-hot `targets` (`B×C`).
    /// Uses log-sum-exp so large logits do not overflow.
    pub fn cross_entropy(&mut self, logits: Var, targets: &Tensor) -> Result<Var> {
        let ls = self.shape(logits);
        if targets.shape() != ls {
            return Err(Error::shape("cross_entropy", ls, targets.shape()));
        }
        let classes = one_hot_indices(targets)?;
        let z = self.value(logits);
        let mut probs = Tensor::zeros(ls.0, ls.1);
        let mut total = 0.0;
        for (r, &t) in classes.iter().enumerate() {
            let row = z.row(r);
            let lse = log_sum_exp(row);
            total += lse - row[t];
            for (p, &v) in probs.row_mut(r).iter_mut().zip(row) {
                *p = (v - lse).exp();
            }
        }
        let value = Tensor::filled(1, 1, total / ls.0 as f64);
        let rg = self.any_grad(&[logits]);
        Ok(self.push(
            value,
            Op::CrossEntropy {
                logits,
                targets: classes,
                probs,
            },
            rg,
        ))
    }

    /// Reverse sweep from a `1×1` loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::Domain(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        if !self.nodes[loss.0].requires_grad {
            return Ok(Gradients { grads });
        }
        grads[loss.0] = Some(Tensor::filled(1, 1, 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            // interior gradients are consumed here and recycled
            if let Some(g) = grads[idx].take() {
                self.propagate(node, g, &mut grads);
            }
        }
        Ok(Gradients { grads })
    }

    fn matmul_grads(&self, grads: &mut [Option<Tensor>], a: Var, b: Var, g: &Tensor) {
        if self.requires_grad(a) {
            let d = g.matmul_t(self.value(b)).expect("matmul grad shape");
            self.accumulate(grads, a, d);
        }
        if self.requires_grad(b) {
            let d = self.value(a).t_matmul(g).expect("matmul grad shape");
            self.accumulate(grads, b, d);
        }
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], var: Var, delta: Tensor) {
        if !self.nodes[var.0].requires_grad {
            return;
        }
        match &mut grads[var.0] {
            Some(acc) => acc.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        }
    }

    fn propagate(&self, node: &Node, mut g: Tensor, grads: &mut [Option<Tensor>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                self.matmul_grads(grads, *a, *b, &g);
            }
            Op::Affine(x, w, b) => {
                if self.requires_grad(*b) {
                    self.accumulate(grads, *b, g.column_sums());
                }
                self.matmul_grads(grads, *x, *w, &g);
            }
            Op::Relu(x) if self.requires_grad(*x) => {
                let xv = self.value(*x);
                for (dv, &v) in g.data_mut().iter_mut().zip(xv.data()) {
                    if v <= 0.0 {
                        *dv = 0.0;
                    }
                }
                self.accumulate(grads, *x, g);
            }
            Op::AddBias(x, b) => {
                if self.requires_grad(*b) {
                    self.accumulate(grads, *b, g.column_sums());
                }
                self.accumulate(grads, *x, g);
            }
            Op::Add(a, b) => {
                if self.requires_grad(*a) {
                    self.accumulate(grads, *a, g.clone());
                }
                self.accumulate(grads, *b, g);
            }
            Op::Hadamard(a, b) => {
                if self.requires_grad(*a) {
                    let d = g.hadamard(self.value(*b)).expect("hadamard grad shape");
                    self.accumulate(grads, *a, d);
                }
                if self.requires_grad(*b) {
                    let d = g.hadamard(self.value(*a)).expect("hadamard grad shape");
                    self.accumulate(grads, *b, d);
                }
            }
            Op::SumAll(x) => {
                let (r, c) = self.shape(*x);
                self.accumulate(grads, *x, Tensor::filled(r, c, g.get(0, 0)));
            }
            Op::BlockLeftMul {
                matrix,
                transpose,
                input,
                block,
            } if self.requires_grad(*input) => {
                // d(M·X_b)/dX_b contracts with Mᵀ.
                let mv = if *transpose {
                    matrix.view()
                } else {
                    matrix.view().t()
                };
                let mut d = Tensor::zeros(g.rows(), g.cols());
                let cols = g.cols();
                for b in 0..g.rows() / block {
                    let out = &mut d.data_mut()[b * block * cols..(b + 1) * block * cols];
                    gemm(mv, MatView::rows_of(&g, b * block, *block), out, false);
                }
                self.accumulate(grads, *input, d);
            }
            Op::ScaleRows {
                input,
                gains,
                block,
            } => {
                if self.requires_grad(*gains) {
                    let x = self.value(*input);
                    let mut d = Tensor::zeros(*block, 1);
                    for r in 0..g.rows() {
                        let dot: f64 = g.row(r).iter().zip(x.row(r)).map(|(a, b)| a * b).sum();
                        d.data_mut()[r % block] += dot;
                    }
                    self.accumulate(grads, *gains, d);
                }
                if self.requires_grad(*input) {
                    let gv = self.value(*gains);
                    for r in 0..g.rows() {
                        let gk = gv.get(r % block, 0);
                        g.row_mut(r).iter_mut().for_each(|v| *v *= gk);
                    }
                    self.accumulate(grads, *input, g);
                }
            }
            Op::Pool {
                input,
                mode,
                block,
                argmax,
            } => {
                let (rows, cols) = self.shape(*input);
                let mut d = Tensor::zeros(rows, cols);
                match mode {
                    PoolMode::Sum | PoolMode::Mean => {
                        let scale = if *mode == PoolMode::Mean {
                            1.0 / *block as f64
                        } else {
                            1.0
                        };
                        for r in 0..rows {
                            let src = g.row(r / block);
                            for (dv, gv) in d.row_mut(r).iter_mut().zip(src) {
                                *dv = gv * scale;
                            }
                        }
                    }
                    PoolMode::Max => {
                        for b in 0..g.rows() {
                            for c in 0..cols {
                                let r = argmax[b * cols + c];
                                d.set(r, c, d.get(r, c) + g.get(b, c));
                            }
                        }
                    }
                }
                self.accumulate(grads, *input, d);
            }
            Op::CrossEntropy {
                logits,
                targets,
                probs,
            } => {
                let scale = g.get(0, 0) / targets.len() as f64;
                let mut d = probs.clone();
                for (r, &t) in targets.iter().enumerate() {
                    d.set(r, t, d.get(r, t) - 1.0);
                }
                d.data_mut().iter_mut().for_each(|v| *v *= scale);
                self.accumulate(grads, *logits, d);
            }
            Op::Relu(_) | Op::BlockLeftMul { .. } => {}
        }
    }
}

/// Numerically stable `ln Σ exp(v)`.
pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Validates a one-hot matrix and returns the hot column of every row.
pub(crate) fn one_hot_indices(targets: &Tensor) -> Result<Vec<usize>> {
    (0..targets.rows())
        .map(|r| {
            let row = targets.row(r);
            let ones: Vec<usize> = row
                .iter()
                .enumerate()
                .filter(|(_, &v)| v == 1.0)
                .map(|(i, _)| i)
                .collect();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            if ones.len() == 1 && zeros == row.len() - 1 {
                Ok(ones[0])
            } else {
                Err(Error::Domain(format!("label row {r} is not one-hot: {row:?}")))
            }
        })
        .collect()
}
