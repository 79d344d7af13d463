//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records every operation in execution order. [`Tape::backward`]
//! walks the records once in strict reverse order and accumulates gradients
//! into the [`ParamStore`]. Nodes that depend on no parameter are never
//! visited on the way back.

use crate::error::{Error, Result};
use crate::graph::{LabelVector, Role, SparseGraph, SplitMask};
use crate::params::{ParamId, ParamStore};
use crate::tensor::{gemm_nt, gemm_tn, Matrix};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(&self) -> usize {
        self.0
    }
}

enum Op<'g> {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    MulElem(Var, Var),
    Scale(Var, f64),
    ConcatCols(Vec<Var>),
    Sigmoid(Var),
    Relu(Var),
    PowElem(Var, u32),
    SignedRoot {
        input: Var,
        k: u32,
        eps: f64,
    },
    SpmmMean {
        graph: &'g SparseGraph,
        input: Var,
    },
    CentralPower {
        graph: &'g SparseGraph,
        input: Var,
        mean: Var,
        k: u32,
    },
    SoftmaxSelect {
        inputs: Vec<Var>,
        which: usize,
    },
    Sum(Var),
    SoftmaxCrossEntropy {
        logits: Var,
        probs: Matrix,
        targets: Vec<(usize, usize)>,
    },
}

struct Node<'g> {
    value: Matrix,
    op: Op<'g>,
    requires_grad: bool,
}

/// Operation record for one forward pass. Confined to a single thread.
pub struct Tape<'g> {
    nodes: Vec<Node<'g>>,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'g> Tape<'g> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, op_name: &'static str, value: Matrix, op: Op<'g>, requires_grad: bool) -> Result<Var> {
        if !value.all_finite() {
            return Err(Error::Numeric(format!("{op_name} produced a non-finite value")));
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Result<Var> {
        self.push("constant", value, Op::Constant, false)
    }

    /// Leaf bound to a stored parameter; its gradient lands in the store.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var> {
        self.push("param", store.value(id).clone(), Op::Param(id), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(&[a, b]);
        self.push("matmul", value, Op::MatMul(a, b), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rg = self.rg(&[a, b]);
        self.push("add", value, Op::Add(a, b), rg)
    }

    /// Adds a `1×d` row vector to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (n, d) = self.shape(a);
        if self.shape(row) != (1, d) {
            return Err(Error::shape("add_row", format!("{:?} onto {n}x{d}", self.shape(row))));
        }
        let mut value = self.value(a).clone();
        let r = self.value(row).row(0).to_vec();
        for i in 0..n {
            for (x, b) in value.row_mut(i).iter_mut().zip(&r) {
                *x += b;
            }
        }
        let rg = self.rg(&[a, row]);
        self.push("add_row", value, Op::AddRow(a, row), rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let rg = self.rg(&[a, b]);
        self.push("sub", value, Op::Sub(a, b), rg)
    }

    pub fn mul_elem(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul_elem", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.rg(&[a, b]);
        self.push("mul_elem", value, Op::MulElem(a, b), rg)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let value = self.value(a).map(|x| x * s);
        let rg = self.rg(&[a]);
        self.push("scale", value, Op::Scale(a, s), rg)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(first) = parts.first() else {
            return Err(Error::shape("concat_cols", "no inputs"));
        };
        let n = self.shape(*first).0;
        if let Some(bad) = parts.iter().find(|p| self.shape(**p).0 != n) {
            return Err(Error::shape(
                "concat_cols",
                format!("{} rows vs {n}", self.shape(*bad).0),
            ));
        }
        let total: usize = parts.iter().map(|p| self.shape(*p).1).sum();
        let mut value = Matrix::zeros(n, total);
        for i in 0..n {
            let mut off = 0;
            for p in parts {
                let src = self.value(*p).row(i);
                value.row_mut(i)[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        let rg = self.rg(parts);
        self.push("concat_cols", value, Op::ConcatCols(parts.to_vec()), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(sigmoid);
        let rg = self.rg(&[a]);
        self.push("sigmoid", value, Op::Sigmoid(a), rg)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(|x| x.max(0.0));
        let rg = self.rg(&[a]);
        self.push("relu", value, Op::Relu(a), rg)
    }

    /// Element-wise `x^k`.
    pub fn pow_elem(&mut self, a: Var, k: u32) -> Result<Var> {
        if k == 0 {
            return Err(Error::InvalidArgument("pow_elem needs k >= 1".into()));
        }
        let value = self.value(a).map(|x| x.powi(k as i32));
        let rg = self.rg(&[a]);
        self.push("pow_elem", value, Op::PowElem(a, k), rg)
    }

    /// Element-wise `sign(x) * ((|x| + eps)^(1/k) - eps^(1/k))`; identity for `k = 1`.
    pub fn signed_root(&mut self, a: Var, k: u32, eps: f64) -> Result<Var> {
        if k == 0 {
            return Err(Error::InvalidArgument("signed_root needs k >= 1".into()));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("signed_root eps {eps} must be >= 0")));
        }
        let value = self.value(a).map(|x| signed_root(x, k, eps));
        let rg = self.rg(&[a]);
        self.push("signed_root", value, Op::SignedRoot { input: a, k, eps }, rg)
    }

    /// Row `i` becomes the mean of `h` over the neighbors of `i`; isolated
    /// nodes get a zero row.
    pub fn spmm_mean(&mut self, graph: &'g SparseGraph, h: Var) -> Result<Var> {
        let (n, d) = self.shape(h);
        if n != graph.num_nodes() {
            return Err(Error::shape(
                "spmm_mean",
                format!("{n} rows for {} nodes", graph.num_nodes()),
            ));
        }
        let value = spmm_mean_forward(graph, self.value(h), d);
        let rg = self.rg(&[h]);
        self.push("spmm_mean", value, Op::SpmmMean { graph, input: h }, rg)
    }

    /// Row `i` becomes `mean_{j in N(i)} (h_j - mean_i)^k` element-wise, with
    /// `mean` supplied as its own (differentiable) input.
    pub fn central_power(&mut self, graph: &'g SparseGraph, h: Var, mean: Var, k: u32) -> Result<Var> {
        let (n, d) = self.shape(h);
        if n != graph.num_nodes() || self.shape(mean) != (n, d) {
            return Err(Error::shape(
                "central_power",
                format!(
                    "h {:?}, mean {:?}, {} nodes",
                    self.shape(h),
                    self.shape(mean),
                    graph.num_nodes()
                ),
            ));
        }
        if k == 0 {
            return Err(Error::InvalidArgument("central_power needs k >= 1".into()));
        }
        let hv = self.value(h);
        let mv = self.value(mean);
        let mut value = Matrix::zeros(n, d);
        for i in 0..n {
            let nb = graph.neighbors(i);
            if nb.is_empty() {
                continue;
            }
            let mu = mv.row(i);
            let out = value.row_mut(i);
            for &j in nb {
                for ((o, &x), &m) in out.iter_mut().zip(hv.row(j)).zip(mu) {
                    *o += (x - m).powi(k as i32);
                }
            }
            let deg = nb.len() as f64;
            out.iter_mut().for_each(|o| *o /= deg);
        }
        let rg = self.rg(&[h, mean]);
        self.push(
            "central_power",
            value,
            Op::CentralPower {
                graph,
                input: h,
                mean,
                k,
            },
            rg,
        )
    }

    /// Element-wise softmax across the same-shaped `inputs`, returning the
    /// component at position `which`.
    pub fn softmax_select(&mut self, inputs: &[Var], which: usize) -> Result<Var> {
        if which >= inputs.len() {
            return Err(Error::InvalidArgument("softmax_select index out of range".into()));
        }
        for &v in &inputs[1..] {
            self.same_shape("softmax_select", inputs[0], v)?;
        }
        let probs = self.softmax_across(inputs, which);
        let rg = self.rg(inputs);
        self.push(
            "softmax_select",
            probs,
            Op::SoftmaxSelect {
                inputs: inputs.to_vec(),
                which,
            },
            rg,
        )
    }

    fn softmax_across(&self, inputs: &[Var], which: usize) -> Matrix {
        let vals: Vec<&Matrix> = inputs.iter().map(|v| self.value(*v)).collect();
        let (n, d) = vals[0].shape();
        Matrix::from_fn(n, d, |i, j| {
            let m = vals.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.get(i, j)));
            let z: f64 = vals.iter().map(|v| (v.get(i, j) - m).exp()).sum();
            (vals[which].get(i, j) - m).exp() / z
        })
    }

    /// Sum of all entries as a 1×1 value.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let value = Matrix::filled(1, 1, self.value(a).sum());
        let rg = self.rg(&[a]);
        self.push("sum", value, Op::Sum(a), rg)
    }

    /// Mean negative log-likelihood of `labels` over the nodes whose split
    /// role equals `role`, with row-max stabilisation.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: Var,
        labels: &LabelVector,
        mask: &SplitMask,
        role: Role,
    ) -> Result<Var> {
        let (n, c) = self.shape(logits);
        if labels.len() != n || mask.len() != n {
            return Err(Error::shape(
                "softmax_cross_entropy",
                format!("{n} logit rows, {} labels, {} mask entries", labels.len(), mask.len()),
            ));
        }
        if c != labels.num_classes() {
            return Err(Error::shape(
                "softmax_cross_entropy",
                format!("{c} logit columns for {} classes", labels.num_classes()),
            ));
        }
        let rows = mask.indices(role);
        if rows.is_empty() {
            return Err(Error::InvalidArgument(format!("no {role} nodes in mask")));
        }
        let lv = self.value(logits);
        let mut probs = Matrix::zeros(rows.len(), c);
        let mut targets = Vec::with_capacity(rows.len());
        let mut total = 0.0;
        for (t, &r) in rows.iter().enumerate() {
            let row = lv.row(r);
            let m = row.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            let lse = row.iter().map(|x| (x - m).exp()).sum::<f64>().ln() + m;
            let y = labels.get(r);
            total += lse - row[y];
            for (p, &x) in probs.row_mut(t).iter_mut().zip(row) {
                *p = (x - lse).exp();
            }
            targets.push((r, y));
        }
        let value = Matrix::filled(1, 1, total / rows.len() as f64);
        let rg = self.rg(&[logits]);
        self.push(
            "softmax_cross_entropy",
            value,
            Op::SoftmaxCrossEntropy { logits, probs, targets },
            rg,
        )
    }

    /// Back-propagates from the 1×1 `loss`, adding into parameter gradients.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::shape("backward", format!("loss is {:?}", self.shape(loss))));
        }
        let mut grads: Vec<Option<Matrix>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.backprop_node(node, &g, &mut grads, store)?;
        }
        Ok(())
    }

    fn accumulate(&self, grads: &mut [Option<Matrix>], v: Var, f: impl FnOnce(&mut Matrix)) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let slot = &mut grads[v.0];
        let (r, c) = self.shape(v);
        let g = slot.get_or_insert_with(|| Matrix::zeros(r, c));
        f(g);
    }

    fn backprop_node(
        &self,
        node: &Node<'g>,
        g: &Matrix,
        grads: &mut [Option<Matrix>],
        store: &mut ParamStore,
    ) -> Result<()> {
        match &node.op {
            Op::Constant => {}
            Op::Param(id) => store.get_mut(*id).grad.add_assign(g),
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                self.accumulate(grads, *a, |ga| gemm_nt(g, bv, ga));
                self.accumulate(grads, *b, |gb| gemm_tn(av, g, gb));
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, |ga| ga.add_assign(g));
                self.accumulate(grads, *b, |gb| gb.add_assign(g));
            }
            Op::AddRow(a, row) => {
                self.accumulate(grads, *a, |ga| ga.add_assign(g));
                self.accumulate(grads, *row, |gr| {
                    for i in 0..g.rows() {
                        for (o, &x) in gr.row_mut(0).iter_mut().zip(g.row(i)) {
                            *o += x;
                        }
                    }
                });
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, |ga| ga.add_assign(g));
                self.accumulate(grads, *b, |gb| gb.axpy(-1.0, g));
            }
            Op::MulElem(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                self.accumulate(grads, *a, |ga| ga.add_assign(&g.zip_map(bv, |x, y| x * y)));
                self.accumulate(grads, *b, |gb| gb.add_assign(&g.zip_map(av, |x, y| x * y)));
            }
            Op::Scale(a, s) => self.accumulate(grads, *a, |ga| ga.axpy(*s, g)),
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for p in parts {
                    let w = self.shape(*p).1;
                    let start = off;
                    self.accumulate(grads, *p, |gp| gp.add_assign(&g.col_block(start, w)));
                    off += w;
                }
            }
            Op::Sigmoid(a) => {
                let y = &node.value;
                self.accumulate(grads, *a, |ga| {
                    for ((o, &gi), &yi) in ga.as_mut_slice().iter_mut().zip(g.as_slice()).zip(y.as_slice()) {
                        *o += gi * yi * (1.0 - yi);
                    }
                });
            }
            Op::Relu(a) => {
                let x = self.value(*a);
                self.accumulate(grads, *a, |ga| {
                    for ((o, &gi), &xi) in ga.as_mut_slice().iter_mut().zip(g.as_slice()).zip(x.as_slice()) {
                        if xi > 0.0 {
                            *o += gi;
                        }
                    }
                });
            }
            Op::PowElem(a, k) => {
                let x = self.value(*a);
                let k = *k;
                self.accumulate(grads, *a, |ga| {
                    for ((o, &gi), &xi) in ga.as_mut_slice().iter_mut().zip(g.as_slice()).zip(x.as_slice()) {
                        *o += gi * f64::from(k) * xi.powi(k as i32 - 1);
                    }
                });
            }
            Op::SignedRoot { input, k, eps } => {
                let x = self.value(*input);
                self.accumulate(grads, *input, |ga| {
                    for ((o, &gi), &xi) in ga.as_mut_slice().iter_mut().zip(g.as_slice()).zip(x.as_slice()) {
                        *o += gi * signed_root_derivative(xi, *k, *eps);
                    }
                });
            }
            Op::SpmmMean { graph, input } => {
                self.accumulate(grads, *input, |gh| spmm_mean_backward(graph, g, gh));
            }
            Op::CentralPower { graph, input, mean, k } => {
                let hv = self.value(*input);
                let mv = self.value(*mean);
                let d = hv.cols();
                let kf = f64::from(*k);
                let need_h = self.requires_grad(*input);
                let need_m = self.requires_grad(*mean);
                let mut gh = Matrix::zeros(hv.rows(), d);
                let mut gm = Matrix::zeros(hv.rows(), d);
                for i in 0..graph.num_nodes() {
                    let nb = graph.neighbors(i);
                    if nb.is_empty() {
                        continue;
                    }
                    let scale = kf / nb.len() as f64;
                    let gi = g.row(i);
                    let mu = mv.row(i);
                    for &j in nb {
                        let hj = hv.row(j);
                        for c in 0..d {
                            let t = scale * gi[c] * (hj[c] - mu[c]).powi(*k as i32 - 1);
                            if need_h {
                                gh.row_mut(j)[c] += t;
                            }
                            if need_m {
                                gm.row_mut(i)[c] -= t;
                            }
                        }
                    }
                }
                self.accumulate(grads, *input, |a| a.add_assign(&gh));
                self.accumulate(grads, *mean, |a| a.add_assign(&gm));
            }
            Op::SoftmaxSelect { inputs, which } => {
                let s_w = &node.value;
                for (j, v) in inputs.iter().enumerate() {
                    if !self.requires_grad(*v) {
                        continue;
                    }
                    let s_j = if j == *which {
                        s_w.clone()
                    } else {
                        self.softmax_across(inputs, j)
                    };
                    let delta = if j == *which { 1.0 } else { 0.0 };
                    self.accumulate(grads, *v, |gv| {
                        for (((o, &gi), &sw), &sj) in gv
                            .as_mut_slice()
                            .iter_mut()
                            .zip(g.as_slice())
                            .zip(s_w.as_slice())
                            .zip(s_j.as_slice())
                        {
                            *o += gi * sw * (delta - sj);
                        }
                    });
                }
            }
            Op::Sum(a) => {
                let s = g.get(0, 0);
                self.accumulate(grads, *a, |ga| ga.as_mut_slice().iter_mut().for_each(|x| *x += s));
            }
            Op::SoftmaxCrossEntropy { logits, probs, targets } => {
                let scale = g.get(0, 0) / targets.len() as f64;
                self.accumulate(grads, *logits, |gl| {
                    for (t, &(r, y)) in targets.iter().enumerate() {
                        let row = gl.row_mut(r);
                        for (o, &p) in row.iter_mut().zip(probs.row(t)) {
                            *o += scale * p;
                        }
                        row[y] -= scale;
                    }
                });
            }
        }
        Ok(())
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Scalar form of [`Tape::signed_root`].
pub fn signed_root(x: f64, k: u32, eps: f64) -> f64 {
    if k == 1 {
        return x;
    }
    if x == 0.0 {
        return 0.0;
    }
    let inv = 1.0 / f64::from(k);
    x.signum() * ((x.abs() + eps).powf(inv) - eps.powf(inv))
}

/// Derivative of [`signed_root`]; taken as 0 where it is unbounded (`x = 0`, `eps = 0`).
pub fn signed_root_derivative(x: f64, k: u32, eps: f64) -> f64 {
    if k == 1 {
        return 1.0;
    }
    let base = x.abs() + eps;
    if base == 0.0 {
        return 0.0;
    }
    let inv = 1.0 / f64::from(k);
    inv * base.powf(inv - 1.0)
}

fn spmm_mean_forward(graph: &SparseGraph, h: &Matrix, d: usize) -> Matrix {
    let n = graph.num_nodes();
    let mut out = Matrix::zeros(n, d);
    for i in 0..n {
        let nb = graph.neighbors(i);
        if nb.is_empty() {
            continue;
        }
        let row = out.row_mut(i);
        for &j in nb {
            for (o, &x) in row.iter_mut().zip(h.row(j)) {
                *o += x;
            }
        }
        let deg = nb.len() as f64;
        row.iter_mut().for_each(|o| *o /= deg);
    }
    out
}

fn spmm_mean_backward(graph: &SparseGraph, g: &Matrix, gh: &mut Matrix) {
    for i in 0..graph.num_nodes() {
        let nb = graph.neighbors(i);
        if nb.is_empty() {
            continue;
        }
        let inv = 1.0 / nb.len() as f64;
        let gi = g.row(i);
        for &j in nb {
            for (o, &x) in gh.row_mut(j).iter_mut().zip(gi) {
                *o += x * inv;
            }
        }
    }
}

/// Dense-input helper used outside the tape (analysis, tests).
pub fn spmm_mean(graph: &SparseGraph, h: &Matrix) -> Result<Matrix> {
    if h.rows() != graph.num_nodes() {
        return Err(Error::shape(
            "spmm_mean",
            format!("{} rows for {} nodes", h.rows(), graph.num_nodes()),
        ));
    }
    Ok(spmm_mean_forward(graph, h, h.cols()))
}
