//! Define-by-run reverse-mode automatic differentiation.
//!
//! Every primitive evaluates eagerly and records itself on the [`Tape`]; node
//! `i` only ever refers to nodes `< i`, so the tape is already topologically
//! ordered and `backward` is a single reverse sweep.

use crate::dropout::{self, DropoutSpec};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::{gemm, log_softmax_rows, softmax_rows, Tensor};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulConst(Var, Tensor),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Relu(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    Clamp(Var, f64, f64),
    Softmax(Var),
    LogSoftmax(Var),
    CrossEntropy(Var, Vec<usize>),
    Sum(Var),
    Mean(Var),
    ConcatCols(Var, Var),
    Embed(Var, Vec<usize>),
    Reparam(Var, Var, Tensor),
}

impl Op {
    fn inputs(&self) -> [Option<Var>; 2] {
        use Op::*;
        match *self {
            Leaf => [None, None],
            MatMul(a, b) | AddBias(a, b) | Add(a, b) | Sub(a, b) | Mul(a, b) => [Some(a), Some(b)],
            ConcatCols(a, b) | Reparam(a, b, _) => [Some(a), Some(b)],
            MulConst(a, _)
            | Scale(a, _)
            | AddScalar(a)
            | Tanh(a)
            | Relu(a)
            | Sigmoid(a)
            | Exp(a)
            | Log(a)
            | Clamp(a, _, _)
            | Softmax(a)
            | LogSoftmax(a)
            | CrossEntropy(a, _)
            | Sum(a)
            | Mean(a)
            | Embed(a, _) => [Some(a), None],
        }
    }

    fn name(&self) -> &'static str {
        use Op::*;
        match self {
            Leaf => "leaf",
            MatMul(..) => "matmul",
            AddBias(..) => "add_bias",
            Add(..) => "add",
            Sub(..) => "sub",
            Mul(..) => "mul",
            MulConst(..) => "mul_const",
            Scale(..) => "scale",
            AddScalar(..) => "add_scalar",
            Tanh(..) => "tanh",
            Relu(..) => "relu",
            Sigmoid(..) => "sigmoid",
            Exp(..) => "exp",
            Log(..) => "log",
            Clamp(..) => "clamp",
            Softmax(..) => "softmax",
            LogSoftmax(..) => "log_softmax",
            CrossEntropy(..) => "cross_entropy",
            Sum(..) => "sum",
            Mean(..) => "mean",
            ConcatCols(..) => "concat",
            Embed(..) => "embed",
            Reparam(..) => "reparameterize",
        }
    }
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar root with respect to tape nodes.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `v`; an exact zero tensor when `v` does not reach the root.
    pub fn get(&self, v: Var) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }

    pub fn take(&mut self, v: Var) -> Tensor {
        match self.grads[v.0].take() {
            Some(g) => g,
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }

    /// Takes the gradients of `vars` in order.
    pub fn take_all(&mut self, vars: &[Var]) -> Vec<Tensor> {
        vars.iter().map(|&v| self.take(v)).collect()
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

fn is_matrix(op: &'static str, t: &Tensor) -> Result<()> {
    if t.shape().len() != 2 {
        return Err(Error::shape(op, format!("expected a matrix, got {:?}", t.shape())));
    }
    Ok(())
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

    /// Differentiable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, true)
    }

    /// Non-differentiable leaf (data, labels-as-values, fixed noise).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, false)
    }

    fn push_leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Smallest `|input|` over all ReLU nodes, or infinity without any.
    /// Finite differences with a step above this straddle a kink.
    pub fn relu_margin(&self) -> f64 {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(a) => Some(
                    self.nodes[a.0]
                        .value
                        .data()
                        .iter()
                        .fold(f64::INFINITY, |m, v| m.min(v.abs())),
                ),
                _ => None,
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> Result<Var> {
        value.ensure_finite(op.name())?;
        let requires_grad = op.inputs().iter().flatten().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        is_matrix("matmul", av)?;
        is_matrix("matmul", bv)?;
        let (m, k, n) = (av.rows(), av.cols(), bv.cols());
        if bv.rows() != k {
            return Err(Error::shape("matmul", format!("{:?} x {:?}", av.shape(), bv.shape())));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, 1.0, av.data(), false, bv.data(), false, 0.0, &mut out);
        self.push(Op::MatMul(a, b), Tensor::from_parts(vec![m, n], out))
    }

    /// Adds a length-`n` bias to every row of an `m x n` matrix.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(b));
        is_matrix("add_bias", xv)?;
        if bv.len() != xv.cols() {
            return Err(Error::shape("add_bias", format!("{:?} + {:?}", xv.shape(), bv.shape())));
        }
        let n = xv.cols();
        let mut out = xv.data().to_vec();
        for row in out.chunks_mut(n) {
            for (o, &bb) in row.iter_mut().zip(bv.data()) {
                *o += bb;
            }
        }
        let shape = xv.shape().to_vec();
        self.push(Op::AddBias(x, b), Tensor::from_parts(shape, out))
    }

    /// `x W + b`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xw = self.matmul(x, w)?;
        self.add_bias(xw, b)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("add", self.value(a), self.value(b))?;
        let v = self.value(a).zip(self.value(b), |x, y| x + y);
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("sub", self.value(a), self.value(b))?;
        let v = self.value(a).zip(self.value(b), |x, y| x - y);
        self.push(Op::Sub(a, b), v)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("mul", self.value(a), self.value(b))?;
        let v = self.value(a).zip(self.value(b), |x, y| x * y);
        self.push(Op::Mul(a, b), v)
    }

    /// Elementwise product with a constant tensor of the same shape.
    pub fn mul_const(&mut self, a: Var, c: Tensor) -> Result<Var> {
        same_shape("mul_const", self.value(a), &c)?;
        let v = self.value(a).zip(&c, |x, y| x * y);
        self.push(Op::MulConst(a, c), v)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let v = self.value(a).map(|x| x * s);
        self.push(Op::Scale(a, s), v)
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Result<Var> {
        let v = self.value(a).map(|x| x + s);
        self.push(Op::AddScalar(a), v)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), v)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(Op::Relu(a), v)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), v)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(f64::exp);
        self.push(Op::Exp(a), v)
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(f64::ln);
        self.push(Op::Log(a), v)
    }

    /// Clamps into `[lo, hi]`; the gradient is zero where clamping is active.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        let v = self.value(a).map(|x| x.clamp(lo, hi));
        self.push(Op::Clamp(a, lo, hi), v)
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        is_matrix("softmax", av)?;
        let v = Tensor::from_parts(av.shape().to_vec(), softmax_rows(av.data(), av.cols()));
        self.push(Op::Softmax(a), v)
    }

    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        is_matrix("log_softmax", av)?;
        let v = Tensor::from_parts(av.shape().to_vec(), log_softmax_rows(av.data(), av.cols()));
        self.push(Op::LogSoftmax(a), v)
    }

    /// Mean over rows of `-log softmax(logits)[row, label]`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        is_matrix("cross_entropy", lv)?;
        let (m, c) = (lv.rows(), lv.cols());
        if labels.len() != m {
            return Err(Error::shape(
                "cross_entropy",
                format!("{m} rows, {} labels", labels.len()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {c} classes"
            )));
        }
        let ls = log_softmax_rows(lv.data(), c);
        let loss = -labels.iter().enumerate().map(|(i, &y)| ls[i * c + y]).sum::<f64>() / m as f64;
        self.push(Op::CrossEntropy(logits, labels.to_vec()), Tensor::scalar(loss))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        self.push(Op::Sum(a), Tensor::scalar(s))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push(Op::Mean(a), Tensor::scalar(s))
    }

    /// Column-wise concatenation of two matrices with equal row counts.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        is_matrix("concat", av)?;
        is_matrix("concat", bv)?;
        if av.rows() != bv.rows() {
            return Err(Error::shape("concat", format!("{:?} | {:?}", av.shape(), bv.shape())));
        }
        let (m, ca, cb) = (av.rows(), av.cols(), bv.cols());
        let mut out = Vec::with_capacity(m * (ca + cb));
        for i in 0..m {
            out.extend_from_slice(av.row(i));
            out.extend_from_slice(bv.row(i));
        }
        self.push(Op::ConcatCols(a, b), Tensor::from_parts(vec![m, ca + cb], out))
    }

    /// Row lookup into a `C x e` table.
    pub fn embed(&mut self, table: Var, labels: &[usize]) -> Result<Var> {
        let tv = self.value(table);
        is_matrix("embed", tv)?;
        if labels.is_empty() {
            return Err(Error::InvalidArgument("embed: no labels".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= tv.rows()) {
            return Err(Error::InvalidArgument(format!(
                "class {bad} out of range for {} embeddings",
                tv.rows()
            )));
        }
        let e = tv.cols();
        let mut out = Vec::with_capacity(labels.len() * e);
        for &y in labels {
            out.extend_from_slice(tv.row(y));
        }
        self.push(
            Op::Embed(table, labels.to_vec()),
            Tensor::from_parts(vec![labels.len(), e], out),
        )
    }

    /// `mu + exp(log_var / 2) * eta` with `eta` held fixed.
    pub fn reparameterize(&mut self, mu: Var, log_var: Var, eta: Tensor) -> Result<Var> {
        same_shape("reparameterize", self.value(mu), self.value(log_var))?;
        same_shape("reparameterize", self.value(mu), &eta)?;
        let sd = self.value(log_var).map(|l| (0.5 * l).exp());
        let v = Tensor::from_parts(
            eta.shape().to_vec(),
            self.value(mu)
                .data()
                .iter()
                .zip(sd.data())
                .zip(eta.data())
                .map(|((&m, &s), &e)| m + s * e)
                .collect(),
        );
        self.push(Op::Reparam(mu, log_var, eta), v)
    }

    /// Dropout under `spec`; the mask comes from `rng` and is recorded as a
    /// constant factor.
    pub fn dropout(&mut self, x: Var, spec: DropoutSpec, rng: &mut RngStream) -> Result<Var> {
        match dropout::mask(self.value(x).shape(), spec, rng)? {
            Some(mask) => self.mul_const(x, mask),
            None => Ok(x),
        }
    }

    /// Gradients of scalar `root` with respect to every differentiable node.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        self.sweep(root, None)
    }

    /// Like [`Tape::backward`], but only propagates along paths that reach
    /// one of `targets`; other leaves get zero gradients.
    pub fn backward_wrt(&self, root: Var, targets: &[Var]) -> Result<Gradients> {
        let mut relevant = vec![false; self.nodes.len()];
        for t in targets {
            if t.0 < relevant.len() {
                relevant[t.0] = true;
            }
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.op.inputs().iter().flatten().any(|v| relevant[v.0]) {
                relevant[i] = true;
            }
        }
        self.sweep(root, Some(&relevant))
    }

    fn sweep(&self, root: Var, relevant: Option<&[bool]>) -> Result<Gradients> {
        if self.nodes.is_empty() || root.0 >= self.nodes.len() {
            return Err(Error::NoForward);
        }
        if self.value(root).len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("root must be scalar, got {:?}", self.value(root).shape()),
            ));
        }
        let wants = |v: Var| -> bool { self.nodes[v.0].requires_grad && relevant.is_none_or(|r| r[v.0]) };
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::scalar(1.0));

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                grads[i] = Some(g);
                continue;
            }
            let contributions = self.local_grads(node, &g, &wants);
            for (v, gv) in contributions {
                match &mut grads[v.0] {
                    Some(acc) => acc.add_assign(&gv),
                    slot => *slot = Some(gv),
                }
            }
            grads[i] = Some(g);
        }
        for (i, g) in grads.iter_mut().enumerate() {
            if !self.nodes[i].requires_grad {
                *g = None;
            }
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn local_grads(&self, node: &Node, g: &Tensor, wants: &dyn Fn(Var) -> bool) -> Vec<(Var, Tensor)> {
        use Op::*;
        let val = |v: Var| &self.nodes[v.0].value;
        let y = &node.value;
        let mut out = Vec::with_capacity(2);
        match &node.op {
            Leaf => {}
            MatMul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                if wants(*a) {
                    let mut ga = vec![0.0; m * k];
                    gemm(m, n, k, 1.0, g.data(), false, bv.data(), true, 0.0, &mut ga);
                    out.push((*a, Tensor::from_parts(av.shape().to_vec(), ga)));
                }
                if wants(*b) {
                    let mut gb = vec![0.0; k * n];
                    gemm(k, m, n, 1.0, av.data(), true, g.data(), false, 0.0, &mut gb);
                    out.push((*b, Tensor::from_parts(bv.shape().to_vec(), gb)));
                }
            }
            AddBias(x, b) => {
                if wants(*x) {
                    out.push((*x, g.clone()));
                }
                if wants(*b) {
                    let n = g.cols();
                    let mut gb = vec![0.0; n];
                    for row in g.data().chunks(n) {
                        for (acc, &r) in gb.iter_mut().zip(row) {
                            *acc += r;
                        }
                    }
                    out.push((*b, Tensor::from_parts(val(*b).shape().to_vec(), gb)));
                }
            }
            Add(a, b) => {
                if wants(*a) {
                    out.push((*a, g.clone()));
                }
                if wants(*b) {
                    out.push((*b, g.clone()));
                }
            }
            Sub(a, b) => {
                if wants(*a) {
                    out.push((*a, g.clone()));
                }
                if wants(*b) {
                    out.push((*b, g.map(|x| -x)));
                }
            }
            Mul(a, b) => {
                if wants(*a) {
                    out.push((*a, g.zip(val(*b), |x, y| x * y)));
                }
                if wants(*b) {
                    out.push((*b, g.zip(val(*a), |x, y| x * y)));
                }
            }
            MulConst(a, c) => {
                if wants(*a) {
                    out.push((*a, g.zip(c, |x, y| x * y)));
                }
            }
            Scale(a, s) => {
                if wants(*a) {
                    out.push((*a, g.map(|x| x * s)));
                }
            }
            AddScalar(a) => {
                if wants(*a) {
                    out.push((*a, g.clone()));
                }
            }
            Tanh(a) => {
                if wants(*a) {
                    out.push((*a, g.zip(y, |gg, t| gg * (1.0 - t * t))));
                }
            }
            Relu(a) => {
                if wants(*a) {
                    out.push((*a, g.zip(val(*a), |gg, x| if x > 0.0 { gg } else { 0.0 })));
                }
            }
            Sigmoid(a) => {
                if wants(*a) {
                    out.push((*a, g.zip(y, |gg, s| gg * s * (1.0 - s))));
                }
            }
            Exp(a) => {
                if wants(*a) {
                    out.push((*a, g.zip(y, |gg, e| gg * e)));
                }
            }
            Log(a) => {
                if wants(*a) {
                    out.push((*a, g.zip(val(*a), |gg, x| gg / x)));
                }
            }
            Clamp(a, lo, hi) => {
                if wants(*a) {
                    let (lo, hi) = (*lo, *hi);
                    out.push((*a, g.zip(val(*a), |gg, x| if x > lo && x < hi { gg } else { 0.0 })));
                }
            }
            Softmax(a) => {
                if wants(*a) {
                    let c = y.cols();
                    let mut ga = vec![0.0; y.len()];
                    for ((gr, yr), dst) in g.data().chunks(c).zip(y.data().chunks(c)).zip(ga.chunks_mut(c)) {
                        let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                        for ((d, &gg), &yy) in dst.iter_mut().zip(gr).zip(yr) {
                            *d = yy * (gg - dot);
                        }
                    }
                    out.push((*a, Tensor::from_parts(y.shape().to_vec(), ga)));
                }
            }
            LogSoftmax(a) => {
                if wants(*a) {
                    let c = y.cols();
                    let mut ga = vec![0.0; y.len()];
                    for ((gr, yr), dst) in g.data().chunks(c).zip(y.data().chunks(c)).zip(ga.chunks_mut(c)) {
                        let total: f64 = gr.iter().sum();
                        for ((d, &gg), &ly) in dst.iter_mut().zip(gr).zip(yr) {
                            *d = gg - ly.exp() * total;
                        }
                    }
                    out.push((*a, Tensor::from_parts(y.shape().to_vec(), ga)));
                }
            }
            CrossEntropy(a, labels) => {
                if wants(*a) {
                    let lv = val(*a);
                    let (m, c) = (lv.rows(), lv.cols());
                    let scale = g.item() / m as f64;
                    let mut ga = softmax_rows(lv.data(), c);
                    for (i, &lab) in labels.iter().enumerate() {
                        ga[i * c + lab] -= 1.0;
                    }
                    for v in ga.iter_mut() {
                        *v *= scale;
                    }
                    out.push((*a, Tensor::from_parts(lv.shape().to_vec(), ga)));
                }
            }
            Sum(a) => {
                if wants(*a) {
                    out.push((*a, Tensor::filled(val(*a).shape(), g.item())));
                }
            }
            Mean(a) => {
                if wants(*a) {
                    let n = val(*a).len() as f64;
                    out.push((*a, Tensor::filled(val(*a).shape(), g.item() / n)));
                }
            }
            ConcatCols(a, b) => {
                let (ca, cb) = (val(*a).cols(), val(*b).cols());
                let m = g.rows();
                if wants(*a) {
                    let mut ga = Vec::with_capacity(m * ca);
                    for row in g.data().chunks(ca + cb) {
                        ga.extend_from_slice(&row[..ca]);
                    }
                    out.push((*a, Tensor::from_parts(vec![m, ca], ga)));
                }
                if wants(*b) {
                    let mut gb = Vec::with_capacity(m * cb);
                    for row in g.data().chunks(ca + cb) {
                        gb.extend_from_slice(&row[ca..]);
                    }
                    out.push((*b, Tensor::from_parts(vec![m, cb], gb)));
                }
            }
            Embed(table, labels) => {
                if wants(*table) {
                    let tv = val(*table);
                    let e = tv.cols();
                    let mut gt = vec![0.0; tv.len()];
                    for (row, &lab) in g.data().chunks(e).zip(labels) {
                        for (d, &r) in gt[lab * e..(lab + 1) * e].iter_mut().zip(row) {
                            *d += r;
                        }
                    }
                    out.push((*table, Tensor::from_parts(tv.shape().to_vec(), gt)));
                }
            }
            Reparam(mu, log_var, eta) => {
                if wants(*mu) {
                    out.push((*mu, g.clone()));
                }
                if wants(*log_var) {
                    let lv = val(*log_var);
                    let ga: Vec<f64> = g
                        .data()
                        .iter()
                        .zip(lv.data())
                        .zip(eta.data())
                        .map(|((&gg, &l), &e)| gg * e * 0.5 * (0.5 * l).exp())
                        .collect();
                    out.push((*log_var, Tensor::from_parts(lv.shape().to_vec(), ga)));
                }
            }
        }
        out
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
