//! Reverse-mode differentiation over vector-valued nodes.
//!
//! A [`Tape`] records every operation of a forward pass as a node holding its
//! output. [`Tape::backward`] walks the nodes in reverse creation order and
//! returns a [`Gradients`] value; parameter gradients are then folded into a
//! [`ParamStore`] with [`ParamStore::accumulate`].
//!
//! Parameters are not copied onto the tape: a parameter node reads its value
//! from the borrowed store. Each parameter gets at most one node per tape, so
//! reusing a weight across time steps accumulates its gradient additively.

use std::collections::HashMap;

use super::param::{ParamId, ParamStore};
use super::tensor::{axpy, dot, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Input,
    Param(ParamId),
    /// `x W + b` with `W: d x n`.
    Affine { x: Var, w: Var, b: Var },
    /// `W x (+ b)` with `W: n x d`.
    Linear { w: Var, x: Var, b: Option<Var> },
    Add(Var, Var),
    Mul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Slice { src: Var, start: usize },
    Concat(Vec<Var>),
    Sum(Vec<Var>),
    Scale(Var, f64),
    Mean(Var),
    SoftmaxXent { logits: Var, gold: usize, probs: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    op: Op,
    /// `None` for parameter nodes, whose value lives in the store.
    value: Option<Tensor>,
    requires_grad: bool,
}

pub struct Tape<'p> {
    store: Option<&'p ParamStore>,
    nodes: Vec<Node>,
    param_vars: HashMap<ParamId, Var>,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Tape {
            store: None,
            nodes: Vec::new(),
            param_vars: HashMap::new(),
        }
    }

    pub fn with_params(store: &'p ParamStore) -> Self {
        Tape {
            store: Some(store),
            nodes: Vec::new(),
            param_vars: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => &self.store.expect("param node without store").get(*id).value,
            (None, _) => unreachable!("non-param node without value"),
        }
    }

    fn data(&self, v: Var) -> &[f64] {
        self.value(v).data()
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value: Some(value),
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Op::Constant, value, false)
    }

    /// A leaf whose gradient is reported by [`Gradients::wrt`].
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(Op::Input, value, true)
    }

    pub fn param(&mut self, id: ParamId) -> Result<Var> {
        if let Some(&v) = self.param_vars.get(&id) {
            return Ok(v);
        }
        let store = self
            .store
            .ok_or_else(|| Error::State("tape has no parameter store".into()))?;
        if id.0 >= store.len() {
            return Err(Error::Index {
                index: id.0,
                size: store.len(),
            });
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
            requires_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars.insert(id, v);
        Ok(v)
    }

    fn vec_len(&self, v: Var, what: &str) -> Result<usize> {
        let t = self.value(v);
        if t.shape().len() != 1 {
            return Err(Error::Dimension(format!(
                "{what} must be a vector, got shape {:?}",
                t.shape()
            )));
        }
        Ok(t.len())
    }

    fn matrix_dims(&self, v: Var, what: &str) -> Result<(usize, usize)> {
        self.value(v).dims2().ok_or_else(|| {
            Error::Dimension(format!(
                "{what} must be a matrix, got shape {:?}",
                self.value(v).shape()
            ))
        })
    }

    /// `y = x W + b` for `x: [d]`, `W: [d, n]`, `b: [n]`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let d = self.vec_len(x, "affine input")?;
        let (wr, wc) = self.matrix_dims(w, "affine weight")?;
        let n = self.vec_len(b, "affine bias")?;
        if wr != d || wc != n {
            return Err(Error::Dimension(format!(
                "affine: x {:?}, W {:?}, b {:?}",
                self.value(x).shape(),
                self.value(w).shape(),
                self.value(b).shape()
            )));
        }
        let mut y = self.data(b).to_vec();
        let xs = self.data(x);
        let ws = self.data(w);
        for (i, &xi) in xs.iter().enumerate() {
            if xi != 0.0 {
                axpy(xi, &ws[i * n..(i + 1) * n], &mut y);
            }
        }
        let rg = self.needs(x) || self.needs(w) || self.needs(b);
        Ok(self.push(Op::Affine { x, w, b }, Tensor::vector(y), rg))
    }

    /// `y = W x (+ b)` for `W: [n, d]`, `x: [d]`.
    pub fn linear(&mut self, w: Var, x: Var, b: Option<Var>) -> Result<Var> {
        let (n, d) = self.matrix_dims(w, "linear weight")?;
        let xd = self.vec_len(x, "linear input")?;
        if xd != d {
            return Err(Error::Dimension(format!(
                "linear: W {:?}, x {:?}",
                self.value(w).shape(),
                self.value(x).shape()
            )));
        }
        if let Some(b) = b {
            let bn = self.vec_len(b, "linear bias")?;
            if bn != n {
                return Err(Error::Dimension(format!(
                    "linear: W {:?}, b {:?}",
                    self.value(w).shape(),
                    self.value(b).shape()
                )));
            }
        }
        let xs = self.data(x);
        let ws = self.data(w);
        let mut y: Vec<f64> = (0..n).map(|r| dot(&ws[r * d..(r + 1) * d], xs)).collect();
        if let Some(b) = b {
            for (yi, bi) in y.iter_mut().zip(self.data(b)) {
                *yi += bi;
            }
        }
        let rg = self.needs(w) || self.needs(x) || b.is_some_and(|b| self.needs(b));
        Ok(self.push(Op::Linear { w, x, b }, Tensor::vector(y), rg))
    }

    fn same_len(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::Dimension(format!(
                "{what}: {:?} vs {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        Ok(())
    }

    fn map_unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let t = self.value(a);
        let data = t.data().iter().map(|&v| f(v)).collect();
        let out = Tensor::new(t.shape().to_vec(), data).expect("same shape");
        let rg = self.needs(a);
        self.push(op, out, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len(a, b, "add")?;
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| x + y)
            .collect();
        let out = Tensor::new(self.value(a).shape().to_vec(), data)?;
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Add(a, b), out, rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len(a, b, "mul")?;
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| x * y)
            .collect();
        let out = Tensor::new(self.value(a).shape().to_vec(), data)?;
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Mul(a, b), out, rg))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map_unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map_unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        self.map_unary(a, |v| v * factor, Op::Scale(a, factor))
    }

    pub fn slice(&mut self, src: Var, start: usize, len: usize) -> Result<Var> {
        let n = self.vec_len(src, "slice source")?;
        if len == 0 || start + len > n {
            return Err(Error::Dimension(format!(
                "slice [{start}, {}) of length-{n} vector",
                start + len
            )));
        }
        let out = Tensor::vector(self.data(src)[start..start + len].to_vec());
        let rg = self.needs(src);
        Ok(self.push(Op::Slice { src, start }, out, rg))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::EmptyInput("concat of zero vectors".into()));
        }
        let mut data = Vec::new();
        for &p in parts {
            self.vec_len(p, "concat part")?;
            data.extend_from_slice(self.data(p));
        }
        let rg = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(Op::Concat(parts.to_vec()), Tensor::vector(data), rg))
    }

    /// Elementwise sum of equally shaped values.
    pub fn sum(&mut self, parts: &[Var]) -> Result<Var> {
        let (&first, rest) = parts
            .split_first()
            .ok_or_else(|| Error::EmptyInput("sum of zero values".into()))?;
        let mut acc = self.value(first).clone();
        for &p in rest {
            self.same_len(first, p, "sum")?;
            for (a, b) in acc.data_mut().iter_mut().zip(self.data(p)) {
                *a += b;
            }
        }
        let rg = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(Op::Sum(parts.to_vec()), acc, rg))
    }

    /// Mean of all elements, as a length-1 vector.
    pub fn mean(&mut self, a: Var) -> Var {
        let d = self.data(a);
        let m = d.iter().sum::<f64>() / d.len() as f64;
        let rg = self.needs(a);
        self.push(Op::Mean(a), Tensor::vector(vec![m]), rg)
    }

    /// Softmax cross-entropy of `logits` against class `gold`, as a length-1
    /// vector holding `-log p[gold]`.
    pub fn softmax_xent(&mut self, logits: Var, gold: usize) -> Result<Var> {
        let k = self.vec_len(logits, "logits")?;
        if k < 2 {
            return Err(Error::Dimension(format!("softmax needs >= 2 classes, got {k}")));
        }
        if gold >= k {
            return Err(Error::Index { index: gold, size: k });
        }
        let (probs, log_z) = softmax_with_logz(self.data(logits));
        let loss = log_z - self.data(logits)[gold];
        let rg = self.needs(logits);
        Ok(self.push(
            Op::SoftmaxXent { logits, gold, probs },
            Tensor::vector(vec![loss]),
            rg,
        ))
    }

    /// Probabilities cached by a [`Tape::softmax_xent`] node.
    pub fn probs(&self, v: Var) -> Option<&[f64]> {
        match &self.nodes[v.0].op {
            Op::SoftmaxXent { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(Error::State("backward called on an empty tape".into()));
        }
        if loss.0 >= self.nodes.len() {
            return Err(Error::State(format!(
                "loss node {} is not on this tape ({} nodes)",
                loss.0,
                self.nodes.len()
            )));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::State(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }

        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(node, &g, &mut grads);
            grads[i] = Some(g);
        }

        let params = self
            .param_vars
            .iter()
            .map(|(&id, &v)| (id, v))
            .collect::<Vec<_>>();
        Ok(Gradients { grads, params })
    }

    fn backprop_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let out = node.value.as_ref();
        match &node.op {
            Op::Constant | Op::Input | Op::Param(_) => {}
            Op::Affine { x, w, b } => {
                let n = g.len();
                if self.needs(*b) {
                    axpy(1.0, g, slot(grads, *b, n));
                }
                if self.needs(*w) {
                    let xs = self.data(*x);
                    let gw = slot(grads, *w, xs.len() * n);
                    for (r, &xi) in xs.iter().enumerate() {
                        if xi != 0.0 {
                            axpy(xi, g, &mut gw[r * n..(r + 1) * n]);
                        }
                    }
                }
                if self.needs(*x) {
                    let ws = self.data(*w);
                    let d = ws.len() / n;
                    let gx = slot(grads, *x, d);
                    for (r, gxr) in gx.iter_mut().enumerate() {
                        *gxr += dot(&ws[r * n..(r + 1) * n], g);
                    }
                }
            }
            Op::Linear { w, x, b } => {
                let n = g.len();
                if let Some(b) = b {
                    if self.needs(*b) {
                        axpy(1.0, g, slot(grads, *b, n));
                    }
                }
                let d = self.value(*x).len();
                if self.needs(*w) {
                    let xs = self.data(*x);
                    let gw = slot(grads, *w, n * d);
                    for (r, &gr) in g.iter().enumerate() {
                        if gr != 0.0 {
                            axpy(gr, xs, &mut gw[r * d..(r + 1) * d]);
                        }
                    }
                }
                if self.needs(*x) {
                    let ws = self.data(*w);
                    let gx = slot(grads, *x, d);
                    for (r, &gr) in g.iter().enumerate() {
                        if gr != 0.0 {
                            axpy(gr, &ws[r * d..(r + 1) * d], gx);
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if self.needs(v) {
                        axpy(1.0, g, slot(grads, v, g.len()));
                    }
                }
            }
            Op::Mul(a, b) => {
                if self.needs(*a) {
                    let bs = self.data(*b);
                    let ga = slot(grads, *a, g.len());
                    for ((ga, gi), bi) in ga.iter_mut().zip(g).zip(bs) {
                        *ga += gi * bi;
                    }
                }
                if self.needs(*b) {
                    let as_ = self.data(*a);
                    let gb = slot(grads, *b, g.len());
                    for ((gb, gi), ai) in gb.iter_mut().zip(g).zip(as_) {
                        *gb += gi * ai;
                    }
                }
            }
            Op::Sigmoid(a) => {
                let y = out.expect("value").data();
                let ga = slot(grads, *a, g.len());
                for ((ga, gi), yi) in ga.iter_mut().zip(g).zip(y) {
                    *ga += gi * yi * (1.0 - yi);
                }
            }
            Op::Tanh(a) => {
                let y = out.expect("value").data();
                let ga = slot(grads, *a, g.len());
                for ((ga, gi), yi) in ga.iter_mut().zip(g).zip(y) {
                    *ga += gi * (1.0 - yi * yi);
                }
            }
            Op::Scale(a, f) => {
                axpy(*f, g, slot(grads, *a, g.len()));
            }
            Op::Slice { src, start } => {
                let n = self.value(*src).len();
                let gs = slot(grads, *src, n);
                axpy(1.0, g, &mut gs[*start..*start + g.len()]);
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    if self.needs(p) {
                        axpy(1.0, &g[off..off + len], slot(grads, p, len));
                    }
                    off += len;
                }
            }
            Op::Sum(parts) => {
                for &p in parts {
                    if self.needs(p) {
                        axpy(1.0, g, slot(grads, p, g.len()));
                    }
                }
            }
            Op::Mean(a) => {
                let n = self.value(*a).len();
                let ga = slot(grads, *a, n);
                let share = g[0] / n as f64;
                ga.iter_mut().for_each(|v| *v += share);
            }
            Op::SoftmaxXent {
                logits,
                gold,
                probs,
            } => {
                let gl = slot(grads, *logits, probs.len());
                for (k, (gk, pk)) in gl.iter_mut().zip(probs).enumerate() {
                    let onehot = if k == *gold { 1.0 } else { 0.0 };
                    *gk += g[0] * (pk - onehot);
                }
            }
        }
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

/// Result of a backward pass.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    params: Vec<(ParamId, Var)>,
}

impl Gradients {
    /// Gradient with respect to a node; `None` if the loss does not reach it.
    pub fn wrt(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradients of every parameter bound on the tape and reached by the loss.
    pub fn param_grads(&self) -> impl Iterator<Item = (ParamId, &[f64])> {
        self.params
            .iter()
            .filter_map(|&(id, v)| self.wrt(v).map(|g| (id, g)))
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_with_logz(logits: &[f64]) -> (Vec<f64>, f64) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let probs = exps.iter().map(|e| e / z).collect();
    (probs, max + z.ln())
}

/// Max-stabilised softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    softmax_with_logz(logits).0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_on_empty_tape_is_a_state_error() {
        let tape = Tape::new();
        assert!(matches!(tape.backward(Var(0)), Err(Error::State(_))));
    }

    #[test]
    fn backward_needs_scalar() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(tape.backward(x), Err(Error::State(_))));
    }

    #[test]
    fn repeated_parameter_use_accumulates() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector(vec![3.0])).unwrap();
        let mut tape = Tape::with_params(&store);
        let a = tape.param(w).unwrap();
        let b = tape.param(w).unwrap();
        assert_eq!(a, b);
        let loss = tape.add(a, b).unwrap();
        let grads = tape.backward(loss).unwrap();
        store.accumulate(&grads);
        assert_eq!(store.get(w).grad.data(), &[2.0]);
    }

    #[test]
    fn unreached_parameter_has_zero_grad() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector(vec![3.0, 1.0])).unwrap();
        let u = store.add("u", Tensor::vector(vec![5.0])).unwrap();
        let mut tape = Tape::with_params(&store);
        let _ = tape.param(w).unwrap();
        let uv = tape.param(u).unwrap();
        let loss = tape.tanh(uv);
        let grads = tape.backward(loss).unwrap();
        store.accumulate(&grads);
        assert_eq!(store.get(w).grad.data(), &[0.0, 0.0]);
        assert!(store.get(u).grad.data()[0] > 0.0);
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::vector(vec![1.0, 2.0]));
        let x = tape.input(Tensor::vector(vec![0.5, 0.5]));
        let m = tape.mul(c, x).unwrap();
        let loss = tape.mean(m);
        let grads = tape.backward(loss).unwrap();
        assert!(grads.wrt(c).is_none());
        assert_eq!(grads.wrt(x).unwrap(), &[0.5, 1.0]);
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let p = softmax(&[1000.0, 1000.0]);
        assert_eq!(p, vec![0.5, 0.5]);
    }
}
