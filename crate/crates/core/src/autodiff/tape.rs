//! Dynamic computation graph with reverse-mode differentiation.
//!
//! A [`Tape`] is built fresh for each forward pass. Parameter tensors are
//! borrowed, not copied, so many tapes can share one frozen parameter set.

use std::borrow::Cow;
use std::collections::HashMap;

use super::{Gradients, ParamId, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    Concat(Vec<NodeId>),
    Affine { w: NodeId, b: NodeId, x: NodeId },
    Relu(NodeId),
    Mse { pred: NodeId, target: NodeId },
}

#[derive(Debug)]
struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
    params: HashMap<ParamId, NodeId>,
}

fn mismatch(op: &'static str, expected: impl Into<String>, found: impl Into<String>) -> Error {
    Error::ShapeMismatch { op, expected: expected.into(), found: found.into() }
}

impl<'a> Tape<'a> {
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

    /// First entry of a node's value; meant for scalar losses.
    pub fn scalar(&self, id: NodeId) -> f64 {
        self.value(id).as_slice()[0]
    }

    fn push(&mut self, value: Cow<'a, Tensor>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    /// Record a borrowed constant (receives no gradient).
    pub fn constant(&mut self, value: &'a Tensor) -> NodeId {
        self.push(Cow::Borrowed(value), Op::Constant)
    }

    pub fn constant_owned(&mut self, value: Tensor) -> NodeId {
        self.push(Cow::Owned(value), Op::Constant)
    }

    /// Record a parameter leaf. Registering the same id again returns the
    /// existing node, so every use of a parameter feeds one gradient.
    pub fn param(&mut self, id: ParamId, value: &'a Tensor) -> NodeId {
        if let Some(&node) = self.params.get(&id) {
            return node;
        }
        let node = self.push(Cow::Borrowed(value), Op::Param(id));
        self.params.insert(id, node);
        node
    }

    /// Concatenate row vectors in argument order.
    pub fn concat(&mut self, inputs: &[NodeId]) -> Result<NodeId> {
        if inputs.is_empty() {
            return Err(Error::EmptyInputList);
        }
        let mut data = Vec::new();
        for &id in inputs {
            let v = self.value(id);
            if !v.is_row() {
                return Err(mismatch("concat", "row vector", v.shape_string()));
            }
            data.extend_from_slice(v.as_slice());
        }
        Ok(self.push(Cow::Owned(Tensor::row(data)), Op::Concat(inputs.to_vec())))
    }

    /// `x . W^T + b` for `W: out x in`, `b: 1 x out`, `x: 1 x in`.
    pub fn affine(&mut self, w: NodeId, b: NodeId, x: NodeId) -> Result<NodeId> {
        let (wv, bv, xv) = (self.value(w), self.value(b), self.value(x));
        let (out, inp) = wv.shape();
        if xv.shape() != (1, inp) {
            return Err(mismatch("affine", format!("x of 1x{inp}"), xv.shape_string()));
        }
        if bv.shape() != (1, out) {
            return Err(mismatch("affine", format!("b of 1x{out}"), bv.shape_string()));
        }
        let (wd, xd) = (wv.as_slice(), xv.as_slice());
        let y: Vec<f64> = (0..out)
            .map(|i| {
                let row = &wd[i * inp..(i + 1) * inp];
                bv.as_slice()[i] + row.iter().zip(xd).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        Ok(self.push(Cow::Owned(Tensor::row(y)), Op::Affine { w, b, x }))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let y = self.value(x).map(|v| v.max(0.0));
        self.push(Cow::Owned(y), Op::Relu(x))
    }

    /// Per-coordinate mean squared error, a `1 x 1` node.
    pub fn mse(&mut self, pred: NodeId, target: NodeId) -> Result<NodeId> {
        let (p, t) = (self.value(pred), self.value(target));
        if p.shape() != t.shape() || !p.is_row() {
            return Err(mismatch("mse", p.shape_string(), t.shape_string()));
        }
        let v = super::mse_value(p.as_slice(), t.as_slice());
        Ok(self.push(Cow::Owned(Tensor::scalar(v)), Op::Mse { pred, target }))
    }

    /// Reverse-mode sweep from a scalar `loss`. Every parameter recorded on
    /// the tape gets an entry, zero if the loss does not depend on it.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(Error::NotScalarLoss { rows: lv.rows(), cols: lv.cols() });
        }
        let mut adj: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        adj[loss.0] = Some(Tensor::scalar(1.0));
        let mut grads = Gradients::new();

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            let Some(g) = adj[i].take() else {
                if let Op::Param(id) = node.op {
                    grads.add(id, &Tensor::zeros(node.value.rows(), node.value.cols()));
                }
                continue;
            };
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => grads.add(*id, &g),
                Op::Concat(inputs) => {
                    let mut offset = 0;
                    for &inp in inputs {
                        let k = self.value(inp).len();
                        let part = Tensor::row(g.as_slice()[offset..offset + k].to_vec());
                        accumulate(&mut adj, inp, part);
                        offset += k;
                    }
                }
                Op::Affine { w, b, x } => {
                    let (wv, xv) = (self.value(*w), self.value(*x));
                    let (out, inp) = wv.shape();
                    let (gd, xd, wd) = (g.as_slice(), xv.as_slice(), wv.as_slice());
                    let mut dw = Vec::with_capacity(out * inp);
                    for gi in gd {
                        dw.extend(xd.iter().map(|xj| gi * xj));
                    }
                    let mut dx = vec![0.0; inp];
                    for (i, gi) in gd.iter().enumerate() {
                        for (dxj, wij) in dx.iter_mut().zip(&wd[i * inp..(i + 1) * inp]) {
                            *dxj += gi * wij;
                        }
                    }
                    accumulate(&mut adj, *w, Tensor::from_raw(out, inp, dw));
                    accumulate(&mut adj, *b, g.clone());
                    accumulate(&mut adj, *x, Tensor::row(dx));
                }
                Op::Relu(x) => {
                    let xv = self.value(*x);
                    let masked: Vec<f64> = xv
                        .as_slice()
                        .iter()
                        .zip(g.as_slice())
                        .map(|(&xi, &gi)| if xi > 0.0 { gi } else { 0.0 })
                        .collect();
                    accumulate(&mut adj, *x, Tensor::row(masked));
                }
                Op::Mse { pred, target } => {
                    let (p, t) = (self.value(*pred), self.value(*target));
                    let scale = g.as_slice()[0] * 2.0 / p.len() as f64;
                    let dp: Vec<f64> =
                        p.as_slice().iter().zip(t.as_slice()).map(|(pi, ti)| scale * (pi - ti)).collect();
                    let dt = Tensor::row(dp.iter().map(|v| -v).collect());
                    accumulate(&mut adj, *pred, Tensor::row(dp));
                    accumulate(&mut adj, *target, dt);
                }
            }
        }
        Ok(grads)
    }
}

fn accumulate(adj: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
    match &mut adj[id.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}
