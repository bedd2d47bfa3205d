//! Reverse-mode automatic differentiation over an append-only tape.
//!
//! Every operation appends a node whose inputs precede it, so the tape is a
//! DAG in topological order and the backward sweep is a single reverse pass.

use std::collections::BTreeMap;

use super::tensor::{self, gemm, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub enum OpKind {
    Param,
    Constant,
    MatMul(Var, Var),
    /// Matrix plus a row-vector bias broadcast over rows.
    AddBias(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Concat { parts: Vec<Var>, axis: usize },
    Mul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    Square(Var),
    Sum(Var),
}

impl OpKind {
    fn inputs(&self) -> Vec<Var> {
        match self {
            OpKind::Param | OpKind::Constant => Vec::new(),
            OpKind::Relu(a) | OpKind::Sigmoid(a) | OpKind::Scale(a, _) | OpKind::Square(a) | OpKind::Sum(a) => {
                vec![*a]
            }
            OpKind::MatMul(a, b)
            | OpKind::AddBias(a, b)
            | OpKind::Mul(a, b)
            | OpKind::Add(a, b)
            | OpKind::Sub(a, b) => vec![*a, *b],
            OpKind::Concat { parts, .. } => parts.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TapeNode {
    pub op: OpKind,
    pub value: Tensor,
    /// Whether any parameter is upstream of this node.
    tracked: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<TapeNode>,
}

/// Gradients of a scalar loss with respect to every parameter leaf that
/// influenced it.
#[derive(Debug, Default)]
pub struct Gradients {
    grads: BTreeMap<Var, Tensor>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(&var)
    }

    /// Gradient for `var`, or zeros of `shape` when the loss does not depend on it.
    pub fn get_or_zeros(&self, var: Var, shape: &[usize]) -> Tensor {
        self.grads
            .get(&var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(shape))
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, &Tensor)> {
        self.grads.iter().map(|(v, t)| (*v, t))
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

    pub fn node(&self, var: Var) -> &TapeNode {
        &self.nodes[var.0]
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn is_tracked(&self, var: Var) -> bool {
        self.nodes[var.0].tracked
    }

    fn push(&mut self, op: OpKind, value: Tensor) -> Var {
        let tracked = match op {
            OpKind::Param => true,
            OpKind::Constant => false,
            _ => op.inputs().iter().any(|v| self.nodes[v.0].tracked),
        };
        self.nodes.push(TapeNode { op, value, tracked });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that receives a gradient.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(OpKind::Param, value)
    }

    /// Leaf that is treated as a constant.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(OpKind::Constant, value)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = tensor::matmul(self.value(a), self.value(b))?;
        Ok(self.push(OpKind::MatMul(a, b), value))
    }

    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let value = tensor::add_row_bias(self.value(x), self.value(bias))?;
        Ok(self.push(OpKind::AddBias(x, bias), value))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = tensor::relu(self.value(x));
        self.push(OpKind::Relu(x), value)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = tensor::sigmoid(self.value(x));
        self.push(OpKind::Sigmoid(x), value)
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let values: Vec<&Tensor> = parts.iter().map(|&v| self.value(v)).collect();
        let value = tensor::concat(&values, axis)?;
        Ok(self.push(
            OpKind::Concat {
                parts: parts.to_vec(),
                axis,
            },
            value,
        ))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        Ok(self.push(OpKind::Mul(a, b), value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        Ok(self.push(OpKind::Add(a, b), value))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y)?;
        Ok(self.push(OpKind::Sub(a, b), value))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let value = self.value(x).map(|v| v * factor);
        self.push(OpKind::Scale(x, factor), value)
    }

    pub fn square(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v * v);
        self.push(OpKind::Square(x), value)
    }

    /// Sum of all entries, as a rank-0 tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).sum());
        self.push(OpKind::Sum(x), value)
    }

    /// Elementwise product with a constant tensor.
    pub fn mul_const(&mut self, x: Var, c: Tensor) -> Result<Var> {
        let c = self.constant(c);
        self.mul(x, c)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if loss.0 >= self.nodes.len() {
            return Err(Error::Contract(format!("{loss:?} is not on this tape")));
        }
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads = Gradients::default();
        if !self.nodes[loss.0].tracked {
            return Ok(grads);
        }

        let mut adjoints: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        adjoints[loss.0] = Some(Tensor::filled(self.value(loss).shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = adjoints[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if !node.tracked {
                continue;
            }
            let inputs = node.op.inputs();
            if inputs.iter().any(|v| v.0 >= idx) {
                return Err(Error::Contract(format!(
                    "tape node {idx} references a later node"
                )));
            }
            match &node.op {
                OpKind::Param => {
                    grads.grads.insert(Var(idx), g);
                }
                OpKind::Constant => {}
                OpKind::MatMul(a, b) => {
                    if self.is_tracked(*a) {
                        let ga = gemm(&g, false, self.value(*b), true)?;
                        accumulate(&mut adjoints, *a, ga);
                    }
                    if self.is_tracked(*b) {
                        let gb = gemm(self.value(*a), true, &g, false)?;
                        accumulate(&mut adjoints, *b, gb);
                    }
                }
                OpKind::AddBias(x, bias) => {
                    if self.is_tracked(*bias) {
                        let cols = g.cols();
                        let mut gb = vec![0.0; cols];
                        for row in g.data().chunks(cols.max(1)) {
                            for (acc, v) in gb.iter_mut().zip(row) {
                                *acc += v;
                            }
                        }
                        let shape = self.value(*bias).shape().to_vec();
                        accumulate(&mut adjoints, *bias, Tensor::from_parts(shape, gb));
                    }
                    if self.is_tracked(*x) {
                        accumulate(&mut adjoints, *x, g);
                    }
                }
                OpKind::Relu(x) => {
                    let gx = g.zip_map(self.value(*x), |gv, xv| if xv > 0.0 { gv } else { 0.0 })?;
                    accumulate(&mut adjoints, *x, gx);
                }
                OpKind::Sigmoid(x) => {
                    let gx = g.zip_map(&node.value, |gv, s| gv * s * (1.0 - s))?;
                    accumulate(&mut adjoints, *x, gx);
                }
                OpKind::Concat { parts, axis } => {
                    for (part, gp) in parts.iter().zip(split_concat(self, parts, *axis, &g)) {
                        if self.is_tracked(*part) {
                            accumulate(&mut adjoints, *part, gp);
                        }
                    }
                }
                OpKind::Mul(a, b) => {
                    if self.is_tracked(*a) {
                        let ga = g.zip_map(self.value(*b), |gv, bv| gv * bv)?;
                        accumulate(&mut adjoints, *a, ga);
                    }
                    if self.is_tracked(*b) {
                        let gb = g.zip_map(self.value(*a), |gv, av| gv * av)?;
                        accumulate(&mut adjoints, *b, gb);
                    }
                }
                OpKind::Add(a, b) => {
                    if self.is_tracked(*a) {
                        accumulate(&mut adjoints, *a, g.clone());
                    }
                    if self.is_tracked(*b) {
                        accumulate(&mut adjoints, *b, g);
                    }
                }
                OpKind::Sub(a, b) => {
                    if self.is_tracked(*a) {
                        accumulate(&mut adjoints, *a, g.clone());
                    }
                    if self.is_tracked(*b) {
                        accumulate(&mut adjoints, *b, g.map(|v| -v));
                    }
                }
                OpKind::Scale(x, factor) => {
                    let f = *factor;
                    accumulate(&mut adjoints, *x, g.map(|v| v * f));
                }
                OpKind::Square(x) => {
                    let gx = g.zip_map(self.value(*x), |gv, xv| 2.0 * gv * xv)?;
                    accumulate(&mut adjoints, *x, gx);
                }
                OpKind::Sum(x) => {
                    let shape = self.value(*x).shape();
                    accumulate(&mut adjoints, *x, Tensor::filled(shape, g.item()));
                }
            }
        }
        Ok(grads)
    }
}

fn accumulate(adjoints: &mut [Option<Tensor>], var: Var, g: Tensor) {
    match &mut adjoints[var.0] {
        Some(existing) => {
            for (e, v) in existing.data_mut().iter_mut().zip(g.data()) {
                *e += v;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

fn split_concat(tape: &Tape, parts: &[Var], axis: usize, g: &Tensor) -> Vec<Tensor> {
    let shapes: Vec<&[usize]> = parts.iter().map(|&p| tape.value(p).shape()).collect();
    if shapes[0].len() == 1 || axis == 0 {
        let mut offset = 0;
        return shapes
            .iter()
            .map(|s| {
                let n: usize = s.iter().product();
                let t = Tensor::from_parts(s.to_vec(), g.data()[offset..offset + n].to_vec());
                offset += n;
                t
            })
            .collect();
    }
    let rows = shapes[0][0];
    let total = g.cols();
    let mut out: Vec<Vec<f64>> = shapes.iter().map(|s| Vec::with_capacity(s[0] * s[1])).collect();
    for i in 0..rows {
        let row = &g.data()[i * total..(i + 1) * total];
        let mut offset = 0;
        for (buf, s) in out.iter_mut().zip(&shapes) {
            buf.extend_from_slice(&row[offset..offset + s[1]]);
            offset += s[1];
        }
    }
    out.into_iter()
        .zip(shapes)
        .map(|(d, s)| Tensor::from_parts(s.to_vec(), d))
        .collect()
}
