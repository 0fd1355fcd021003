//! A small reverse-mode differentiation tape.
//!
//! Nodes hold vector values (scalars are length-1 vectors) and are computed
//! eagerly; `backward` walks the tape in reverse and accumulates gradients.
//! The primitive set is exactly what the encoder and the losses need: dense
//! affine maps, tanh, concatenation, squared distance, a stability-shifted
//! softmax, weighted sums, and scalar arithmetic with log and clamping.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// y = W x + b, W row-major `rows x cols`.
    Affine {
        w: NodeId,
        b: NodeId,
        x: NodeId,
        rows: usize,
        cols: usize,
    },
    Tanh {
        x: NodeId,
    },
    Concat {
        a: NodeId,
        b: NodeId,
    },
    /// Scalar ||a - b||^2.
    SqDist {
        a: NodeId,
        b: NodeId,
    },
    /// Shifted softmax over the input vector.
    Softmax {
        x: NodeId,
    },
    /// Pack scalar nodes into one vector.
    Stack {
        xs: Vec<NodeId>,
    },
    /// sum_j weights[j] * items[j], items all the same dimension.
    WeightedSum {
        weights: NodeId,
        items: Vec<NodeId>,
    },
    /// Scalar dot(x, c) with a constant vector.
    DotConst {
        x: NodeId,
        c: Vec<f64>,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    Mul {
        a: NodeId,
        b: NodeId,
    },
    Div {
        a: NodeId,
        b: NodeId,
    },
    Scale {
        x: NodeId,
        c: f64,
    },
    AddConst {
        x: NodeId,
    },
    Log {
        x: NodeId,
    },
    ClampMin {
        x: NodeId,
        min: f64,
    },
    /// Arithmetic mean of scalar nodes.
    Mean {
        xs: Vec<NodeId>,
    },
}

struct Node {
    value: Vec<f64>,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        debug_assert_eq!(self.nodes[id.0].value.len(), 1);
        self.nodes[id.0].value[0]
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Vec<f64>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn scalar_leaf(&mut self, value: f64) -> NodeId {
        self.leaf(vec![value])
    }

    pub fn affine(&mut self, w: NodeId, b: NodeId, x: NodeId) -> NodeId {
        let cols = self.nodes[x.0].value.len();
        let rows = self.nodes[b.0].value.len();
        assert_eq!(self.nodes[w.0].value.len(), rows * cols, "weight shape mismatch");
        let mut y = self.nodes[b.0].value.clone();
        for r in 0..rows {
            let wrow = &self.nodes[w.0].value[r * cols..(r + 1) * cols];
            let mut acc = 0.0;
            for (wv, xv) in wrow.iter().zip(&self.nodes[x.0].value) {
                acc += wv * xv;
            }
            y[r] += acc;
        }
        self.push(y, Op::Affine { w, b, x, rows, cols })
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let y = self.nodes[x.0].value.iter().map(|v| v.tanh()).collect();
        self.push(y, Op::Tanh { x })
    }

    pub fn concat(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let mut y = self.nodes[a.0].value.clone();
        y.extend_from_slice(&self.nodes[b.0].value);
        self.push(y, Op::Concat { a, b })
    }

    pub fn sq_dist(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.nodes[a.0].value.len(), self.nodes[b.0].value.len());
        let d: f64 = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        self.push(vec![d], Op::SqDist { a, b })
    }

    pub fn softmax(&mut self, x: NodeId) -> NodeId {
        let xs = &self.nodes[x.0].value;
        let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = xs.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = exps.iter().sum();
        let y = exps.iter().map(|e| e / s).collect();
        self.push(y, Op::Softmax { x })
    }

    pub fn stack(&mut self, xs: Vec<NodeId>) -> NodeId {
        let y: Vec<f64> = xs.iter().map(|id| self.scalar(*id)).collect();
        self.push(y, Op::Stack { xs })
    }

    pub fn weighted_sum(&mut self, weights: NodeId, items: Vec<NodeId>) -> NodeId {
        let w = &self.nodes[weights.0].value;
        assert_eq!(w.len(), items.len());
        let dim = self.nodes[items[0].0].value.len();
        let mut y = vec![0.0; dim];
        for (wi, it) in w.iter().zip(&items) {
            for (yv, iv) in y.iter_mut().zip(&self.nodes[it.0].value) {
                *yv += wi * iv;
            }
        }
        self.push(y, Op::WeightedSum { weights, items })
    }

    pub fn dot_const(&mut self, x: NodeId, c: Vec<f64>) -> NodeId {
        assert_eq!(self.nodes[x.0].value.len(), c.len());
        let d: f64 = self.nodes[x.0].value.iter().zip(&c).map(|(a, b)| a * b).sum();
        self.push(vec![d], Op::DotConst { x, c })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let y = vec![self.scalar(a) + self.scalar(b)];
        self.push(y, Op::Add { a, b })
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let y = vec![self.scalar(a) * self.scalar(b)];
        self.push(y, Op::Mul { a, b })
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let y = vec![self.scalar(a) / self.scalar(b)];
        self.push(y, Op::Div { a, b })
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let y = self.nodes[x.0].value.iter().map(|v| v * c).collect();
        self.push(y, Op::Scale { x, c })
    }

    pub fn add_const(&mut self, x: NodeId, c: f64) -> NodeId {
        let y = self.nodes[x.0].value.iter().map(|v| v + c).collect();
        self.push(y, Op::AddConst { x })
    }

    pub fn log(&mut self, x: NodeId) -> NodeId {
        let y = vec![self.scalar(x).ln()];
        self.push(y, Op::Log { x })
    }

    pub fn clamp_min(&mut self, x: NodeId, min: f64) -> NodeId {
        let y = vec![self.scalar(x).max(min)];
        self.push(y, Op::ClampMin { x, min })
    }

    pub fn mean(&mut self, xs: Vec<NodeId>) -> NodeId {
        assert!(!xs.is_empty());
        let s: f64 = xs.iter().map(|id| self.scalar(*id)).sum();
        let y = vec![s / xs.len() as f64];
        self.push(y, Op::Mean { xs })
    }

    /// Reverse pass from a scalar root. Returns one gradient vector per node.
    pub fn backward(&self, root: NodeId) -> Result<Gradients> {
        let root_val = self.scalar(root);
        if !root_val.is_finite() {
            return Err(Error::Numerical(format!("non-finite loss {root_val}")));
        }
        let mut grads: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .map(|n| vec![0.0; n.value.len()])
            .collect();
        grads[root.0][0] = 1.0;
        for idx in (0..=root.0).rev() {
            let g = grads[idx].clone();
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            match &self.nodes[idx].op {
                Op::Leaf => {}
                Op::Affine { w, b, x, rows, cols } => {
                    let xv = self.nodes[x.0].value.clone();
                    let wv = self.nodes[w.0].value.clone();
                    for r in 0..*rows {
                        let gr = g[r];
                        grads[b.0][r] += gr;
                        for c in 0..*cols {
                            grads[w.0][r * cols + c] += gr * xv[c];
                            grads[x.0][c] += gr * wv[r * cols + c];
                        }
                    }
                }
                Op::Tanh { x } => {
                    let yv = self.nodes[idx].value.clone();
                    for (i, gy) in g.iter().enumerate() {
                        grads[x.0][i] += gy * (1.0 - yv[i] * yv[i]);
                    }
                }
                Op::Concat { a, b } => {
                    let na = self.nodes[a.0].value.len();
                    for i in 0..na {
                        grads[a.0][i] += g[i];
                    }
                    for i in na..g.len() {
                        grads[b.0][i - na] += g[i];
                    }
                }
                Op::SqDist { a, b } => {
                    let gy = g[0];
                    let av = self.nodes[a.0].value.clone();
                    let bv = self.nodes[b.0].value.clone();
                    for i in 0..av.len() {
                        let d = 2.0 * (av[i] - bv[i]) * gy;
                        grads[a.0][i] += d;
                        grads[b.0][i] -= d;
                    }
                }
                Op::Softmax { x } => {
                    let yv = self.nodes[idx].value.clone();
                    let dot: f64 = g.iter().zip(&yv).map(|(gi, yi)| gi * yi).sum();
                    for i in 0..yv.len() {
                        grads[x.0][i] += yv[i] * (g[i] - dot);
                    }
                }
                Op::Stack { xs } => {
                    for (i, id) in xs.iter().enumerate() {
                        grads[id.0][0] += g[i];
                    }
                }
                Op::WeightedSum { weights, items } => {
                    let wv = self.nodes[weights.0].value.clone();
                    for (j, it) in items.iter().enumerate() {
                        let iv = self.nodes[it.0].value.clone();
                        let mut acc = 0.0;
                        for (i, gi) in g.iter().enumerate() {
                            grads[it.0][i] += wv[j] * gi;
                            acc += gi * iv[i];
                        }
                        grads[weights.0][j] += acc;
                    }
                }
                Op::DotConst { x, c } => {
                    let gy = g[0];
                    for (i, ci) in c.iter().enumerate() {
                        grads[x.0][i] += gy * ci;
                    }
                }
                Op::Add { a, b } => {
                    grads[a.0][0] += g[0];
                    grads[b.0][0] += g[0];
                }
                Op::Mul { a, b } => {
                    let (av, bv) = (self.scalar(*a), self.scalar(*b));
                    grads[a.0][0] += g[0] * bv;
                    grads[b.0][0] += g[0] * av;
                }
                Op::Div { a, b } => {
                    let (av, bv) = (self.scalar(*a), self.scalar(*b));
                    grads[a.0][0] += g[0] / bv;
                    grads[b.0][0] -= g[0] * av / (bv * bv);
                }
                Op::Scale { x, c } => {
                    for (i, gi) in g.iter().enumerate() {
                        grads[x.0][i] += gi * c;
                    }
                }
                Op::AddConst { x } => {
                    for (i, gi) in g.iter().enumerate() {
                        grads[x.0][i] += gi;
                    }
                }
                Op::Log { x } => {
                    grads[x.0][0] += g[0] / self.scalar(*x);
                }
                Op::ClampMin { x, min } => {
                    if self.scalar(*x) > *min {
                        grads[x.0][0] += g[0];
                    }
                }
                Op::Mean { xs } => {
                    let n = xs.len() as f64;
                    for id in xs {
                        grads[id.0][0] += g[0] / n;
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }
}

pub struct Gradients {
    grads: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> &[f64] {
        &self.grads[id.0]
    }
}
