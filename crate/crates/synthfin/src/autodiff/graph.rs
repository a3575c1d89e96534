//! Reverse-mode automatic differentiation on an arena tape.
//!
//! A [`Graph`] owns every intermediate tensor of one forward pass. Each
//! operation validates shapes, computes its value eagerly, and records
//! itself on the tape; [`Graph::backward`] replays the tape in reverse,
//! accumulating gradients for every node, and consumes the recorded ops so
//! a graph differentiates exactly once.

use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`]. Only valid for the graph that made it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    MatMul(usize, usize),
    Add(usize, usize),
    /// Broadcast-add a 1 x n bias over every row of an m x n matrix.
    AddBias(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddConst(usize),
    OneMinus(usize),
    Sigmoid(usize),
    Tanh(usize),
    Exp(usize),
    Sqrt(usize),
    Abs(usize),
    Square(usize),
    MeanAll(usize),
    ConcatCols(Vec<usize>),
    SliceCols {
        src: usize,
        start: usize,
        len: usize,
    },
    Mse(usize, usize),
    BceWithLogits {
        logits: usize,
        targets: Tensor,
    },
}

/// Gradients of one backward pass, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> &Tensor {
        &self.grads[v.0]
    }
}

/// Arena holding one forward pass and its tape.
pub struct Graph {
    values: Vec<Tensor>,
    ops: Vec<(Op, usize)>,
    consumed: bool,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self {
            values: Vec::new(),
            ops: Vec::new(),
            consumed: false,
        }
    }

    /// Insert a leaf node (parameter or input). Leaves receive gradients
    /// but have nothing to backpropagate into.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.values.push(value);
        Var(self.values.len() - 1)
    }

    /// Forward value of a node.
    pub fn value(&self, v: Var) -> &Tensor {
        &self.values[v.0]
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.values.push(value);
        let out = self.values.len() - 1;
        self.ops.push((op, out));
        Var(out)
    }

    fn shapes(&self, a: Var, b: Var, op: &'static str) -> Error {
        Error::ShapeMismatch {
            op,
            lhs: self.values[a.0].shape(),
            rhs: self.values[b.0].shape(),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.values[a.0].matmul(&self.values[b.0])?;
        Ok(self.push(Op::MatMul(a.0, b.0), v))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if !self.values[a.0].same_shape(&self.values[b.0]) {
            return Err(self.shapes(a, b, "add"));
        }
        let v = Tensor {
            rows: self.values[a.0].rows,
            cols: self.values[a.0].cols,
            data: self.values[a.0]
                .data
                .iter()
                .zip(&self.values[b.0].data)
                .map(|(x, y)| x + y)
                .collect(),
        };
        Ok(self.push(Op::Add(a.0, b.0), v))
    }

    /// `a + bias` where bias is 1 x n and a is m x n.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (at, bt) = (&self.values[a.0], &self.values[bias.0]);
        if bt.rows != 1 || bt.cols != at.cols {
            return Err(self.shapes(a, bias, "add_bias"));
        }
        let mut v = at.clone();
        for r in 0..v.rows {
            for c in 0..v.cols {
                *v.at_mut(r, c) += bt.data[c];
            }
        }
        Ok(self.push(Op::AddBias(a.0, bias.0), v))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        if !self.values[a.0].same_shape(&self.values[b.0]) {
            return Err(self.shapes(a, b, "sub"));
        }
        let v = Tensor {
            rows: self.values[a.0].rows,
            cols: self.values[a.0].cols,
            data: self.values[a.0]
                .data
                .iter()
                .zip(&self.values[b.0].data)
                .map(|(x, y)| x - y)
                .collect(),
        };
        Ok(self.push(Op::Sub(a.0, b.0), v))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if !self.values[a.0].same_shape(&self.values[b.0]) {
            return Err(self.shapes(a, b, "mul"));
        }
        let v = Tensor {
            rows: self.values[a.0].rows,
            cols: self.values[a.0].cols,
            data: self.values[a.0]
                .data
                .iter()
                .zip(&self.values[b.0].data)
                .map(|(x, y)| x * y)
                .collect(),
        };
        Ok(self.push(Op::Mul(a.0, b.0), v))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.values[a.0].map(|x| c * x);
        self.push(Op::Scale(a.0, c), v)
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let v = self.values[a.0].map(|x| x + c);
        self.push(Op::AddConst(a.0), v)
    }

    /// `1 - a`, elementwise.
    pub fn one_minus(&mut self, a: Var) -> Var {
        let v = self.values[a.0].map(|x| 1.0 - x);
        self.push(Op::OneMinus(a.0), v)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.values[a.0].map(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(Op::Sigmoid(a.0), v)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.values[a.0].map(f64::tanh);
        self.push(Op::Tanh(a.0), v)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.values[a.0].map(f64::exp);
        self.push(Op::Exp(a.0), v)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = self.values[a.0].map(f64::sqrt);
        self.push(Op::Sqrt(a.0), v)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let v = self.values[a.0].map(f64::abs);
        self.push(Op::Abs(a.0), v)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.values[a.0].map(|x| x * x);
        self.push(Op::Square(a.0), v)
    }

    /// Mean over all entries, producing a 1x1 scalar.
    pub fn mean_all(&mut self, a: Var) -> Var {
        let t = &self.values[a.0];
        let v = Tensor::scalar(t.data.iter().sum::<f64>() / t.len() as f64);
        self.push(Op::MeanAll(a.0), v)
    }

    /// Concatenate along columns: [m,c1] ++ [m,c2] ... -> [m, sum(ci)].
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Contract("concat of zero tensors".into()));
        }
        let rows = self.values[parts[0].0].rows;
        if let Some(&bad) = parts.iter().find(|v| self.values[v.0].rows != rows) {
            return Err(self.shapes(parts[0], bad, "concat_cols"));
        }
        let total: usize = parts.iter().map(|v| self.values[v.0].cols).sum();
        let mut out = Tensor::zeros(rows, total);
        let mut at = 0;
        for v in parts {
            let t = &self.values[v.0];
            for r in 0..rows {
                for c in 0..t.cols {
                    *out.at_mut(r, at + c) = t.at(r, c);
                }
            }
            at += t.cols;
        }
        Ok(self.push(Op::ConcatCols(parts.iter().map(|v| v.0).collect()), out))
    }

    /// Columns `[start, start+len)` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let t = &self.values[a.0];
        if len == 0 || start + len > t.cols {
            return Err(Error::Contract(format!(
                "slice [{start}, {}) out of {} columns",
                start + len,
                t.cols
            )));
        }
        let mut out = Tensor::zeros(t.rows, len);
        for r in 0..t.rows {
            for c in 0..len {
                *out.at_mut(r, c) = t.at(r, start + c);
            }
        }
        Ok(self.push(
            Op::SliceCols {
                src: a.0,
                start,
                len,
            },
            out,
        ))
    }

    /// Mean squared error over all entries, 1x1 output.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        if !self.values[a.0].same_shape(&self.values[b.0]) {
            return Err(self.shapes(a, b, "mse"));
        }
        let n = self.values[a.0].len() as f64;
        let s: f64 = self.values[a.0]
            .data
            .iter()
            .zip(&self.values[b.0].data)
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        Ok(self.push(Op::Mse(a.0, b.0), Tensor::scalar(s / n)))
    }

    /// Numerically stable binary cross-entropy on logits against fixed
    /// 0/1 targets, averaged over all entries; 1x1 output.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &Tensor) -> Result<Var> {
        if !self.values[logits.0].same_shape(targets) {
            return Err(Error::ShapeMismatch {
                op: "bce_with_logits",
                lhs: self.values[logits.0].shape(),
                rhs: targets.shape(),
            });
        }
        let n = targets.len() as f64;
        let s: f64 = self.values[logits.0]
            .data
            .iter()
            .zip(&targets.data)
            .map(|(x, t)| x.max(0.0) - x * t + (1.0 + (-x.abs()).exp()).ln())
            .sum();
        Ok(self.push(
            Op::BceWithLogits {
                logits: logits.0,
                targets: targets.clone(),
            },
            Tensor::scalar(s / n),
        ))
    }

    /// Reverse pass from a scalar loss. Consumes the tape: the graph keeps
    /// its forward values but can not run backward again.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::Contract(
                "backward already ran on this graph".into(),
            ));
        }
        let lt = &self.values[loss.0];
        if lt.rows != 1 || lt.cols != 1 {
            return Err(Error::ShapeMismatch {
                op: "backward",
                lhs: lt.shape(),
                rhs: vec![1, 1],
            });
        }
        self.consumed = true;
        let mut grads: Vec<Tensor> = self
            .values
            .iter()
            .map(|v| Tensor::zeros(v.rows, v.cols))
            .collect();
        grads[loss.0].data[0] = 1.0;

        let ops = std::mem::take(&mut self.ops);
        for (op, out) in ops.into_iter().rev() {
            let g = grads[out].clone();
            if g.data.iter().all(|x| *x == 0.0) {
                continue;
            }
            match op {
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(&self.values[b])?;
                    let gb = self.values[a].t_matmul(&g)?;
                    grads[a].add_scaled(&ga, 1.0)?;
                    grads[b].add_scaled(&gb, 1.0)?;
                }
                Op::Add(a, b) => {
                    grads[a].add_scaled(&g, 1.0)?;
                    grads[b].add_scaled(&g, 1.0)?;
                }
                Op::AddBias(a, bias) => {
                    grads[a].add_scaled(&g, 1.0)?;
                    let gb = &mut grads[bias];
                    for r in 0..g.rows {
                        for c in 0..g.cols {
                            gb.data[c] += g.at(r, c);
                        }
                    }
                }
                Op::Sub(a, b) => {
                    grads[a].add_scaled(&g, 1.0)?;
                    grads[b].add_scaled(&g, -1.0)?;
                }
                Op::Mul(a, b) => {
                    let ga = Tensor {
                        rows: g.rows,
                        cols: g.cols,
                        data: g
                            .data
                            .iter()
                            .zip(&self.values[b].data)
                            .map(|(gi, bi)| gi * bi)
                            .collect(),
                    };
                    let gb = Tensor {
                        rows: g.rows,
                        cols: g.cols,
                        data: g
                            .data
                            .iter()
                            .zip(&self.values[a].data)
                            .map(|(gi, ai)| gi * ai)
                            .collect(),
                    };
                    grads[a].add_scaled(&ga, 1.0)?;
                    grads[b].add_scaled(&gb, 1.0)?;
                }
                Op::Scale(a, c) => grads[a].add_scaled(&g, c)?,
                Op::AddConst(a) => grads[a].add_scaled(&g, 1.0)?,
                Op::OneMinus(a) => grads[a].add_scaled(&g, -1.0)?,
                Op::Sigmoid(a) => {
                    // sigma' = y (1 - y), from the stored output.
                    let y = &self.values[out];
                    let ga = Tensor {
                        rows: g.rows,
                        cols: g.cols,
                        data: g
                            .data
                            .iter()
                            .zip(&y.data)
                            .map(|(gi, yi)| gi * yi * (1.0 - yi))
                            .collect(),
                    };
                    grads[a].add_scaled(&ga, 1.0)?;
                }
                Op::Tanh(a) => {
                    let y = &self.values[out];
                    let ga = Tensor {
                        rows: g.rows,
                        cols: g.cols,
                        data: g
                            .data
                            .iter()
                            .zip(&y.data)
                            .map(|(gi, yi)| gi * (1.0 - yi * yi))
                            .collect(),
                    };
                    grads[a].add_scaled(&ga, 1.0)?;
                }
                Op::Exp(a) => {
                    let y = &self.values[out];
                    let ga = Tensor {
                        rows: g.rows,
                        cols: g.cols,
                        data: g.data.iter().zip(&y.data).map(|(gi, yi)| gi * yi).collect(),
                    };
                    grads[a].add_scaled(&ga, 1.0)?;
                }
                Op::Sqrt(a) => {
                    let y = &self.values[out];
                    let ga = Tensor {
                        rows: g.rows,
                        cols: g.cols,
                        data: g
                            .data
                            .iter()
                            .zip(&y.data)
                            .map(|(gi, yi)| gi * 0.5 / yi)
                            .collect(),
                    };
                    grads[a].add_scaled(&ga, 1.0)?;
                }
                Op::Abs(a) => {
                    let x = &self.values[a];
                    let ga = Tensor {
                        rows: g.rows,
                        cols: g.cols,
                        data: g
                            .data
                            .iter()
                            .zip(&x.data)
                            .map(|(gi, xi)| {
                                gi * if *xi > 0.0 {
                                    1.0
                                } else if *xi < 0.0 {
                                    -1.0
                                } else {
                                    0.0
                                }
                            })
                            .collect(),
                    };
                    grads[a].add_scaled(&ga, 1.0)?;
                }
                Op::Square(a) => {
                    let x = &self.values[a];
                    let ga = Tensor {
                        rows: g.rows,
                        cols: g.cols,
                        data: g
                            .data
                            .iter()
                            .zip(&x.data)
                            .map(|(gi, xi)| gi * 2.0 * xi)
                            .collect(),
                    };
                    grads[a].add_scaled(&ga, 1.0)?;
                }
                Op::MeanAll(a) => {
                    let g0 = g.data[0] / self.values[a].len() as f64;
                    let ones = Tensor::full(self.values[a].rows, self.values[a].cols, 1.0);
                    grads[a].add_scaled(&ones, g0)?;
                }
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for p in parts {
                        let cols = self.values[p].cols;
                        let gp = &mut grads[p];
                        for r in 0..g.rows {
                            for c in 0..cols {
                                *gp.at_mut(r, c) += g.at(r, at + c);
                            }
                        }
                        at += cols;
                    }
                }
                Op::SliceCols { src, start, len } => {
                    let gs = &mut grads[src];
                    for r in 0..g.rows {
                        for c in 0..len {
                            *gs.at_mut(r, start + c) += g.at(r, c);
                        }
                    }
                }
                Op::Mse(a, b) => {
                    let g0 = g.data[0];
                    let n = self.values[a].len() as f64;
                    let diff = Tensor {
                        rows: self.values[a].rows,
                        cols: self.values[a].cols,
                        data: self.values[a]
                            .data
                            .iter()
                            .zip(&self.values[b].data)
                            .map(|(x, y)| x - y)
                            .collect(),
                    };
                    grads[a].add_scaled(&diff, 2.0 * g0 / n)?;
                    grads[b].add_scaled(&diff, -2.0 * g0 / n)?;
                }
                Op::BceWithLogits { logits, targets } => {
                    let g0 = g.data[0];
                    let n = targets.len() as f64;
                    let x = &self.values[logits];
                    let ga = Tensor {
                        rows: x.rows,
                        cols: x.cols,
                        data: x
                            .data
                            .iter()
                            .zip(&targets.data)
                            .map(|(xi, ti)| 1.0 / (1.0 + (-xi).exp()) - ti)
                            .collect(),
                    };
                    grads[logits].add_scaled(&ga, g0 / n)?;
                }
            }
        }
        Ok(Gradients { grads })
    }
}
