//! Named parameter sets and the dense / GRU building blocks.
//!
//! Parameters live outside any graph in a [`ParamSet`] (a sorted map, so
//! serialization and iteration order are deterministic). Each training step
//! binds them into a fresh [`Graph`] as leaves, builds the loss, runs
//! backward, and hands the harvested gradients to the optimizer.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::graph::{Gradients, Graph, Var};
use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};

/// All learnable tensors of a model, keyed by dotted names
/// (`"encoder.l1.w"`). Ordering is lexicographic and stable.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamSet {
    params: BTreeMap<String, Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<()> {
        if self.params.contains_key(name) {
            return Err(Error::Contract(format!("duplicate parameter `{name}`")));
        }
        self.params.insert(name.to_string(), value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.params
            .get(name)
            .ok_or_else(|| Error::Contract(format!("unknown parameter `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.params
            .get_mut(name)
            .ok_or_else(|| Error::Contract(format!("unknown parameter `{name}`")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn n_values(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    pub fn has_nan(&self) -> bool {
        self.params.values().any(Tensor::has_nan)
    }

    /// Dense layer: weight `{prefix}.w` (in x out, uniform Glorot init) and
    /// bias `{prefix}.b` (1 x out, zeros).
    pub fn register_dense<R: Rng>(
        &mut self,
        prefix: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Result<()> {
        self.insert(&format!("{prefix}.w"), Tensor::glorot(fan_in, fan_out, rng))?;
        self.insert(&format!("{prefix}.b"), Tensor::zeros(1, fan_out))
    }

    /// GRU cell: reset/update/candidate gates, each with an input weight
    /// (in x hidden), a recurrent weight (hidden x hidden), and a zero
    /// bias (1 x hidden).
    pub fn register_gru<R: Rng>(
        &mut self,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<()> {
        for gate in ["r", "z", "n"] {
            self.insert(
                &format!("{prefix}.w_{gate}"),
                Tensor::glorot(input, hidden, rng),
            )?;
            self.insert(
                &format!("{prefix}.u_{gate}"),
                Tensor::glorot(hidden, hidden, rng),
            )?;
            self.insert(&format!("{prefix}.b_{gate}"), Tensor::zeros(1, hidden))?;
        }
        Ok(())
    }

    /// Insert every parameter into `graph` as a leaf; the returned binding
    /// maps names to graph handles for this pass.
    pub fn bind(&self, graph: &mut Graph) -> BoundParams {
        let vars = self
            .params
            .iter()
            .map(|(k, v)| (k.clone(), graph.leaf(v.clone())))
            .collect();
        BoundParams { vars }
    }
}

/// Graph handles of one forward pass, keyed by parameter name.
pub struct BoundParams {
    vars: BTreeMap<String, Var>,
}

impl BoundParams {
    pub fn var(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::Contract(format!("unbound parameter `{name}`")))
    }

    /// Collect this pass's gradient for every bound parameter.
    pub fn harvest(&self, grads: &Gradients) -> BTreeMap<String, Tensor> {
        self.vars
            .iter()
            .map(|(k, v)| (k.clone(), grads.get(*v).clone()))
            .collect()
    }
}

/// `x W + b` for a registered dense layer.
pub fn dense(graph: &mut Graph, bound: &BoundParams, prefix: &str, x: Var) -> Result<Var> {
    let w = bound.var(&format!("{prefix}.w"))?;
    let b = bound.var(&format!("{prefix}.b"))?;
    let xw = graph.matmul(x, w)?;
    graph.add_bias(xw, b)
}

/// One GRU step.
///
/// r = sigmoid(x W_r + h U_r + b_r)
/// z = sigmoid(x W_z + h U_z + b_z)
/// n = tanh(x W_n + r .* (h U_n) + b_n)
/// h' = (1 - z) .* n + z .* h
pub fn gru_step(
    graph: &mut Graph,
    bound: &BoundParams,
    prefix: &str,
    x: Var,
    h: Var,
) -> Result<Var> {
    let gate = |name: &str| -> Result<(Var, Var, Var)> {
        Ok((
            bound.var(&format!("{prefix}.w_{name}"))?,
            bound.var(&format!("{prefix}.u_{name}"))?,
            bound.var(&format!("{prefix}.b_{name}"))?,
        ))
    };

    let (w_r, u_r, b_r) = gate("r")?;
    let xr = graph.matmul(x, w_r)?;
    let hr = graph.matmul(h, u_r)?;
    let sr = graph.add(xr, hr)?;
    let sr = graph.add_bias(sr, b_r)?;
    let r = graph.sigmoid(sr);

    let (w_z, u_z, b_z) = gate("z")?;
    let xz = graph.matmul(x, w_z)?;
    let hz = graph.matmul(h, u_z)?;
    let sz = graph.add(xz, hz)?;
    let sz = graph.add_bias(sz, b_z)?;
    let z = graph.sigmoid(sz);

    let (w_n, u_n, b_n) = gate("n")?;
    let xn = graph.matmul(x, w_n)?;
    let hn = graph.matmul(h, u_n)?;
    let rhn = graph.mul(r, hn)?;
    let sn = graph.add(xn, rhn)?;
    let sn = graph.add_bias(sn, b_n)?;
    let n = graph.tanh(sn);

    let omz = graph.one_minus(z);
    let a = graph.mul(omz, n)?;
    let b = graph.mul(z, h)?;
    graph.add(a, b)
}

/// Run a GRU over a sequence of [B, input] steps from a zero initial
/// state; returns the hidden state after every step.
pub fn gru_sequence(
    graph: &mut Graph,
    bound: &BoundParams,
    prefix: &str,
    steps: &[Var],
    hidden: usize,
) -> Result<Vec<Var>> {
    if steps.is_empty() {
        return Err(Error::Contract("empty input sequence".into()));
    }
    let batch = graph.value(steps[0]).rows;
    let mut h = graph.leaf(Tensor::zeros(batch, hidden));
    let mut out = Vec::with_capacity(steps.len());
    for &x in steps {
        h = gru_step(graph, bound, prefix, x, h)?;
        out.push(h);
    }
    Ok(out)
}
