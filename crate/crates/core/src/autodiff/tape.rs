use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kernels::{self, ConvGeometry};
use super::params::{ParamId, ParameterSet};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Relu,
    Tanh,
    Sigmoid,
}

impl ActivationKind {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            ActivationKind::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Tanh => 1.0 - y * y,
            ActivationKind::Sigmoid => y * (1.0 - y),
        }
    }
}

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

enum Op {
    Constant,
    Param(ParamId),
    Conv2d {
        input: Var,
        weight: Var,
        bias: Var,
        geometry: ConvGeometry,
    },
    MaxPool2d {
        input: Var,
        argmax: Vec<usize>,
    },
    Dense {
        input: Var,
        weight: Var,
        bias: Var,
    },
    Activation {
        input: Var,
        kind: ActivationKind,
    },
    Dropout {
        input: Var,
        mask: Vec<f64>,
    },
    Scale {
        input: Var,
        factor: f64,
    },
    Reshape {
        input: Var,
    },
    BceWithLogits {
        logits: Var,
        labels: Vec<f64>,
    },
    WeightedSum {
        input: Var,
        weights: Vec<f64>,
    },
    RowMap {
        input: Var,
        shared: Option<Var>,
        jacobians: Option<Vec<f64>>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Records one forward pass for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so walking the node list
/// backwards is a reverse topological traversal. A tape supports exactly
/// one backward pass; build a new tape for each forward.
pub struct Tape {
    nodes: Vec<Node>,
    param_count: Option<usize>,
    consumed: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            param_count: None,
            consumed: false,
        }
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool, name: &str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name.to_string()));
        }
        self.nodes.push(Node { value, op, needs_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Constant,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a parameter leaf. All parameters on one tape must come from
    /// the same [`ParameterSet`], the one later passed to [`Tape::backward`].
    pub fn param(&mut self, params: &ParameterSet, id: ParamId) -> Var {
        self.param_count.get_or_insert(params.len());
        let p = params.get(id);
        self.nodes.push(Node {
            value: p.value.clone(),
            op: Op::Param(id),
            needs_grad: p.requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Valid-padding 2-D cross-correlation.
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var, stride: usize) -> Result<Var> {
        let xs = self.value(input).shape().to_vec();
        let ws = self.value(weight).shape().to_vec();
        let bs = self.value(bias).shape().to_vec();
        if xs.len() != 4 || ws.len() != 4 || xs[1] != ws[1] || bs != [ws[0]] {
            return Err(Error::Dimension(format!(
                "conv2d: input {xs:?} incompatible with weight {ws:?} and bias {bs:?}"
            )));
        }
        if stride == 0 {
            return Err(Error::Parameter("conv2d: stride must be positive".into()));
        }
        if xs[2] < ws[2] || xs[3] < ws[3] {
            return Err(Error::Dimension(format!(
                "conv2d: kernel {ws:?} larger than input {xs:?}"
            )));
        }
        let geometry = ConvGeometry {
            n: xs[0],
            c_in: xs[1],
            h: xs[2],
            w: xs[3],
            c_out: ws[0],
            kh: ws[2],
            kw: ws[3],
            stride,
        };
        let out = kernels::conv2d_forward(
            &geometry,
            self.value(input).data(),
            self.value(weight).data(),
            self.value(bias).data(),
        );
        let shape = vec![geometry.n, geometry.c_out, geometry.out_h(), geometry.out_w()];
        let needs = self.needs(input) || self.needs(weight) || self.needs(bias);
        self.push(
            Tensor::new(shape, out)?,
            Op::Conv2d {
                input,
                weight,
                bias,
                geometry,
            },
            needs,
            "conv2d",
        )
    }

    pub fn maxpool2d(&mut self, input: Var, kernel: usize, stride: usize) -> Result<Var> {
        let xs = self.value(input).shape().to_vec();
        if kernel == 0 || stride == 0 {
            return Err(Error::Parameter("maxpool2d: kernel and stride must be positive".into()));
        }
        if xs.len() != 4 || xs[2] < kernel || xs[3] < kernel {
            return Err(Error::Dimension(format!(
                "maxpool2d: kernel {kernel} does not fit input {xs:?}"
            )));
        }
        let (out, argmax) =
            kernels::maxpool_forward(self.value(input).data(), xs[0] * xs[1], xs[2], xs[3], kernel, stride);
        let shape = vec![
            xs[0],
            xs[1],
            (xs[2] - kernel) / stride + 1,
            (xs[3] - kernel) / stride + 1,
        ];
        let needs = self.needs(input);
        self.push(
            Tensor::new(shape, out)?,
            Op::MaxPool2d { input, argmax },
            needs,
            "maxpool2d",
        )
    }

    /// Affine map `input · weight + bias` with input `[N, D]`, weight `[D, U]`.
    pub fn dense(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let xs = self.value(input).shape().to_vec();
        let ws = self.value(weight).shape().to_vec();
        let bs = self.value(bias).shape().to_vec();
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[0] || bs != [ws[1]] {
            return Err(Error::Dimension(format!(
                "dense: input {xs:?} incompatible with weight {ws:?} and bias {bs:?}"
            )));
        }
        let out = kernels::dense_forward(
            self.value(input).data(),
            xs[0],
            xs[1],
            self.value(weight).data(),
            ws[1],
            self.value(bias).data(),
        );
        let needs = self.needs(input) || self.needs(weight) || self.needs(bias);
        self.push(
            Tensor::new(vec![xs[0], ws[1]], out)?,
            Op::Dense { input, weight, bias },
            needs,
            "dense",
        )
    }

    pub fn activation(&mut self, input: Var, kind: ActivationKind) -> Result<Var> {
        let x = self.value(input);
        let data = x.data().iter().map(|&v| kind.apply(v)).collect();
        let value = Tensor::new(x.shape().to_vec(), data)?;
        let needs = self.needs(input);
        self.push(value, Op::Activation { input, kind }, needs, "activation")
    }

    /// Inverted dropout: survivors are scaled by `1/(1-p)` during training,
    /// inference is the identity.
    pub fn dropout<R: Rng + ?Sized>(&mut self, input: Var, p: f64, training: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Parameter(format!("dropout probability {p} outside [0, 1)")));
        }
        let x = self.value(input);
        let mask: Vec<f64> = if training && p > 0.0 {
            let keep = 1.0 / (1.0 - p);
            (0..x.len())
                .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
                .collect()
        } else {
            vec![1.0; x.len()]
        };
        let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Tensor::new(x.shape().to_vec(), data)?;
        let needs = self.needs(input);
        self.push(value, Op::Dropout { input, mask }, needs, "dropout")
    }

    pub fn scale(&mut self, input: Var, factor: f64) -> Result<Var> {
        let x = self.value(input);
        let data = x.data().iter().map(|v| v * factor).collect();
        let value = Tensor::new(x.shape().to_vec(), data)?;
        let needs = self.needs(input);
        self.push(value, Op::Scale { input, factor }, needs, "scale")
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(input).clone().reshape(shape)?;
        let needs = self.needs(input);
        self.push(value, Op::Reshape { input }, needs, "reshape")
    }

    /// Flattens `[N, ...]` to `[N, rest]`.
    pub fn flatten(&mut self, input: Var) -> Result<Var> {
        let shape = self.value(input).shape();
        let n = shape[0];
        let rest = shape[1..].iter().product();
        self.reshape(input, &[n, rest])
    }

    /// Mean binary cross-entropy of raw logits against `{0, 1}` labels, in
    /// the `max(l,0) - l·y + ln(1 + e^{-|l|})` form.
    pub fn bce_with_logits(&mut self, logits: Var, labels: &[f64]) -> Result<Var> {
        let l = self.value(logits);
        if l.len() != labels.len() || l.shape()[0] != labels.len() {
            return Err(Error::Dimension(format!(
                "bce: logits {:?} vs {} labels",
                l.shape(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
            return Err(Error::Validation(format!("bce: non-binary label {bad}")));
        }
        let n = labels.len() as f64;
        let loss: f64 = l
            .data()
            .iter()
            .zip(labels)
            .map(|(&x, &y)| x.max(0.0) - x * y + (-x.abs()).exp().ln_1p())
            .sum::<f64>()
            / n;
        let needs = self.needs(logits);
        self.push(
            Tensor::scalar(loss),
            Op::BceWithLogits {
                logits,
                labels: labels.to_vec(),
            },
            needs,
            "bce_with_logits",
        )
    }

    /// Scalar `Σ weights_i · input_i`.
    pub fn weighted_sum(&mut self, input: Var, weights: &[f64]) -> Result<Var> {
        let x = self.value(input);
        if x.len() != weights.len() {
            return Err(Error::Dimension(format!(
                "weighted_sum: {} values vs {} weights",
                x.len(),
                weights.len()
            )));
        }
        let s = x.data().iter().zip(weights).map(|(a, b)| a * b).sum();
        let needs = self.needs(input);
        self.push(
            Tensor::scalar(s),
            Op::WeightedSum {
                input,
                weights: weights.to_vec(),
            },
            needs,
            "weighted_sum",
        )
    }

    pub fn sum(&mut self, input: Var) -> Result<Var> {
        let ones = vec![1.0; self.value(input).len()];
        self.weighted_sum(input, &ones)
    }

    /// Records a row-wise map whose derivatives are supplied externally.
    ///
    /// `input` is `[N, a]`, `shared` (if any) is a flat vector of length `s`
    /// used by every row, and `output` is `[N, m]`. `jacobians` holds, per
    /// row, an `m × (a + s)` row-major Jacobian of that row's outputs with
    /// respect to `[input row, shared]`. It may be `None` only when no
    /// gradient can flow through the map.
    pub fn row_map(
        &mut self,
        input: Var,
        shared: Option<Var>,
        output: Tensor,
        jacobians: Option<Vec<f64>>,
    ) -> Result<Var> {
        let xs = self.value(input).shape().to_vec();
        let os = output.shape().to_vec();
        if xs.len() != 2 || os.len() != 2 || xs[0] != os[0] {
            return Err(Error::Dimension(format!("row_map: input {xs:?} vs output {os:?}")));
        }
        let s = shared.map_or(0, |v| self.value(v).len());
        let needs = self.needs(input) || shared.is_some_and(|v| self.needs(v));
        match &jacobians {
            Some(j) if j.len() != os[0] * os[1] * (xs[1] + s) => {
                return Err(Error::Dimension(format!(
                    "row_map: jacobian length {} does not match {} rows of {}x{}",
                    j.len(),
                    os[0],
                    os[1],
                    xs[1] + s
                )));
            }
            None if needs => {
                return Err(Error::State(
                    "row_map: jacobians required when inputs need gradients".into(),
                ));
            }
            _ => {}
        }
        self.push(
            output,
            Op::RowMap {
                input,
                shared,
                jacobians,
            },
            needs,
            "row_map",
        )
    }

    /// Reverse sweep from a scalar `loss`, writing `d loss / d p` into every
    /// trainable parameter of `params`. Parameters that did not take part in
    /// the forward pass receive zero gradients.
    pub fn backward(&mut self, loss: Var, params: &mut ParameterSet) -> Result<()> {
        if self.consumed {
            return Err(Error::State(
                "backward already ran on this tape; run a new forward pass first".into(),
            ));
        }
        if loss.0 >= self.nodes.len() {
            return Err(Error::State("loss does not belong to this tape".into()));
        }
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::Dimension(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        if let Some(count) = self.param_count {
            if count != params.len() {
                return Err(Error::State(
                    "backward called with a different parameter set than the forward".into(),
                ));
            }
        }
        self.consumed = true;
        params.zero_grad();

        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("backward pass".into()));
            }
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => params.accumulate_grad(*id, &g),
                Op::Conv2d {
                    input,
                    weight,
                    bias,
                    geometry,
                } => {
                    let need_input = self.needs(*input);
                    let cg = kernels::conv2d_backward(
                        geometry,
                        self.value(*input).data(),
                        self.value(*weight).data(),
                        &g,
                        need_input,
                    );
                    if let Some(dx) = cg.input {
                        accumulate(&mut grads, *input, dx);
                    }
                    self.send(&mut grads, *weight, cg.weight);
                    self.send(&mut grads, *bias, cg.bias);
                }
                Op::MaxPool2d { input, argmax } => {
                    let mut dx = vec![0.0; self.value(*input).len()];
                    for (gv, &src) in g.iter().zip(argmax) {
                        dx[src] += gv;
                    }
                    accumulate(&mut grads, *input, dx);
                }
                Op::Dense { input, weight, bias } => {
                    let xs = self.value(*input).shape();
                    let u = self.value(*weight).shape()[1];
                    let (dx, dw, db) = kernels::dense_backward(
                        self.value(*input).data(),
                        xs[0],
                        xs[1],
                        self.value(*weight).data(),
                        u,
                        &g,
                        self.needs(*input),
                    );
                    if let Some(dx) = dx {
                        accumulate(&mut grads, *input, dx);
                    }
                    self.send(&mut grads, *weight, dw);
                    self.send(&mut grads, *bias, db);
                }
                Op::Activation { input, kind } => {
                    let x = self.value(*input).data();
                    let y = node.value.data();
                    let dx = g
                        .iter()
                        .zip(x.iter().zip(y))
                        .map(|(gv, (&xv, &yv))| gv * kind.derivative(xv, yv))
                        .collect();
                    accumulate(&mut grads, *input, dx);
                }
                Op::Dropout { input, mask } => {
                    let dx = g.iter().zip(mask).map(|(a, b)| a * b).collect();
                    accumulate(&mut grads, *input, dx);
                }
                Op::Scale { input, factor } => {
                    let dx = g.iter().map(|v| v * factor).collect();
                    accumulate(&mut grads, *input, dx);
                }
                Op::Reshape { input } => accumulate(&mut grads, *input, g),
                Op::BceWithLogits { logits, labels } => {
                    let n = labels.len() as f64;
                    let dx = self
                        .value(*logits)
                        .data()
                        .iter()
                        .zip(labels)
                        .map(|(&l, &y)| g[0] * (sigmoid(l) - y) / n)
                        .collect();
                    accumulate(&mut grads, *logits, dx);
                }
                Op::WeightedSum { input, weights } => {
                    let dx = weights.iter().map(|w| w * g[0]).collect();
                    accumulate(&mut grads, *input, dx);
                }
                Op::RowMap {
                    input,
                    shared,
                    jacobians,
                } => {
                    let jac = jacobians
                        .as_ref()
                        .ok_or_else(|| Error::State("row_map recorded without jacobians".into()))?;
                    let xs = self.value(*input).shape();
                    let (rows, a) = (xs[0], xs[1]);
                    let m = node.value.shape()[1];
                    let s = shared.map_or(0, |v| self.value(v).len());
                    let width = a + s;
                    let mut dx = vec![0.0; rows * a];
                    let mut ds = vec![0.0; s];
                    for r in 0..rows {
                        let j_r = &jac[r * m * width..(r + 1) * m * width];
                        for k in 0..m {
                            let gk = g[r * m + k];
                            if gk == 0.0 {
                                continue;
                            }
                            let j_rk = &j_r[k * width..(k + 1) * width];
                            for (d, jv) in dx[r * a..(r + 1) * a].iter_mut().zip(&j_rk[..a]) {
                                *d += gk * jv;
                            }
                            for (d, jv) in ds.iter_mut().zip(&j_rk[a..]) {
                                *d += gk * jv;
                            }
                        }
                    }
                    self.send(&mut grads, *input, dx);
                    if let Some(sv) = shared {
                        self.send(&mut grads, *sv, ds);
                    }
                }
            }
        }
        for p in params.iter() {
            if let Some(g) = &p.grad {
                if !g.is_finite() {
                    return Err(Error::NonFinite(format!("gradient of {}", p.name)));
                }
            }
        }
        Ok(())
    }

    fn send(&self, grads: &mut [Option<Vec<f64>>], to: Var, g: Vec<f64>) {
        if self.needs(to) {
            accumulate(grads, to, g);
        }
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], to: Var, g: Vec<f64>) {
    match &mut grads[to.0] {
        Some(existing) => existing.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
        slot @ None => *slot = Some(g),
    }
}
