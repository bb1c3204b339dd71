//! Dressed quantum network: pre-net → `(π/2)·tanh` → angle-embedded
//! variational circuit → Z expectations → post-net logit.

use std::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::autodiff::{init, ActivationKind, ParamId, ParameterSet, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::quantum::{adjoint_jacobian, build_ansatz, Backend, Circuit, Observable};

/// Initial trainable circuit angles are drawn from `U(-THETA_INIT, THETA_INIT)`.
pub const THETA_INIT: f64 = 0.1;

/// Rotation angles for the embedding layer, each within `[-π/2, π/2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingAngles(Vec<f64>);

impl EmbeddingAngles {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// `(π/2)·tanh(x)` elementwise. Non-finite input is rejected.
pub fn scale_embedding(prenet_out: &[f64]) -> Result<EmbeddingAngles> {
    if let Some(bad) = prenet_out.iter().find(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("non-finite pre-net output {bad}")));
    }
    Ok(EmbeddingAngles(
        prenet_out.iter().map(|x| FRAC_PI_2 * x.tanh()).collect(),
    ))
}

#[derive(Clone, Debug)]
pub struct DressedQuantumNet {
    circuit: Circuit,
    reps: usize,
    input_dim: usize,
    params: ParameterSet,
    pre_w: ParamId,
    pre_b: ParamId,
    theta: Option<ParamId>,
    post_w: ParamId,
    post_b: ParamId,
}

impl DressedQuantumNet {
    /// Pre-net `input_dim → n`, the `(n, reps)` ansatz, post-net `n → 1`.
    pub fn new(input_dim: usize, n_qubits: usize, reps: usize, seed: u64) -> Result<Self> {
        let circuit = build_ansatz(n_qubits, reps)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::with_circuit(circuit, reps, input_dim, &mut rng)
    }

    /// Builds a head around an arbitrary circuit whose embedding width equals
    /// its qubit count.
    pub fn with_circuit(circuit: Circuit, reps: usize, input_dim: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let n = circuit.n_qubits();
        if circuit.n_embedding_params() != n {
            return Err(Error::Config(format!(
                "circuit embeds {} angles but has {n} qubits",
                circuit.n_embedding_params()
            )));
        }
        if input_dim == 0 {
            return Err(Error::Config("pre-net input width must be positive".into()));
        }
        let mut params = ParameterSet::new();
        let pre_w = params.register("pre_net.weight", init::glorot_uniform(&[input_dim, n], rng))?;
        let pre_b = params.register("pre_net.bias", Tensor::zeros(&[n]))?;
        let p = circuit.n_trainable_params();
        let theta = if p > 0 {
            Some(params.register("theta", init::uniform(&[p], -THETA_INIT, THETA_INIT, rng))?)
        } else {
            None
        };
        let post_w = params.register("post_net.weight", init::glorot_uniform(&[n, 1], rng))?;
        let post_b = params.register("post_net.bias", Tensor::zeros(&[1]))?;
        Ok(Self {
            circuit,
            reps,
            input_dim,
            params,
            pre_w,
            pre_b,
            theta,
            post_w,
            post_b,
        })
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn n_qubits(&self) -> usize {
        self.circuit.n_qubits()
    }

    pub fn reps(&self) -> usize {
        self.reps
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    pub fn theta_id(&self) -> Option<ParamId> {
        self.theta
    }

    pub fn theta(&self) -> &[f64] {
        self.theta.map_or(&[], |id| self.params.value(id).data())
    }

    pub fn pre_net_ids(&self) -> (ParamId, ParamId) {
        (self.pre_w, self.pre_b)
    }

    pub fn post_net_ids(&self) -> (ParamId, ParamId) {
        (self.post_w, self.post_b)
    }

    fn leaf(&self, tape: &mut Tape, id: ParamId, trainable: bool) -> Var {
        if trainable {
            tape.param(&self.params, id)
        } else {
            tape.constant(self.params.value(id).clone())
        }
    }

    /// Records the head on `tape` for features `[N, input_dim]` and returns
    /// logits `[N, 1]`. With `trainable`, parameters become gradient leaves
    /// and circuit Jacobians are computed with the adjoint method; this
    /// requires the ideal backend.
    pub fn forward(&self, tape: &mut Tape, features: Var, backend: &Backend, trainable: bool) -> Result<Var> {
        let fs = tape.value(features).shape().to_vec();
        if fs.len() != 2 || fs[1] != self.input_dim {
            return Err(Error::Dimension(format!(
                "dressed quantum net expects [N, {}], got {fs:?}",
                self.input_dim
            )));
        }
        if trainable && backend.noise_model().is_some() {
            return Err(Error::Capability(
                "the noisy backend is inference-only; train on the ideal backend".into(),
            ));
        }
        backend.validate()?;
        let pre_w = self.leaf(tape, self.pre_w, trainable);
        let pre_b = self.leaf(tape, self.pre_b, trainable);
        let pre = tape.dense(features, pre_w, pre_b)?;
        let squashed = tape.activation(pre, ActivationKind::Tanh)?;
        let angles = tape.scale(squashed, FRAC_PI_2)?;
        let theta = self.theta.map(|id| self.leaf(tape, id, trainable));

        let n = self.n_qubits();
        let rows = fs[0];
        let angle_data = tape.value(angles).data().to_vec();
        let theta_data = self.theta().to_vec();
        let per_row: Vec<(Vec<f64>, Option<Vec<f64>>)> = (0..rows)
            .into_par_iter()
            .map(|r| {
                let mut p = angle_data[r * n..(r + 1) * n].to_vec();
                p.extend_from_slice(&theta_data);
                if trainable {
                    let jac = adjoint_jacobian(&self.circuit, &p, &Observable::all_z(n))?;
                    Ok((jac.expectations, Some(jac.rows.concat())))
                } else {
                    Ok((backend.expectations(&self.circuit, &p)?, None))
                }
            })
            .collect::<Result<_>>()?;
        let mut exps = Vec::with_capacity(rows * n);
        let mut jacs = trainable.then(Vec::new);
        for (e, j) in per_row {
            exps.extend(e);
            if let (Some(acc), Some(j)) = (jacs.as_mut(), j) {
                acc.extend(j);
            }
        }
        let z = tape.row_map(angles, theta, Tensor::new(vec![rows, n], exps)?, jacs)?;

        let post_w = self.leaf(tape, self.post_w, trainable);
        let post_b = self.leaf(tape, self.post_b, trainable);
        tape.dense(z, post_w, post_b)
    }

    /// Z expectations for one feature vector.
    pub fn expectations(&self, z: &[f64], backend: &Backend) -> Result<Vec<f64>> {
        if z.len() != self.input_dim {
            return Err(Error::Dimension(format!(
                "feature width {} vs pre-net input {}",
                z.len(),
                self.input_dim
            )));
        }
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![1, z.len()], z.to_vec())?);
        let w = tape.constant(self.params.value(self.pre_w).clone());
        let b = tape.constant(self.params.value(self.pre_b).clone());
        let pre = tape.dense(x, w, b)?;
        let mut p = scale_embedding(tape.value(pre).data())?.into_vec();
        p.extend_from_slice(self.theta());
        backend.expectations(&self.circuit, &p)
    }

    pub fn logit(&self, z: &[f64], backend: &Backend) -> Result<f64> {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![1, z.len()], z.to_vec())?);
        let out = self.forward(&mut tape, x, backend, false)?;
        tape.value(out).item()
    }
}

/// Gradients of a scalar loss with respect to every head parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct DqnGrads {
    pub pre_net_weight: Tensor,
    pub pre_net_bias: Tensor,
    pub theta: Vec<f64>,
    pub post_net_weight: Tensor,
    pub post_net_bias: Tensor,
}

/// A recorded single-sample forward pass, ready for one backward pass.
pub struct DqnPass {
    tape: Tape,
    logit: Var,
    trainable: bool,
}

impl DqnPass {
    pub fn logit(&self) -> f64 {
        self.tape.value(self.logit).data()[0]
    }

    /// Chains `upstream = dLoss/dlogit` through post-net, circuit (adjoint
    /// Jacobian) and pre-net. Also leaves the gradients on `net`'s
    /// parameters.
    pub fn backward(&mut self, net: &mut DressedQuantumNet, upstream: f64) -> Result<DqnGrads> {
        if !self.trainable {
            return Err(Error::State(
                "forward pass was recorded without gradients (noisy backend)".into(),
            ));
        }
        let loss = self.tape.weighted_sum(self.logit, &[upstream])?;
        self.tape.backward(loss, &mut net.params)?;
        let grad = |id: ParamId| {
            net.params
                .grad(id)
                .cloned()
                .expect("trainable parameter has a gradient")
        };
        Ok(DqnGrads {
            pre_net_weight: grad(net.pre_w),
            pre_net_bias: grad(net.pre_b),
            theta: net.theta.map_or_else(Vec::new, |id| grad(id).into_data()),
            post_net_weight: grad(net.post_w),
            post_net_bias: grad(net.post_b),
        })
    }
}

/// Forward pass for one feature vector. On the ideal backend the pass keeps
/// what [`DqnPass::backward`] needs.
pub fn dqn_forward(z: &[f64], net: &DressedQuantumNet, backend: &Backend) -> Result<DqnPass> {
    let trainable = backend.noise_model().is_none();
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::new(vec![1, z.len()], z.to_vec())?);
    let logit = net.forward(&mut tape, x, backend, trainable)?;
    Ok(DqnPass { tape, logit, trainable })
}
