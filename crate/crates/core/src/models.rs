//! The baseline CNN, its frozen feature extractor, and the two replacement
//! heads: a re-initialised classical head (CTL) and the dressed quantum
//! network (QTL).

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{init, ActivationKind, ParamId, ParameterSet, Tape, Tensor, Var};
use crate::dqn::DressedQuantumNet;
use crate::error::{Error, Result};
use crate::quantum::Backend;

pub const IMAGE_SIZE: usize = 128;
pub const FEATURE_DIM: usize = 2304;
pub const HIDDEN_UNITS: usize = 5;
pub const DROPOUT: f64 = 0.5;
const POOL_KERNEL: usize = 2;
const POOL_STRIDE: usize = 1;
const EXTRACT_BATCH: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvLayer {
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pool_after: bool,
}

pub const CONV_LAYERS: [ConvLayer; 4] = [
    ConvLayer {
        c_in: 1,
        c_out: 8,
        kernel: 4,
        stride: 2,
        pool_after: true,
    },
    ConvLayer {
        c_in: 8,
        c_out: 16,
        kernel: 8,
        stride: 2,
        pool_after: true,
    },
    ConvLayer {
        c_in: 16,
        c_out: 32,
        kernel: 8,
        stride: 2,
        pool_after: true,
    },
    ConvLayer {
        c_in: 32,
        c_out: 64,
        kernel: 4,
        stride: 1,
        pool_after: false,
    },
];

fn valid_out(size: usize, kernel: usize, stride: usize) -> Option<usize> {
    (size >= kernel).then(|| (size - kernel) / stride + 1)
}

/// Spatial side length after every conv and pool of the stack, starting with
/// the input side itself.
pub fn shape_chain(input_side: usize) -> Result<Vec<usize>> {
    let mut chain = vec![input_side];
    let mut side = input_side;
    for layer in &CONV_LAYERS {
        let mut steps = vec![(layer.kernel, layer.stride)];
        if layer.pool_after {
            steps.push((POOL_KERNEL, POOL_STRIDE));
        }
        for (k, s) in steps {
            side = valid_out(side, k, s)
                .ok_or_else(|| Error::Dimension(format!("side {side} smaller than kernel {k}")))?;
            chain.push(side);
        }
    }
    Ok(chain)
}

/// Whether a forward pass records a training graph.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

/// Something the training loop can optimise: a parameter set plus a forward
/// pass from a batch `[N, ...]` to logits `[N, 1]`.
pub trait Trainable: Send + Sync {
    fn params(&self) -> &ParameterSet;
    fn params_mut(&mut self) -> &mut ParameterSet;
    fn forward(&self, tape: &mut Tape, input: Var, mode: &mut Mode, backend: &Backend) -> Result<Var>;
}

/// Parameter ids of the four conv layers inside some [`ParameterSet`].
#[derive(Clone, Debug)]
struct ConvStack {
    layers: Vec<(ParamId, ParamId)>,
}

impl ConvStack {
    fn register(params: &mut ParameterSet, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut layers = Vec::new();
        for (i, l) in CONV_LAYERS.iter().enumerate() {
            let w = params.register(
                format!("conv{i}.weight"),
                init::glorot_uniform(&[l.c_out, l.c_in, l.kernel, l.kernel], rng),
            )?;
            let b = params.register(format!("conv{i}.bias"), Tensor::zeros(&[l.c_out]))?;
            layers.push((w, b));
        }
        Ok(Self { layers })
    }

    /// Images `[N, 1, 128, 128]` to flattened features `[N, 2304]`. With
    /// `as_params` false the weights enter the tape as constants.
    fn forward(&self, tape: &mut Tape, params: &ParameterSet, images: Var, as_params: bool) -> Result<Var> {
        let s = tape.value(images).shape();
        if s.len() != 4 || s[1] != 1 || s[2] != IMAGE_SIZE || s[3] != IMAGE_SIZE {
            return Err(Error::Dimension(format!(
                "expected images [N, 1, {IMAGE_SIZE}, {IMAGE_SIZE}], got {s:?}"
            )));
        }
        let mut x = images;
        for (l, &(w, b)) in CONV_LAYERS.iter().zip(&self.layers) {
            let (wv, bv) = if as_params {
                (tape.param(params, w), tape.param(params, b))
            } else {
                (
                    tape.constant(params.value(w).clone()),
                    tape.constant(params.value(b).clone()),
                )
            };
            x = tape.conv2d(x, wv, bv, l.stride)?;
            x = tape.activation(x, ActivationKind::Relu)?;
            if l.pool_after {
                x = tape.maxpool2d(x, POOL_KERNEL, POOL_STRIDE)?;
            }
        }
        tape.flatten(x)
    }
}

/// Dense 2304→5, ReLU, dropout, dense 5→1.
#[derive(Clone, Debug)]
struct DenseHead {
    hidden: (ParamId, ParamId),
    out: (ParamId, ParamId),
}

impl DenseHead {
    fn register(params: &mut ParameterSet, rng: &mut ChaCha8Rng) -> Result<Self> {
        let hw = params.register("dense0.weight", init::glorot_uniform(&[FEATURE_DIM, HIDDEN_UNITS], rng))?;
        let hb = params.register("dense0.bias", Tensor::zeros(&[HIDDEN_UNITS]))?;
        let ow = params.register("dense1.weight", init::glorot_uniform(&[HIDDEN_UNITS, 1], rng))?;
        let ob = params.register("dense1.bias", Tensor::zeros(&[1]))?;
        Ok(Self {
            hidden: (hw, hb),
            out: (ow, ob),
        })
    }

    fn forward(&self, tape: &mut Tape, params: &ParameterSet, features: Var, mode: &mut Mode) -> Result<Var> {
        let s = tape.value(features).shape();
        if s.len() != 2 || s[1] != FEATURE_DIM {
            return Err(Error::Dimension(format!(
                "expected features [N, {FEATURE_DIM}], got {s:?}"
            )));
        }
        let hw = tape.param(params, self.hidden.0);
        let hb = tape.param(params, self.hidden.1);
        let h = tape.dense(features, hw, hb)?;
        let mut h = tape.activation(h, ActivationKind::Relu)?;
        if let Mode::Train(rng) = mode {
            h = tape.dropout(h, DROPOUT, true, &mut **rng)?;
        }
        let ow = tape.param(params, self.out.0);
        let ob = tape.param(params, self.out.1);
        tape.dense(h, ow, ob)
    }
}

#[derive(Clone, Debug)]
pub struct BaselineCnn {
    params: ParameterSet,
    stack: ConvStack,
    head: DenseHead,
}

/// Glorot-initialised baseline; conv parameters are registered first.
pub fn build_baseline(seed: u64) -> Result<BaselineCnn> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParameterSet::new();
    let stack = ConvStack::register(&mut params, &mut rng)?;
    let head = DenseHead::register(&mut params, &mut rng)?;
    Ok(BaselineCnn { params, stack, head })
}

impl BaselineCnn {
    /// Copies the conv weights into a frozen, independent extractor.
    pub fn freeze(&self) -> Result<FrozenFeatures> {
        let mut params = ParameterSet::new();
        for &(w, b) in &self.stack.layers {
            for id in [w, b] {
                let p = self.params.get(id);
                params.register(p.name.clone(), p.value.clone())?;
            }
        }
        params.freeze();
        Ok(FrozenFeatures {
            params,
            stack: self.stack.clone(),
        })
    }

    /// The classical head's parameters in registration order.
    fn head_values(&self) -> Vec<&Tensor> {
        [self.head.hidden.0, self.head.hidden.1, self.head.out.0, self.head.out.1]
            .into_iter()
            .map(|id| self.params.value(id))
            .collect()
    }
}

impl Trainable for BaselineCnn {
    fn params(&self) -> &ParameterSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    fn forward(&self, tape: &mut Tape, input: Var, mode: &mut Mode, _backend: &Backend) -> Result<Var> {
        let features = self.stack.forward(tape, &self.params, input, true)?;
        self.head.forward(tape, &self.params, features, mode)
    }
}

/// The trained conv stack with gradients disabled.
#[derive(Clone, Debug)]
pub struct FrozenFeatures {
    params: ParameterSet,
    stack: ConvStack,
}

impl FrozenFeatures {
    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn output_dim(&self) -> usize {
        FEATURE_DIM
    }

    /// Overwrites the conv weights by name; they stay frozen.
    pub fn load_values_from(&mut self, src: &ParameterSet) -> Result<()> {
        self.params.load_values_from(src)
    }

    /// Records the stack on `tape` with constant weights.
    pub fn forward(&self, tape: &mut Tape, images: Var) -> Result<Var> {
        self.stack.forward(tape, &self.params, images, false)
    }

    /// `[N, 1, 128, 128]` → `[N, 2304]`, in fixed-size batches.
    pub fn extract(&self, images: &Tensor) -> Result<Tensor> {
        let s = images.shape();
        if s.len() != 4 {
            return Err(Error::Dimension(format!("expected images [N, 1, H, W], got {s:?}")));
        }
        let per: usize = s[1..].iter().product();
        let mut out = Vec::with_capacity(s[0] * FEATURE_DIM);
        for start in (0..s[0]).step_by(EXTRACT_BATCH) {
            let end = (start + EXTRACT_BATCH).min(s[0]);
            let mut shape = s.to_vec();
            shape[0] = end - start;
            let batch = Tensor::new(shape, images.data()[start * per..end * per].to_vec())?;
            let mut tape = Tape::new();
            let x = tape.constant(batch);
            let f = self.forward(&mut tape, x)?;
            out.extend_from_slice(tape.value(f).data());
        }
        Tensor::new(vec![s[0], FEATURE_DIM], out)
    }
}

/// Re-initialised classical head on frozen features.
#[derive(Clone, Debug)]
pub struct CtlHead {
    params: ParameterSet,
    head: DenseHead,
}

impl CtlHead {
    pub fn new(seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParameterSet::new();
        let head = DenseHead::register(&mut params, &mut rng)?;
        Ok(Self { params, head })
    }

    /// A head carrying the baseline's own dense weights.
    pub fn from_baseline(baseline: &BaselineCnn) -> Result<Self> {
        let mut h = Self::new(0)?;
        let ids = [h.head.hidden.0, h.head.hidden.1, h.head.out.0, h.head.out.1];
        for (id, v) in ids.into_iter().zip(baseline.head_values()) {
            *h.params.value_mut(id) = v.clone();
        }
        Ok(h)
    }
}

impl Trainable for CtlHead {
    fn params(&self) -> &ParameterSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    fn forward(&self, tape: &mut Tape, input: Var, mode: &mut Mode, _backend: &Backend) -> Result<Var> {
        self.head.forward(tape, &self.params, input, mode)
    }
}

impl Trainable for DressedQuantumNet {
    fn params(&self) -> &ParameterSet {
        DressedQuantumNet::params(self)
    }

    fn params_mut(&mut self) -> &mut ParameterSet {
        DressedQuantumNet::params_mut(self)
    }

    fn forward(&self, tape: &mut Tape, input: Var, mode: &mut Mode, backend: &Backend) -> Result<Var> {
        DressedQuantumNet::forward(self, tape, input, backend, mode.is_train())
    }
}

/// Frozen features followed by a trainable head; takes images as input.
#[derive(Clone, Debug)]
pub struct TransferModel<H> {
    pub features: Arc<FrozenFeatures>,
    pub head: H,
}

pub type CtlModel = TransferModel<CtlHead>;
pub type QtlModel = TransferModel<DressedQuantumNet>;

impl<H: Trainable> Trainable for TransferModel<H> {
    fn params(&self) -> &ParameterSet {
        self.head.params()
    }

    fn params_mut(&mut self) -> &mut ParameterSet {
        self.head.params_mut()
    }

    fn forward(&self, tape: &mut Tape, input: Var, mode: &mut Mode, backend: &Backend) -> Result<Var> {
        let f = self.features.forward(tape, input)?;
        self.head.forward(tape, f, mode, backend)
    }
}

pub fn make_ctl_head(frozen: Arc<FrozenFeatures>, seed: u64) -> Result<CtlModel> {
    Ok(TransferModel {
        features: frozen,
        head: CtlHead::new(seed)?,
    })
}

pub fn make_qtl_model(frozen: Arc<FrozenFeatures>, n_qubits: usize, reps: usize, seed: u64) -> Result<QtlModel> {
    Ok(TransferModel {
        head: DressedQuantumNet::new(frozen.output_dim(), n_qubits, reps, seed)?,
        features: frozen,
    })
}

/// Logits `[N]` in evaluation mode, in fixed-size batches.
pub fn predict_logits(model: &dyn Trainable, inputs: &Tensor, backend: &Backend) -> Result<Vec<f64>> {
    let s = inputs.shape();
    let per: usize = s[1..].iter().product();
    let mut out = Vec::with_capacity(s[0]);
    for start in (0..s[0]).step_by(EXTRACT_BATCH) {
        let end = (start + EXTRACT_BATCH).min(s[0]);
        let mut shape = s.to_vec();
        shape[0] = end - start;
        let batch = Tensor::new(shape, inputs.data()[start * per..end * per].to_vec())?;
        let mut tape = Tape::new();
        let x = tape.constant(batch);
        let y = model.forward(&mut tape, x, &mut Mode::Eval, backend)?;
        out.extend_from_slice(tape.value(y).data());
    }
    Ok(out)
}
