use alloc::vec;
use alloc::vec::Vec;

use super::layers::{self, Activation, Conv1dLayer, DenseLayer, Layer};
use super::scalar::Scalar;
use crate::error::{invalid, Result};
use crate::numerics::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ArchKind {
    Cnn,
    Fcn,
}

/// Hidden-layer sizes of a network.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Architecture {
    /// Valid convolutions (ReLU) → global average pool → dense ReLU layers →
    /// one linear output.
    Cnn { channels: Vec<usize>, kernel: usize, dense: Vec<usize> },
    /// Flattened input → dense ReLU layers → one linear output.
    Fcn { hidden: Vec<usize> },
}

impl Architecture {
    /// Full-size CNN: 256/512/1024 channels, dense 256/128.
    pub fn full_cnn(kernel: usize) -> Self {
        Architecture::Cnn { channels: vec![256, 512, 1024], kernel, dense: vec![256, 128] }
    }

    /// Workstation CNN: 16/32/64 channels, dense 64/32.
    pub fn desk_cnn(kernel: usize) -> Self {
        Architecture::Cnn { channels: vec![16, 32, 64], kernel, dense: vec![64, 32] }
    }

    pub fn full_fcn() -> Self {
        Architecture::Fcn { hidden: vec![1024, 512, 256, 128] }
    }

    /// The full-size FCN scaled down by four.
    pub fn desk_fcn() -> Self {
        Architecture::Fcn { hidden: vec![256, 128, 64, 32] }
    }

    pub fn kind(&self) -> ArchKind {
        match self {
            Architecture::Cnn { .. } => ArchKind::Cnn,
            Architecture::Fcn { .. } => ArchKind::Fcn,
        }
    }
}

/// Input shape plus architecture; enough to rebuild a network.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkSpec {
    pub input_channels: usize,
    pub input_len: usize,
    pub architecture: Architecture,
}

impl NetworkSpec {
    pub fn layers(&self) -> Result<Vec<Layer>> {
        let (c0, l0) = (self.input_channels, self.input_len);
        if c0 == 0 || l0 == 0 {
            return Err(invalid!("empty network input {c0}x{l0}"));
        }
        let mut out = Vec::new();
        let dense_sizes = match &self.architecture {
            Architecture::Cnn { channels, kernel, dense } => {
                if channels.is_empty() || *kernel == 0 {
                    return Err(invalid!("a CNN needs at least one conv layer and kernel >= 1"));
                }
                let (mut c, mut l) = (c0, l0);
                for &next in channels {
                    if l < *kernel {
                        return Err(invalid!("length {l} shorter than kernel {kernel}"));
                    }
                    let conv = Conv1dLayer {
                        in_channels: c,
                        out_channels: next,
                        kernel: *kernel,
                        in_len: l,
                        activation: Activation::Relu,
                    };
                    l = conv.out_len();
                    c = next;
                    out.push(Layer::Conv1d(conv));
                }
                out.push(Layer::GlobalAveragePool { channels: c, len: l });
                dense
            }
            Architecture::Fcn { hidden } => {
                out.push(Layer::Flatten { channels: c0, len: l0 });
                hidden
            }
        };
        let mut width = out.last().map(|l| l.output_width()).unwrap_or(0);
        for &h in dense_sizes {
            out.push(Layer::Dense(DenseLayer { inputs: width, outputs: h, activation: Activation::Relu }));
            width = h;
        }
        out.push(Layer::Dense(DenseLayer { inputs: width, outputs: 1, activation: Activation::Linear }));
        if out.iter().any(|l| l.output_width() == 0) {
            return Err(invalid!("network has a zero-width layer"));
        }
        Ok(out)
    }
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First/second moment estimates and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
}

/// Per-layer activations and scratch buffers for one batch.
#[derive(Debug, Clone, Default)]
pub struct Workspace<T> {
    batch: usize,
    /// `acts[0]` is the input, `acts[i + 1]` the output of layer `i`.
    acts: Vec<Vec<T>>,
    cols: Vec<Vec<T>>,
    dy: Vec<T>,
    dx: Vec<T>,
    scratch: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    pub fn predictions(&self) -> &[T] {
        self.acts.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Output of layer `i` from the last forward pass.
    pub fn layer_output(&self, i: usize) -> &[T] {
        &self.acts[i + 1]
    }

    /// Mutable batch input buffer (`[channel][batch][position]`); fill it and
    /// call [`Network::forward_workspace`].
    pub fn input_mut(&mut self, batch: usize, width: usize) -> &mut Vec<T> {
        self.batch = batch;
        if self.acts.is_empty() {
            self.acts.push(Vec::new());
        }
        let x = &mut self.acts[0];
        x.clear();
        x.resize(batch * width, T::zero());
        x
    }
}

/// A layered network with flat parameter storage and its Adam state.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    spec: NetworkSpec,
    layers: Vec<Layer>,
    offsets: Vec<usize>,
    params: Vec<T>,
    adam: AdamState<T>,
}

impl<T: Scalar> Network<T> {
    /// All parameters zero.
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        let layers = spec.layers()?;
        let mut offsets = Vec::with_capacity(layers.len());
        let mut total = 0;
        for l in &layers {
            offsets.push(total);
            total += l.param_count();
        }
        Ok(Self {
            spec,
            layers,
            offsets,
            params: vec![T::zero(); total],
            adam: AdamState { m: vec![T::zero(); total], v: vec![T::zero(); total], step: 0 },
        })
    }

    /// Glorot-uniform weights drawn from `rng`, zero biases, fresh Adam state.
    pub fn glorot(spec: NetworkSpec, rng: &mut Rng) -> Result<Self> {
        let mut net = Self::new(spec)?;
        net.glorot_init(rng);
        Ok(net)
    }

    /// Redraws every weight from `Uniform(±sqrt(6/(fan_in + fan_out)))`
    /// (convolutions: `fan_in = C_in·K`, `fan_out = C_out·K`), zeroes biases
    /// and resets the optimiser.
    pub fn glorot_init(&mut self, rng: &mut Rng) {
        for (i, layer) in self.layers.iter().enumerate() {
            let (fans, weights) = match layer {
                Layer::Conv1d(c) => (c.fans(), c.weight_count()),
                Layer::Dense(d) => ((d.inputs, d.outputs), d.weight_count()),
                _ => continue,
            };
            let bound = libm::sqrt(6.0 / (fans.0 + fans.1) as f64);
            let p = &mut self.params[self.offsets[i]..self.offsets[i] + layer.param_count()];
            let (w, b) = p.split_at_mut(weights);
            w.iter_mut().for_each(|x| *x = T::of(rng.symmetric_uniform(bound)));
            b.iter_mut().for_each(|x| *x = T::zero());
        }
        self.reset_optimizer();
    }

    pub fn reset_optimizer(&mut self) {
        let n = self.params.len();
        self.adam = AdamState { m: vec![T::zero(); n], v: vec![T::zero(); n], step: 0 };
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn kind(&self) -> ArchKind {
        self.spec.architecture.kind()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Parameter range of layer `i` (weights first, then biases).
    pub fn layer_params(&self, i: usize) -> core::ops::Range<usize> {
        self.offsets[i]..self.offsets[i] + self.layers[i].param_count()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<T>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(invalid!("expected {} parameters, got {}", self.params.len(), params.len()));
        }
        self.params = params;
        Ok(())
    }

    pub fn adam_state(&self) -> &AdamState<T> {
        &self.adam
    }

    /// Floats per input record (`channels × length`).
    pub fn input_width(&self) -> usize {
        self.spec.input_channels * self.spec.input_len
    }

    /// Same network in another precision (optimiser state converted too).
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::of(x.f64())).collect::<Vec<U>>();
        Network {
            spec: self.spec.clone(),
            layers: self.layers.clone(),
            offsets: self.offsets.clone(),
            params: conv(&self.params),
            adam: AdamState { m: conv(&self.adam.m), v: conv(&self.adam.v), step: self.adam.step },
        }
    }

    pub fn workspace(&self) -> Workspace<T> {
        Workspace::default()
    }

    /// Runs the network on the batch already stored in `ws` (see
    /// [`Workspace::input_mut`]).
    pub fn forward_workspace(&self, ws: &mut Workspace<T>) -> Result<()> {
        let batch = ws.batch;
        if batch == 0 {
            return Err(invalid!("empty batch"));
        }
        if ws.acts.first().map(|x| x.len()) != Some(batch * self.input_width()) {
            return Err(invalid!("batch input does not match {} floats per record", self.input_width()));
        }
        ws.acts.resize_with(self.layers.len() + 1, Vec::new);
        ws.cols.resize_with(self.layers.len(), Vec::new);
        for (i, layer) in self.layers.iter().enumerate() {
            let (done, rest) = ws.acts.split_at_mut(i + 1);
            let p = &self.params[self.layer_params(i)];
            layers::forward(layer, p, &done[i], batch, &mut ws.cols[i], &mut rest[0]);
        }
        Ok(())
    }

    /// Forward pass over `batch` records laid out `[channel][batch][position]`.
    pub fn forward_batch(&self, ws: &mut Workspace<T>, input: &[T], batch: usize) -> Result<Vec<T>> {
        if input.len() != batch * self.input_width() {
            return Err(invalid!(
                "expected {batch} records of {} floats, got {} values",
                self.input_width(),
                input.len()
            ));
        }
        ws.input_mut(batch, self.input_width()).copy_from_slice(input);
        self.forward_workspace(ws)?;
        Ok(ws.predictions().to_vec())
    }

    /// Prediction for one record (`channels × length`, row-major).
    pub fn forward(&self, features: &[T]) -> Result<T> {
        Ok(self.forward_batch(&mut self.workspace(), features, 1)?[0])
    }

    /// Backward pass after [`Network::forward_workspace`]; `dout` is the loss
    /// gradient with respect to each prediction. Parameter gradients are
    /// written to `grad`. Returns the input gradient (batch layout) when
    /// `input_grad` is set.
    pub fn backward(
        &self,
        ws: &mut Workspace<T>,
        dout: &[T],
        grad: &mut [T],
        input_grad: bool,
    ) -> Result<Option<Vec<T>>> {
        let batch = ws.batch;
        if grad.len() != self.params.len() {
            return Err(invalid!("gradient buffer has {} slots, need {}", grad.len(), self.params.len()));
        }
        if dout.len() != batch || ws.acts.len() != self.layers.len() + 1 {
            return Err(invalid!("backward called without a matching forward pass"));
        }
        ws.dy.clear();
        ws.dy.extend_from_slice(dout);
        for i in (0..self.layers.len()).rev() {
            let need_dx = i > 0 || input_grad;
            let range = self.layer_params(i);
            let mut dx = core::mem::take(&mut ws.dx);
            layers::backward(
                &self.layers[i],
                &self.params[range.clone()],
                &ws.acts[i],
                &ws.acts[i + 1],
                &ws.cols[i],
                batch,
                &mut ws.dy,
                &mut grad[range],
                &mut ws.scratch,
                need_dx.then_some(&mut dx),
            );
            if need_dx {
                core::mem::swap(&mut ws.dy, &mut dx);
            }
            ws.dx = dx;
        }
        Ok(input_grad.then(|| ws.dy.clone()))
    }

    /// Mean squared error of the batch and its parameter gradient.
    pub fn loss_and_gradient(
        &self,
        ws: &mut Workspace<T>,
        input: &[T],
        targets: &[T],
        grad: &mut [T],
    ) -> Result<f64> {
        let batch = targets.len();
        let preds = self.forward_batch(ws, input, batch)?;
        let loss = mse_loss(&preds, targets)?;
        let scale = T::of(2.0 / batch as f64);
        let dout: Vec<T> = preds.iter().zip(targets).map(|(&p, &t)| (p - t) * scale).collect();
        self.backward(ws, &dout, grad, false)?;
        Ok(loss)
    }

    /// One bias-corrected Adam update.
    pub fn adam_step(&mut self, grad: &[T], cfg: &AdamConfig) -> Result<()> {
        if grad.len() != self.params.len() {
            return Err(invalid!("gradient has {} entries, need {}", grad.len(), self.params.len()));
        }
        let st = &mut self.adam;
        st.step += 1;
        let t = st.step as i32;
        let c1 = T::of(1.0 / (1.0 - libm::pow(cfg.beta1, t as f64)));
        let c2 = T::of(1.0 / (1.0 - libm::pow(cfg.beta2, t as f64)));
        let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
        let (ob1, ob2) = (T::of(1.0 - cfg.beta1), T::of(1.0 - cfg.beta2));
        let (lr, eps) = (T::of(cfg.learning_rate), T::of(cfg.epsilon));
        for i in 0..self.params.len() {
            let g = grad[i];
            let m = b1 * st.m[i] + ob1 * g;
            let v = b2 * st.v[i] + ob2 * g * g;
            st.m[i] = m;
            st.v[i] = v;
            self.params[i] -= lr * (m * c1) / ((v * c2).sqrt() + eps);
        }
        Ok(())
    }
}

/// Mean of squared differences, accumulated in `f64`.
pub fn mse_loss<T: Scalar>(predictions: &[T], targets: &[T]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != targets.len() {
        return Err(invalid!(
            "need equal non-empty lengths, got {} predictions and {} targets",
            predictions.len(),
            targets.len()
        ));
    }
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            let d = p.f64() - t.f64();
            d * d
        })
        .sum();
    Ok(sum / predictions.len() as f64)
}
