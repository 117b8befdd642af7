//! Layer descriptions and their batched kernels.
//!
//! Batched activations use the layout `[channel][batch][position]`; a dense
//! layer's input and output are `features × batch` matrices, which is the same
//! thing with `position` of length one.

use alloc::vec;
use alloc::vec::Vec;

use super::scalar::{gemm, Scalar};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activation {
    Relu,
    Linear,
}

/// Valid 1D cross-correlation, stride 1, no padding.
///
/// Parameters: weights `W[i][j][m]` (`i < out`, `j < in`, `m < kernel`),
/// then biases `b[i]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv1dLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub in_len: usize,
    pub activation: Activation,
}

impl Conv1dLayer {
    pub fn out_len(&self) -> usize {
        self.in_len + 1 - self.kernel
    }

    pub fn weight_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.out_channels
    }

    pub fn fans(&self) -> (usize, usize) {
        (self.in_channels * self.kernel, self.out_channels * self.kernel)
    }
}

/// Fully connected layer: weights `W[i][k]` (`outputs × inputs`), then biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn weight_count(&self) -> usize {
        self.inputs * self.outputs
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.outputs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Conv1d(Conv1dLayer),
    /// Mean over positions: `[C][B][L] -> C × B`.
    GlobalAveragePool { channels: usize, len: usize },
    /// `[C][B][L] -> (C·L) × B`, feature index `c·L + l`.
    Flatten { channels: usize, len: usize },
    Dense(DenseLayer),
}

impl Layer {
    pub fn param_count(&self) -> usize {
        match self {
            Layer::Conv1d(c) => c.param_count(),
            Layer::Dense(d) => d.param_count(),
            _ => 0,
        }
    }

    /// Output floats per record.
    pub fn output_width(&self) -> usize {
        match self {
            Layer::Conv1d(c) => c.out_channels * c.out_len(),
            Layer::GlobalAveragePool { channels, .. } => *channels,
            Layer::Flatten { channels, len } => channels * len,
            Layer::Dense(d) => d.outputs,
        }
    }

    pub fn input_width(&self) -> usize {
        match self {
            Layer::Conv1d(c) => c.in_channels * c.in_len,
            Layer::GlobalAveragePool { channels, len } | Layer::Flatten { channels, len } => {
                channels * len
            }
            Layer::Dense(d) => d.inputs,
        }
    }
}

/// `max(0, x)`; the derivative at 0 is taken to be 0.
pub fn relu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

fn activate<T: Scalar>(act: Activation, y: &mut [T]) {
    if act == Activation::Relu {
        y.iter_mut().for_each(|v| *v = relu(*v));
    }
}

/// Zeroes `dy` wherever the activation was clamped.
fn mask<T: Scalar>(act: Activation, y: &[T], dy: &mut [T]) {
    if act == Activation::Relu {
        for (d, &v) in dy.iter_mut().zip(y) {
            if v <= T::zero() {
                *d = T::zero();
            }
        }
    }
}

fn add_row_bias<T: Scalar>(y: &mut [T], bias: &[T], row: usize) {
    for (r, &b) in y.chunks_exact_mut(row).zip(bias) {
        r.iter_mut().for_each(|v| *v += b);
    }
}

fn row_sums<T: Scalar>(dz: &[T], row: usize, out: &mut [T]) {
    for (r, o) in dz.chunks_exact(row).zip(out) {
        *o = r.iter().fold(T::zero(), |s, &v| s + v);
    }
}

pub(crate) fn im2col<T: Scalar>(layer: &Conv1dLayer, x: &[T], batch: usize, cols: &mut [T]) {
    let (k, l_in, l_out) = (layer.kernel, layer.in_len, layer.out_len());
    let width = batch * l_out;
    for j in 0..layer.in_channels {
        for m in 0..k {
            let row = &mut cols[(j * k + m) * width..(j * k + m + 1) * width];
            for b in 0..batch {
                let src = &x[(j * batch + b) * l_in + m..][..l_out];
                row[b * l_out..(b + 1) * l_out].copy_from_slice(src);
            }
        }
    }
}

fn col2im<T: Scalar>(layer: &Conv1dLayer, dcols: &[T], batch: usize, dx: &mut [T]) {
    let (k, l_in, l_out) = (layer.kernel, layer.in_len, layer.out_len());
    let width = batch * l_out;
    dx.iter_mut().for_each(|v| *v = T::zero());
    for j in 0..layer.in_channels {
        for m in 0..k {
            let row = &dcols[(j * k + m) * width..(j * k + m + 1) * width];
            for b in 0..batch {
                let dst = &mut dx[(j * batch + b) * l_in + m..][..l_out];
                for (d, &s) in dst.iter_mut().zip(&row[b * l_out..(b + 1) * l_out]) {
                    *d += s;
                }
            }
        }
    }
}

/// Batched forward pass of one layer. `cols` is scratch space kept for the
/// backward pass (only used by convolutions).
pub(crate) fn forward<T: Scalar>(
    layer: &Layer,
    params: &[T],
    x: &[T],
    batch: usize,
    cols: &mut Vec<T>,
    y: &mut Vec<T>,
) {
    y.clear();
    y.resize(layer.output_width() * batch, T::zero());
    match layer {
        Layer::Conv1d(c) => {
            let rows = c.in_channels * c.kernel;
            let width = batch * c.out_len();
            cols.clear();
            cols.resize(rows * width, T::zero());
            im2col(c, x, batch, cols);
            let (w, b) = params.split_at(c.weight_count());
            gemm(c.out_channels, rows, width, w, false, cols, false, y, false);
            add_row_bias(y, b, width);
            activate(c.activation, y);
        }
        Layer::GlobalAveragePool { len, .. } => {
            let inv = T::of(1.0 / *len as f64);
            for (o, seg) in y.iter_mut().zip(x.chunks_exact(*len)) {
                *o = seg.iter().fold(T::zero(), |s, &v| s + v) * inv;
            }
        }
        Layer::Flatten { channels, len } => {
            for c in 0..*channels {
                for b in 0..batch {
                    for l in 0..*len {
                        y[(c * len + l) * batch + b] = x[(c * batch + b) * len + l];
                    }
                }
            }
        }
        Layer::Dense(d) => {
            let (w, b) = params.split_at(d.weight_count());
            gemm(d.outputs, d.inputs, batch, w, false, x, false, y, false);
            add_row_bias(y, b, batch);
            activate(d.activation, y);
        }
    }
}

/// Batched backward pass of one layer.
///
/// `dy` holds the loss gradient with respect to the layer output and is
/// overwritten (masked by the activation). Parameter gradients are written to
/// `grad`; the input gradient goes to `dx` when it is `Some`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward<T: Scalar>(
    layer: &Layer,
    params: &[T],
    x: &[T],
    y: &[T],
    cols: &[T],
    batch: usize,
    dy: &mut [T],
    grad: &mut [T],
    scratch: &mut Vec<T>,
    dx: Option<&mut Vec<T>>,
) {
    match layer {
        Layer::Conv1d(c) => {
            mask(c.activation, y, dy);
            let rows = c.in_channels * c.kernel;
            let width = batch * c.out_len();
            let (gw, gb) = grad.split_at_mut(c.weight_count());
            gemm(c.out_channels, width, rows, dy, false, cols, true, gw, false);
            row_sums(dy, width, gb);
            if let Some(dx) = dx {
                scratch.clear();
                scratch.resize(rows * width, T::zero());
                let w = &params[..c.weight_count()];
                gemm(rows, c.out_channels, width, w, true, dy, false, scratch, false);
                dx.clear();
                dx.resize(layer.input_width() * batch, T::zero());
                col2im(c, scratch, batch, dx);
            }
        }
        Layer::GlobalAveragePool { len, .. } => {
            if let Some(dx) = dx {
                let inv = T::of(1.0 / *len as f64);
                dx.clear();
                for &g in dy.iter() {
                    dx.extend(core::iter::repeat_n(g * inv, *len));
                }
            }
        }
        Layer::Flatten { channels, len } => {
            if let Some(dx) = dx {
                dx.clear();
                dx.resize(layer.input_width() * batch, T::zero());
                for c in 0..*channels {
                    for b in 0..batch {
                        for l in 0..*len {
                            dx[(c * batch + b) * len + l] = dy[(c * len + l) * batch + b];
                        }
                    }
                }
            }
        }
        Layer::Dense(d) => {
            mask(d.activation, y, dy);
            let (gw, gb) = grad.split_at_mut(d.weight_count());
            gemm(d.outputs, batch, d.inputs, dy, false, x, true, gw, false);
            row_sums(dy, batch, gb);
            if let Some(dx) = dx {
                dx.clear();
                dx.resize(d.inputs * batch, T::zero());
                let w = &params[..d.weight_count()];
                gemm(d.inputs, d.outputs, batch, w, true, dy, false, dx, false);
            }
        }
    }
}

/// Single-input convolution: `input` is `C_in × L` row-major, `params` the
/// layer's weights followed by its biases. The activation is not applied.
pub fn conv1d_forward<T: Scalar>(layer: &Conv1dLayer, params: &[T], input: &[T]) -> Result<Vec<T>> {
    if layer.in_len < layer.kernel {
        return Err(invalid!("input length {} shorter than kernel {}", layer.in_len, layer.kernel));
    }
    if input.len() != layer.in_channels * layer.in_len {
        return Err(invalid!(
            "expected {}x{} input, got {} values",
            layer.in_channels,
            layer.in_len,
            input.len()
        ));
    }
    if params.len() != layer.param_count() {
        return Err(invalid!("expected {} parameters, got {}", layer.param_count(), params.len()));
    }
    let linear = Conv1dLayer { activation: Activation::Linear, ..*layer };
    let (mut cols, mut y) = (Vec::new(), Vec::new());
    forward(&Layer::Conv1d(linear), params, input, 1, &mut cols, &mut y);
    Ok(y)
}

/// Channel means of a `C × L` row-major feature map.
pub fn global_average_pool<T: Scalar>(features: &[T], channels: usize) -> Result<Vec<T>> {
    if channels == 0 || features.is_empty() || !features.len().is_multiple_of(channels) {
        return Err(invalid!("{} values do not form {channels} non-empty channels", features.len()));
    }
    let len = features.len() / channels;
    let mut y = vec![T::zero(); channels];
    forward(
        &Layer::GlobalAveragePool { channels, len },
        &[],
        features,
        1,
        &mut Vec::new(),
        &mut y,
    );
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn conv(c_in: usize, c_out: usize, k: usize, l: usize) -> Conv1dLayer {
        Conv1dLayer {
            in_channels: c_in,
            out_channels: c_out,
            kernel: k,
            in_len: l,
            activation: Activation::Linear,
        }
    }

    #[test]
    fn shift_kernel() {
        let y = conv1d_forward(&conv(1, 1, 3, 4), &[0.0f32, 1.0, 0.0, 0.0], &[1.0, 2.0, 3.0, 4.0])
            .unwrap();
        assert_eq!(y, vec![2.0, 3.0]);
    }

    #[test]
    fn bias_only() {
        let layer = conv(2, 3, 2, 5);
        let mut p = vec![0.0f64; layer.param_count()];
        p[layer.weight_count()..].copy_from_slice(&[0.5, 0.5, 0.5]);
        let y = conv1d_forward(&layer, &p, &[7.0; 10]).unwrap();
        assert_eq!(y, vec![0.5; 12]);
    }

    #[test]
    fn matches_triple_loop() {
        let layer = conv(3, 4, 5, 11);
        let mut rng = Rng::new(9);
        let p: Vec<f32> =
            (0..layer.param_count()).map(|_| rng.symmetric_uniform(1.0) as f32).collect();
        let x: Vec<f32> = (0..33).map(|_| rng.symmetric_uniform(1.0) as f32).collect();
        let y = conv1d_forward(&layer, &p, &x).unwrap();
        for i in 0..4 {
            for n in 0..7 {
                let mut s = p[layer.weight_count() + i] as f64;
                for j in 0..3 {
                    for m in 0..5 {
                        s += p[(i * 3 + j) * 5 + m] as f64 * x[j * 11 + n + m] as f64;
                    }
                }
                assert!((y[i * 7 + n] as f64 - s).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn conv_errors() {
        let short = conv(1, 1, 5, 3);
        assert!(conv1d_forward(&short, &[0.0f32; 6], &[0.0; 3]).is_err());
        let ok = conv(1, 1, 2, 3);
        assert!(conv1d_forward(&ok, &[0.0f32; 3], &[0.0; 4]).is_err());
    }

    #[test]
    fn pool_examples() {
        assert_eq!(global_average_pool(&[1.0f64, 2.0, 3.0, 4.0], 1).unwrap(), vec![2.5]);
        assert_eq!(global_average_pool(&[3.0f64; 6], 2).unwrap(), vec![3.0, 3.0]);
        let x = [1.0f64, -2.0, 0.5, 4.0, 9.0, -1.0];
        let a = global_average_pool(&x, 2).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| v * -3.0).collect();
        let b = global_average_pool(&scaled, 2).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((q - -3.0 * p).abs() < 1e-12);
        }
        assert!(global_average_pool::<f64>(&[], 1).is_err());
    }

    #[test]
    fn relu_examples() {
        assert_eq!(relu(-1.0f32), 0.0);
        assert_eq!(relu(2.0f32), 2.0);
        assert_eq!(relu(0.0f64), 0.0);
        let mut d = [1.0f64];
        mask(Activation::Relu, &[0.0], &mut d);
        assert_eq!(d, [0.0]);
    }

    #[test]
    fn flatten_roundtrip() {
        let layer = Layer::Flatten { channels: 2, len: 3 };
        let x: Vec<f64> = (0..12).map(|v| v as f64).collect();
        let (mut cols, mut y) = (Vec::new(), Vec::new());
        forward(&layer, &[], &x, 2, &mut cols, &mut y);
        // channel 1, record 0, position 2 sits at x[(1*2+0)*3+2] = 8
        assert_eq!(y[(3 + 2) * 2], 8.0);
        let mut dy = y.clone();
        let mut dx = Vec::new();
        backward(&layer, &[], &x, &y, &cols, 2, &mut dy, &mut [], &mut Vec::new(), Some(&mut dx));
        assert_eq!(dx, x);
    }
}
