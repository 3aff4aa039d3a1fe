//! Layer operations of the classifier, each returning the intermediate data
//! the explanation views display alongside the plain output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Shape3, Tensor3D, Vector1D};

/// Hyperparameters of a square-kernel convolution with symmetric zero padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvHyper {
    pub kernel_size: usize,
    pub stride: usize,
    pub padding: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl ConvHyper {
    pub fn new(
        kernel_size: usize,
        stride: usize,
        padding: usize,
        in_channels: usize,
        out_channels: usize,
    ) -> Result<Self> {
        let h = ConvHyper {
            kernel_size,
            stride,
            padding,
            in_channels,
            out_channels,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 || self.stride == 0 {
            return Err(Error::config(format!(
                "kernel_size and stride must be >= 1 (got {} and {})",
                self.kernel_size, self.stride
            )));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::config("channel counts must be positive"));
        }
        Ok(())
    }
}

/// Output-size diagnostics for sliding a window over an input grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub out_rows: usize,
    pub out_cols: usize,
    /// The last window ends exactly on the padded border in both dimensions.
    pub fits_exactly: bool,
    pub valid: bool,
}

fn window_extent(input: usize, kernel: usize, stride: usize, padding: usize) -> (usize, bool) {
    let padded = input + 2 * padding;
    if kernel > padded || stride == 0 {
        return (0, false);
    }
    let span = padded - kernel;
    (span / stride + 1, span.is_multiple_of(stride))
}

/// Computes `floor((in + 2p - k) / s) + 1` per dimension.
///
/// Misfit hyperparameters are reported through `fits_exactly`, not rejected.
/// When the kernel is larger than the padded input the report is invalid,
/// with zero output dims and `fits_exactly = false`.
pub fn shape_report(in_rows: usize, in_cols: usize, h: &ConvHyper) -> ShapeReport {
    window_report(in_rows, in_cols, h.kernel_size, h.stride, h.padding)
}

pub(crate) fn window_report(
    in_rows: usize,
    in_cols: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> ShapeReport {
    let (out_rows, fit_r) = window_extent(in_rows, kernel, stride, padding);
    let (out_cols, fit_c) = window_extent(in_cols, kernel, stride, padding);
    let valid = in_rows > 0 && in_cols > 0 && kernel > 0 && out_rows >= 1 && out_cols >= 1;
    ShapeReport {
        out_rows: if valid { out_rows } else { 0 },
        out_cols: if valid { out_cols } else { 0 },
        fits_exactly: valid && fit_r && fit_c,
        valid,
    }
}

/// Top-left corners `(row, col)` of every kernel placement, in padded-input
/// coordinates and row-major visiting order. Empty when the report is invalid.
pub fn sliding_steps(in_rows: usize, in_cols: usize, h: &ConvHyper) -> Vec<(usize, usize)> {
    let report = shape_report(in_rows, in_cols, h);
    let mut steps = Vec::with_capacity(report.out_rows * report.out_cols);
    for r in 0..report.out_rows {
        for c in 0..report.out_cols {
            steps.push((r * h.stride, c * h.stride));
        }
    }
    steps
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    out_channels: usize,
    in_channels: usize,
    kernel_size: usize,
    /// `[out][in][row][col]`, flattened.
    kernels: Vec<f32>,
    biases: Vec<f32>,
}

impl ConvWeights {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel_size: usize,
        kernels: Vec<f32>,
        biases: Vec<f32>,
    ) -> Result<Self> {
        let expected = out_channels * in_channels * kernel_size * kernel_size;
        if expected == 0 {
            return Err(Error::config("convolution weights need positive dimensions"));
        }
        if kernels.len() != expected {
            return Err(Error::config(format!(
                "kernel array has {} values, expected {out_channels}x{in_channels}x{kernel_size}x{kernel_size}",
                kernels.len()
            )));
        }
        if biases.len() != out_channels {
            return Err(Error::config(format!(
                "{} biases for {out_channels} output channels",
                biases.len()
            )));
        }
        if kernels.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::config("non-finite convolution weight"));
        }
        Ok(ConvWeights {
            out_channels,
            in_channels,
            kernel_size,
            kernels,
            biases,
        })
    }

    /// Builds weights from `[out][in][row][col]` nested vectors.
    pub fn from_nested(kernels: &[Vec<Vec<Vec<f32>>>], biases: Vec<f32>) -> Result<Self> {
        let out = kernels.len();
        let inp = kernels.first().map_or(0, Vec::len);
        let k = kernels
            .first()
            .and_then(|o| o.first())
            .map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(out * inp * k * k);
        for per_out in kernels {
            if per_out.len() != inp {
                return Err(Error::config("ragged kernel array (input channels)"));
            }
            for per_in in per_out {
                if per_in.len() != k {
                    return Err(Error::config("ragged kernel array (rows)"));
                }
                for row in per_in {
                    if row.len() != k {
                        return Err(Error::config("non-square or ragged kernel"));
                    }
                    flat.extend_from_slice(row);
                }
            }
        }
        Self::new(out, inp, k, flat, biases)
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    /// Row-major `k * k` kernel connecting input channel `i` to output channel `o`.
    pub fn kernel(&self, o: usize, i: usize) -> &[f32] {
        let kk = self.kernel_size * self.kernel_size;
        let start = (o * self.in_channels + i) * kk;
        &self.kernels[start..start + kk]
    }

    pub fn kernels(&self) -> &[f32] {
        &self.kernels
    }

    pub fn biases(&self) -> &[f32] {
        &self.biases
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<Vec<f32>>>> {
        let k = self.kernel_size;
        (0..self.out_channels)
            .map(|o| {
                (0..self.in_channels)
                    .map(|i| self.kernel(o, i).chunks(k).map(<[f32]>::to_vec).collect())
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvResult {
    pub output: Tensor3D,
    /// One tensor per output channel, shaped `in_channels x out_rows x out_cols`:
    /// channel `i` of `intermediates[o]` is input channel `i` convolved with
    /// kernel `[o][i]`, before summation and bias.
    pub intermediates: Vec<Tensor3D>,
}

impl ConvResult {
    /// The `out_rows * out_cols` intermediate map for output `o`, input `i`.
    pub fn intermediate(&self, o: usize, i: usize) -> &[f32] {
        self.intermediates[o].channel(i)
    }
}

/// Sum of elementwise products of two equally sized square matrices given row-major.
pub fn single_conv_step(patch: &[f32], kernel: &[f32]) -> Result<f32> {
    if patch.len() != kernel.len() {
        return Err(Error::config(format!(
            "patch has {} values but kernel has {}",
            patch.len(),
            kernel.len()
        )));
    }
    let side = (patch.len() as f64).sqrt() as usize;
    if patch.is_empty() || side * side != patch.len() {
        return Err(Error::config(format!(
            "{} values do not form a square matrix",
            patch.len()
        )));
    }
    Ok(patch.iter().zip(kernel).fold(0.0f32, |acc, (p, w)| acc + p * w))
}

/// The `k * k` input window (zeros where it overlaps padding) that produces
/// output cell `(out_row, out_col)` from input channel `channel`.
pub fn conv_patch(
    input: &Tensor3D,
    h: &ConvHyper,
    channel: usize,
    out_row: usize,
    out_col: usize,
) -> Result<Vec<f32>> {
    let report = shape_report(input.rows(), input.cols(), h);
    if channel >= input.channels() || out_row >= report.out_rows || out_col >= report.out_cols {
        return Err(Error::config(format!(
            "patch ({channel}, {out_row}, {out_col}) outside {}x{}x{} output",
            input.channels(),
            report.out_rows,
            report.out_cols
        )));
    }
    let k = h.kernel_size;
    let plane = input.channel(channel);
    let mut patch = Vec::with_capacity(k * k);
    for kr in 0..k {
        for kc in 0..k {
            patch.push(padded_at(
                plane,
                input.rows(),
                input.cols(),
                h.padding,
                out_row * h.stride + kr,
                out_col * h.stride + kc,
            ));
        }
    }
    Ok(patch)
}

#[inline]
fn padded_at(plane: &[f32], rows: usize, cols: usize, pad: usize, pr: usize, pc: usize) -> f32 {
    if pr < pad || pc < pad || pr - pad >= rows || pc - pad >= cols {
        0.0
    } else {
        plane[(pr - pad) * cols + (pc - pad)]
    }
}

/// Single-channel correlation of `plane` with `kernel`. Accumulates in the
/// same row-major order as [`single_conv_step`] so the two agree bitwise.
fn correlate_plane(
    plane: &[f32],
    rows: usize,
    cols: usize,
    kernel: &[f32],
    h: &ConvHyper,
    out: &mut [f32],
    out_cols: usize,
) {
    let k = h.kernel_size;
    for (idx, cell) in out.iter_mut().enumerate() {
        let (orow, ocol) = (idx / out_cols, idx % out_cols);
        let (top, left) = (orow * h.stride, ocol * h.stride);
        let mut acc = 0.0f32;
        for kr in 0..k {
            for kc in 0..k {
                let x = padded_at(plane, rows, cols, h.padding, top + kr, left + kc);
                acc += x * kernel[kr * k + kc];
            }
        }
        *cell = acc;
    }
}

pub fn conv2d(input: &Tensor3D, w: &ConvWeights, h: &ConvHyper) -> Result<ConvResult> {
    h.validate()?;
    if input.channels() != h.in_channels {
        return Err(Error::config(format!(
            "input has {} channels, layer expects {}",
            input.channels(),
            h.in_channels
        )));
    }
    if w.in_channels != h.in_channels
        || w.out_channels != h.out_channels
        || w.kernel_size != h.kernel_size
    {
        return Err(Error::config(format!(
            "weights {}x{}x{k}x{k} do not match hyperparameters {}x{}x{hk}x{hk}",
            w.out_channels,
            w.in_channels,
            h.out_channels,
            h.in_channels,
            k = w.kernel_size,
            hk = h.kernel_size
        )));
    }
    let report = shape_report(input.rows(), input.cols(), h);
    if !report.valid {
        return Err(Error::config(format!(
            "kernel {} with padding {} does not fit a {}x{} input",
            h.kernel_size,
            h.padding,
            input.rows(),
            input.cols()
        )));
    }
    let (out_rows, out_cols) = (report.out_rows, report.out_cols);
    let plane = out_rows * out_cols;

    let mut intermediates = Vec::with_capacity(h.out_channels);
    let mut output = vec![0.0f32; h.out_channels * plane];
    for o in 0..h.out_channels {
        let mut maps = vec![0.0f32; h.in_channels * plane];
        for (i, map) in maps.chunks_mut(plane).enumerate() {
            correlate_plane(
                input.channel(i),
                input.rows(),
                input.cols(),
                w.kernel(o, i),
                h,
                map,
                out_cols,
            );
        }
        let bias = w.biases[o];
        for (cell, out) in output[o * plane..(o + 1) * plane].iter_mut().enumerate() {
            let mut sum = 0.0f32;
            for i in 0..h.in_channels {
                sum += maps[i * plane + cell];
            }
            *out = sum + bias;
        }
        intermediates.push(Tensor3D::from_layer((h.in_channels, out_rows, out_cols), maps)?);
    }
    Ok(ConvResult {
        output: Tensor3D::from_layer((h.out_channels, out_rows, out_cols), output)?,
        intermediates,
    })
}

pub fn relu(t: &Tensor3D) -> Tensor3D {
    let data = t.data().iter().map(|&x| x.max(0.0)).collect();
    let (c, r, k) = t.shape();
    Tensor3D::new(c, r, k, data).expect("relu preserves shape and finiteness")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolResult {
    pub output: Tensor3D,
    /// Source `(row, col)` in the input channel for each output cell, in the
    /// output tensor's layout.
    pub argmax: Vec<(usize, usize)>,
}

impl PoolResult {
    pub fn argmax_at(&self, c: usize, r: usize, k: usize) -> (usize, usize) {
        self.argmax[self.output.offset(c, r, k)]
    }
}

/// Max pooling without padding. Ties resolve to the first maximum in
/// row-major window order.
pub fn max_pool(t: &Tensor3D, window: usize, stride: usize) -> Result<PoolResult> {
    if window == 0 || stride == 0 {
        return Err(Error::config("pool window and stride must be >= 1"));
    }
    let report = window_report(t.rows(), t.cols(), window, stride, 0);
    if !report.valid {
        return Err(Error::config(format!(
            "pool window {window} does not fit a {}x{} input",
            t.rows(),
            t.cols()
        )));
    }
    let (out_rows, out_cols) = (report.out_rows, report.out_cols);
    let n = t.channels() * out_rows * out_cols;
    let mut output = Vec::with_capacity(n);
    let mut argmax = Vec::with_capacity(n);
    for c in 0..t.channels() {
        let plane = t.channel(c);
        for orow in 0..out_rows {
            for ocol in 0..out_cols {
                let (top, left) = (orow * stride, ocol * stride);
                let mut best = (top, left);
                let mut best_val = plane[top * t.cols() + left];
                for r in top..top + window {
                    for k in left..left + window {
                        let v = plane[r * t.cols() + k];
                        if v > best_val {
                            best_val = v;
                            best = (r, k);
                        }
                    }
                }
                output.push(best_val);
                argmax.push(best);
            }
        }
    }
    Ok(PoolResult {
        output: Tensor3D::from_layer((t.channels(), out_rows, out_cols), output)?,
        argmax,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlattenResult {
    pub output: Vector1D,
    /// `index_map[i]` is the `(channel, row, col)` that vector entry `i` came from.
    pub index_map: Vec<(usize, usize, usize)>,
}

/// Vector position of tensor element `(c, r, k)` under the flatten ordering.
pub fn flat_index(shape: Shape3, c: usize, r: usize, k: usize) -> usize {
    (c * shape.1 + r) * shape.2 + k
}

pub fn flatten(t: &Tensor3D) -> FlattenResult {
    let (channels, rows, cols) = t.shape();
    let mut index_map = Vec::with_capacity(t.len());
    for c in 0..channels {
        for r in 0..rows {
            for k in 0..cols {
                index_map.push((c, r, k));
            }
        }
    }
    FlattenResult {
        output: Vector1D::new(t.data().to_vec()).expect("tensor data is finite and non-empty"),
        index_map,
    }
}

/// Fully connected weights, row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseWeights {
    outputs: usize,
    inputs: usize,
    weights: Vec<f32>,
    biases: Vec<f32>,
}

impl DenseWeights {
    pub fn new(outputs: usize, inputs: usize, weights: Vec<f32>, biases: Vec<f32>) -> Result<Self> {
        if outputs == 0 || inputs == 0 {
            return Err(Error::config("dense layer needs positive dimensions"));
        }
        if weights.len() != outputs * inputs {
            return Err(Error::config(format!(
                "weight matrix has {} values, expected {outputs}x{inputs}",
                weights.len()
            )));
        }
        if biases.len() != outputs {
            return Err(Error::config(format!(
                "{} biases for {outputs} outputs",
                biases.len()
            )));
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::config("non-finite dense weight"));
        }
        Ok(DenseWeights {
            outputs,
            inputs,
            weights,
            biases,
        })
    }

    pub fn from_rows(rows: &[Vec<f32>], biases: Vec<f32>) -> Result<Self> {
        let inputs = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != inputs) {
            return Err(Error::config("ragged dense weight matrix"));
        }
        Self::new(rows.len(), inputs, rows.concat(), biases)
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn row(&self, o: usize) -> &[f32] {
        &self.weights[o * self.inputs..(o + 1) * self.inputs]
    }

    pub fn biases(&self) -> &[f32] {
        &self.biases
    }

    pub fn to_rows(&self) -> Vec<Vec<f32>> {
        self.weights.chunks(self.inputs).map(<[f32]>::to_vec).collect()
    }
}

pub fn dense(v: &Vector1D, w: &DenseWeights) -> Result<Vector1D> {
    if v.len() != w.inputs {
        return Err(Error::config(format!(
            "dense layer expects {} inputs, got {}",
            w.inputs,
            v.len()
        )));
    }
    let out = (0..w.outputs)
        .map(|o| {
            let dot = w.row(o).iter().zip(v.data()).fold(0.0f32, |acc, (a, b)| acc + a * b);
            dot + w.biases[o]
        })
        .collect();
    Vector1D::from_layer(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxResult {
    pub probabilities: Vector1D,
    /// The largest logit, subtracted before exponentiation.
    pub max_logit: f32,
    /// `exp(logit - max_logit)` per class.
    pub exp_terms: Vec<f32>,
    /// Sum of the exponent terms.
    pub normalizer: f32,
}

/// Numerically stable softmax: exponents are taken after subtracting the
/// maximum logit, with the arithmetic carried out in `f64`.
///
/// Classes far below the maximum (e.g. 1000 units) underflow to exactly 0.
pub fn softmax(logits: &[f32]) -> Result<SoftmaxResult> {
    if logits.is_empty() {
        return Err(Error::config("softmax of an empty vector"));
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::config("softmax input must be finite"));
    }
    let max_logit = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let terms: Vec<f64> = logits
        .iter()
        .map(|&l| (f64::from(l) - f64::from(max_logit)).exp())
        .collect();
    let normalizer: f64 = terms.iter().sum();
    let probabilities = terms.iter().map(|t| (t / normalizer) as f32).collect();
    Ok(SoftmaxResult {
        probabilities: Vector1D::from_layer(probabilities)?,
        max_logit,
        exp_terms: terms.iter().map(|&t| t as f32).collect(),
        normalizer: normalizer as f32,
    })
}
