//! Tiny VGG: the fixed architecture, its weights file, and the traced forward pass.
//!
//! ```text
//! input 3x64x64
//!   conv_1_1 -> relu_1_1 -> conv_1_2 -> relu_1_2 -> max_pool_1
//!   conv_2_1 -> relu_2_1 -> conv_2_2 -> relu_2_2 -> max_pool_2
//!   flatten (1690) -> output (dense, 10) -> softmax
//! ```
//!
//! Every convolution uses ten 3x3 kernels with stride 1 and no padding; both
//! pools are 2x2 with stride 2.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::canonical;
use crate::error::{Error, Result};
use crate::layers::{self, ConvHyper, ConvWeights, DenseWeights};
use crate::tensor::{Shape3, Tensor3D};
use crate::trace::{Activation, LayerDetail, LayerTrace, Prediction, Provenance, Trace};

pub const WEIGHTS_FORMAT_VERSION: u64 = 1;
pub const INPUT_SHAPE: Shape3 = (3, 64, 64);
pub const NUM_CLASSES: usize = 10;
pub const FLATTEN_LEN: usize = 1690;
/// Seed used by [`Model::seeded`] when no weights file is supplied.
pub const DEFAULT_SEED: u64 = 20_200_804;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    Relu,
    #[serde(rename = "maxpool")]
    MaxPool,
    Flatten,
    Dense,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerParams {
    Conv(ConvHyper),
    Pool { window: usize, stride: usize },
    Dense { inputs: usize, outputs: usize },
    None,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub params: LayerParams,
}

impl LayerSpec {
    fn new(name: &str, kind: LayerKind, params: LayerParams) -> Self {
        LayerSpec {
            name: name.to_owned(),
            kind,
            params,
        }
    }
}

/// The 13 layers after the input, in execution order.
pub fn tiny_vgg_spec() -> Vec<LayerSpec> {
    let conv = |name: &str, cin: usize| {
        LayerSpec::new(
            name,
            LayerKind::Conv,
            LayerParams::Conv(ConvHyper {
                kernel_size: 3,
                stride: 1,
                padding: 0,
                in_channels: cin,
                out_channels: 10,
            }),
        )
    };
    let relu = |name: &str| LayerSpec::new(name, LayerKind::Relu, LayerParams::None);
    let pool = |name: &str| {
        LayerSpec::new(
            name,
            LayerKind::MaxPool,
            LayerParams::Pool {
                window: 2,
                stride: 2,
            },
        )
    };
    vec![
        conv("conv_1_1", 3),
        relu("relu_1_1"),
        conv("conv_1_2", 10),
        relu("relu_1_2"),
        pool("max_pool_1"),
        conv("conv_2_1", 10),
        relu("relu_2_1"),
        conv("conv_2_2", 10),
        relu("relu_2_2"),
        pool("max_pool_2"),
        LayerSpec::new("flatten", LayerKind::Flatten, LayerParams::None),
        LayerSpec::new(
            "output",
            LayerKind::Dense,
            LayerParams::Dense {
                inputs: FLATTEN_LEN,
                outputs: NUM_CLASSES,
            },
        ),
        LayerSpec::new("softmax", LayerKind::Softmax, LayerParams::None),
    ]
}

/// Layer descriptor as written in the weights file's `architecture` list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchEntry {
    pub name: String,
    pub kind: LayerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub padding: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_channels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_channels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<usize>,
}

impl From<&LayerSpec> for ArchEntry {
    fn from(spec: &LayerSpec) -> Self {
        let mut e = ArchEntry {
            name: spec.name.clone(),
            kind: spec.kind,
            kernel_size: None,
            stride: None,
            padding: None,
            in_channels: None,
            out_channels: None,
            window: None,
            inputs: None,
            outputs: None,
        };
        match spec.params {
            LayerParams::Conv(h) => {
                e.kernel_size = Some(h.kernel_size);
                e.stride = Some(h.stride);
                e.padding = Some(h.padding);
                e.in_channels = Some(h.in_channels);
                e.out_channels = Some(h.out_channels);
            }
            LayerParams::Pool { window, stride } => {
                e.window = Some(window);
                e.stride = Some(stride);
            }
            LayerParams::Dense { inputs, outputs } => {
                e.inputs = Some(inputs);
                e.outputs = Some(outputs);
            }
            LayerParams::None => {}
        }
        e
    }
}

/// Per-channel input normalization, applied as `(x - mean) / std` to the
/// `[0, 1]` pixel tensor. The default is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization {
            mean: [0.0; 3],
            std: [1.0; 3],
        }
    }
}

impl Normalization {
    pub fn is_identity(&self) -> bool {
        *self == Self::default()
    }

    pub fn apply(&self, t: &Tensor3D) -> Result<Tensor3D> {
        if self.is_identity() {
            return Ok(t.clone());
        }
        if t.channels() != 3 {
            return Err(Error::config("normalization expects a 3-channel tensor"));
        }
        let plane = t.rows() * t.cols();
        let data = t
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let c = i / plane;
                (x - self.mean[c]) / self.std[c]
            })
            .collect();
        Tensor3D::from_layer(t.shape(), data)
    }

    fn validate(&self) -> Result<()> {
        if self.std.iter().any(|&s| !s.is_finite() || s <= 0.0)
            || self.mean.iter().any(|m| !m.is_finite())
        {
            return Err(Error::Parse(
                "normalization needs finite means and positive standard deviations".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct LayerWeightsRepr<K> {
    kernel: K,
    bias: Vec<f32>,
}

#[derive(Serialize)]
struct WeightsFileOut<'a> {
    format_version: u64,
    architecture: Vec<ArchEntry>,
    class_labels: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    normalization: Option<&'a Normalization>,
    weights: BTreeMap<&'a str, serde_json::Value>,
}

#[derive(Deserialize)]
struct WeightsFileIn {
    format_version: u64,
    architecture: Vec<ArchEntry>,
    class_labels: Vec<String>,
    #[serde(default)]
    normalization: Option<Normalization>,
    weights: HashMap<String, LayerWeightsRepr<serde_json::Value>>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u64,
}

/// A loaded, validated Tiny VGG. Immutable once built.
#[derive(Debug, Clone)]
pub struct Model {
    layers: Vec<LayerSpec>,
    conv_weights: HashMap<String, ConvWeights>,
    dense_weights: DenseWeights,
    class_labels: Vec<String>,
    normalization: Normalization,
    fingerprint: String,
}

fn fingerprint_of(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

impl Model {
    /// Assembles a model from weights listed in conv-layer order
    /// (`conv_1_1`, `conv_1_2`, `conv_2_1`, `conv_2_2`).
    pub fn new(
        conv: Vec<ConvWeights>,
        dense: DenseWeights,
        class_labels: Vec<String>,
        normalization: Normalization,
    ) -> Result<Self> {
        let layers = tiny_vgg_spec();
        let conv_names: Vec<&str> = layers
            .iter()
            .filter(|l| l.kind == LayerKind::Conv)
            .map(|l| l.name.as_str())
            .collect();
        if conv.len() != conv_names.len() {
            return Err(Error::config(format!(
                "expected {} convolution weight sets, got {}",
                conv_names.len(),
                conv.len()
            )));
        }
        let conv_weights = conv_names
            .iter()
            .map(|n| n.to_string())
            .zip(conv)
            .collect();
        let mut model = Model {
            layers,
            conv_weights,
            dense_weights: dense,
            class_labels,
            normalization,
            fingerprint: String::new(),
        };
        model.validate()?;
        model.fingerprint = fingerprint_of(&model.to_weights_json());
        Ok(model)
    }

    /// He-uniform initialization from a ChaCha8 stream seeded with `seed`;
    /// biases start at zero and labels are `class_0` .. `class_9`.
    pub fn seeded(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |n: usize, fan_in: usize| -> Vec<f32> {
            let bound = (6.0 / fan_in as f32).sqrt();
            (0..n).map(|_| rng.random_range(-bound..bound)).collect()
        };
        let conv = tiny_vgg_spec()
            .iter()
            .filter_map(|l| match l.params {
                LayerParams::Conv(h) => Some(h),
                _ => None,
            })
            .map(|h| {
                let k2 = h.kernel_size * h.kernel_size;
                ConvWeights::new(
                    h.out_channels,
                    h.in_channels,
                    h.kernel_size,
                    uniform(h.out_channels * h.in_channels * k2, h.in_channels * k2),
                    vec![0.0; h.out_channels],
                )
                .expect("seeded conv weights match the architecture")
            })
            .collect();
        let dense = DenseWeights::new(
            NUM_CLASSES,
            FLATTEN_LEN,
            uniform(NUM_CLASSES * FLATTEN_LEN, FLATTEN_LEN),
            vec![0.0; NUM_CLASSES],
        )
        .expect("seeded dense weights match the architecture");
        let labels = (0..NUM_CLASSES).map(|i| format!("class_{i}")).collect();
        Model::new(conv, dense, labels, Normalization::default())
            .expect("seeded model satisfies the architecture")
    }

    /// Parses and validates a weights file. Errors name the offending layer.
    pub fn load(bytes: &[u8]) -> Result<Self> {
        let file: WeightsFileIn = match serde_json::from_slice(bytes) {
            Ok(f) => f,
            Err(e) => {
                if let Ok(probe) = serde_json::from_slice::<VersionProbe>(bytes) {
                    if probe.format_version != WEIGHTS_FORMAT_VERSION {
                        return Err(version_error(probe.format_version));
                    }
                }
                return Err(Error::Parse(format!("weights file: {e}")));
            }
        };
        if file.format_version != WEIGHTS_FORMAT_VERSION {
            return Err(version_error(file.format_version));
        }

        let layers = tiny_vgg_spec();
        check_architecture(&layers, &file.architecture)?;
        if let Some(n) = &file.normalization {
            n.validate()?;
        }

        let mut weights = file.weights;
        let mut conv_weights = HashMap::new();
        let mut dense_weights = None;
        for spec in &layers {
            let take = |weights: &mut HashMap<String, LayerWeightsRepr<serde_json::Value>>| {
                weights
                    .remove(&spec.name)
                    .ok_or_else(|| Error::shape(&spec.name, "no weights supplied"))
            };
            match spec.params {
                LayerParams::Conv(h) => {
                    let raw = take(&mut weights)?;
                    let kernel: Vec<Vec<Vec<Vec<f32>>>> = serde_json::from_value(raw.kernel)
                        .map_err(|e| {
                            Error::shape(&spec.name, format!("kernel must be [out][in][kh][kw]: {e}"))
                        })?;
                    let w = ConvWeights::from_nested(&kernel, raw.bias)
                        .map_err(|e| Error::shape(&spec.name, e.to_string()))?;
                    check_conv_dims(&spec.name, &w, &h)?;
                    conv_weights.insert(spec.name.clone(), w);
                }
                LayerParams::Dense { inputs, outputs } => {
                    let raw = take(&mut weights)?;
                    let kernel: Vec<Vec<f32>> = serde_json::from_value(raw.kernel).map_err(|e| {
                        Error::shape(&spec.name, format!("kernel must be [out][in]: {e}"))
                    })?;
                    if kernel.len() != outputs || raw.bias.len() != outputs {
                        return Err(Error::shape(
                            &spec.name,
                            format!(
                                "expected {outputs} kernel rows and {outputs} biases, got {} and {}",
                                kernel.len(),
                                raw.bias.len()
                            ),
                        ));
                    }
                    let w = DenseWeights::from_rows(&kernel, raw.bias)
                        .map_err(|e| Error::shape(&spec.name, e.to_string()))?;
                    if w.inputs() != inputs {
                        return Err(Error::shape(
                            &spec.name,
                            format!("expected {inputs} inputs per row, got {}", w.inputs()),
                        ));
                    }
                    dense_weights = Some(w);
                }
                _ => {}
            }
        }
        if let Some(extra) = weights.keys().next() {
            return Err(Error::shape(extra.as_str(), "weights given for a layer without parameters"));
        }

        let model = Model {
            layers,
            conv_weights,
            dense_weights: dense_weights.expect("architecture contains the dense layer"),
            class_labels: file.class_labels,
            normalization: file.normalization.unwrap_or_default(),
            fingerprint: fingerprint_of(bytes),
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.class_labels.len() != NUM_CLASSES {
            return Err(Error::shape(
                "output",
                format!(
                    "expected {NUM_CLASSES} class labels, got {}",
                    self.class_labels.len()
                ),
            ));
        }
        self.normalization.validate()?;
        for spec in &self.layers {
            match spec.params {
                LayerParams::Conv(h) => {
                    let w = self
                        .conv_weights
                        .get(&spec.name)
                        .ok_or_else(|| Error::shape(&spec.name, "no weights supplied"))?;
                    check_conv_dims(&spec.name, w, &h)?;
                }
                LayerParams::Dense { inputs, outputs } => {
                    let w = &self.dense_weights;
                    if w.inputs() != inputs || w.outputs() != outputs {
                        return Err(Error::shape(
                            &spec.name,
                            format!(
                                "weights are {}x{}, expected {outputs}x{inputs}",
                                w.outputs(),
                                w.inputs()
                            ),
                        ));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Canonical weights-file encoding of this model.
    pub fn to_weights_json(&self) -> Vec<u8> {
        let mut weights = BTreeMap::new();
        for spec in &self.layers {
            let value = match spec.kind {
                LayerKind::Conv => {
                    let w = &self.conv_weights[&spec.name];
                    serde_json::to_value(LayerWeightsRepr {
                        kernel: w.to_nested(),
                        bias: w.biases().to_vec(),
                    })
                }
                LayerKind::Dense => serde_json::to_value(LayerWeightsRepr {
                    kernel: self.dense_weights.to_rows(),
                    bias: self.dense_weights.biases().to_vec(),
                }),
                _ => continue,
            };
            weights.insert(spec.name.as_str(), value.expect("weights are finite"));
        }
        // serde_json::Value stores numbers as f64; converting back through f32
        // keeps the canonical formatting.
        let file = WeightsFileOut {
            format_version: WEIGHTS_FORMAT_VERSION,
            architecture: self.architecture(),
            class_labels: &self.class_labels,
            normalization: (!self.normalization.is_identity()).then_some(&self.normalization),
            weights,
        };
        canonical::to_vec(&F32Values(&file))
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn architecture(&self) -> Vec<ArchEntry> {
        self.layers.iter().map(ArchEntry::from).collect()
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    /// `sha256:<hex>` of the weights file this model was loaded from, or of
    /// its canonical encoding when built in memory.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn conv_weights(&self, layer: &str) -> Option<&ConvWeights> {
        self.conv_weights.get(layer)
    }

    pub fn dense_weights(&self) -> &DenseWeights {
        &self.dense_weights
    }

    pub fn layer_index(&self, name: &str) -> Result<usize> {
        self.layers
            .iter()
            .position(|l| l.name == name)
            .ok_or_else(|| Error::UnknownLayer(name.to_owned()))
    }

    /// Runs layer `index` on `input`, recording its output and detail.
    pub fn apply_layer(&self, index: usize, input: &Activation) -> Result<LayerTrace> {
        let spec = self
            .layers
            .get(index)
            .ok_or_else(|| Error::UnknownLayer(format!("#{index}")))?;
        let wrong_input = || {
            Error::config(format!(
                "layer `{}` cannot take an input of shape {:?}",
                spec.name,
                input.shape()
            ))
        };
        let (output, detail) = match (spec.params, input) {
            (LayerParams::Conv(h), Activation::Tensor(t)) => {
                let w = &self.conv_weights[&spec.name];
                let res = layers::conv2d(t, w, &h)?;
                (
                    Activation::Tensor(res.output),
                    LayerDetail::Conv {
                        hyper: h,
                        kernels: w.to_nested(),
                        biases: w.biases().to_vec(),
                        intermediates: res.intermediates,
                    },
                )
            }
            (LayerParams::Pool { window, stride }, Activation::Tensor(t)) => {
                let res = layers::max_pool(t, window, stride)?;
                (
                    Activation::Tensor(res.output),
                    LayerDetail::MaxPool {
                        window,
                        stride,
                        argmax: res.argmax,
                    },
                )
            }
            (LayerParams::Dense { .. }, Activation::Vector(v)) => {
                let w = &self.dense_weights;
                (
                    Activation::Vector(layers::dense(v, w)?),
                    LayerDetail::Dense {
                        weights: w.to_rows(),
                        biases: w.biases().to_vec(),
                    },
                )
            }
            (LayerParams::None, _) => match (spec.kind, input) {
                (LayerKind::Relu, Activation::Tensor(t)) => {
                    (Activation::Tensor(layers::relu(t)), LayerDetail::Relu)
                }
                (LayerKind::Flatten, Activation::Tensor(t)) => {
                    let res = layers::flatten(t);
                    (
                        Activation::Vector(res.output),
                        LayerDetail::Flatten {
                            index_map: res.index_map,
                        },
                    )
                }
                (LayerKind::Softmax, Activation::Vector(v)) => {
                    let res = layers::softmax(v.data())?;
                    (
                        Activation::Vector(res.probabilities),
                        LayerDetail::Softmax {
                            max_logit: res.max_logit,
                            exp_terms: res.exp_terms,
                            normalizer: res.normalizer,
                        },
                    )
                }
                _ => return Err(wrong_input()),
            },
            _ => return Err(wrong_input()),
        };
        Ok(LayerTrace {
            name: spec.name.clone(),
            kind: spec.kind,
            input_shape: input.shape(),
            output,
            detail,
        })
    }

    fn run(&self, input: &Tensor3D, last: usize, provenance: Provenance) -> Result<Trace> {
        if input.shape() != INPUT_SHAPE {
            return Err(Error::config(format!(
                "model input must be {:?}, got {:?}",
                INPUT_SHAPE,
                input.shape()
            )));
        }
        let mut layers: Vec<LayerTrace> = Vec::with_capacity(last + 1);
        for index in 0..=last {
            let record = {
                let prev = match layers.last() {
                    Some(l) => &l.output,
                    None => &Activation::Tensor(input.clone()),
                };
                self.apply_layer(index, prev)?
            };
            layers.push(record);
        }
        let prediction = (last + 1 == self.layers.len()).then(|| {
            let probs = layers
                .last()
                .and_then(|l| l.output.as_vector())
                .expect("softmax produces a vector");
            let class_index = probs.argmax();
            Prediction {
                class_index,
                label: self.class_labels[class_index].clone(),
                probability: probs.data()[class_index],
            }
        });
        Ok(Trace {
            model_fingerprint: self.fingerprint.clone(),
            provenance,
            input: input.clone(),
            layers,
            prediction,
        })
    }

    pub fn forward(&self, input: &Tensor3D) -> Result<Trace> {
        self.forward_from(input, Provenance::Upload)
    }

    pub fn forward_from(&self, input: &Tensor3D, provenance: Provenance) -> Result<Trace> {
        self.run(input, self.layers.len() - 1, provenance)
    }

    /// The trace up to and including layer `upto`.
    pub fn forward_partial(&self, input: &Tensor3D, upto: &str) -> Result<Trace> {
        let last = self.layer_index(upto)?;
        self.run(input, last, Provenance::Upload)
    }
}

fn version_error(found: u64) -> Error {
    Error::Version {
        what: "weights format",
        found,
        expected: WEIGHTS_FORMAT_VERSION,
    }
}

fn check_architecture(expected: &[LayerSpec], found: &[ArchEntry]) -> Result<()> {
    for (i, spec) in expected.iter().enumerate() {
        let want = ArchEntry::from(spec);
        match found.get(i) {
            Some(entry) if *entry == want => {}
            Some(entry) if entry.name != want.name => {
                return Err(Error::shape(
                    &spec.name,
                    format!("architecture lists `{}` where `{}` belongs", entry.name, spec.name),
                ))
            }
            Some(entry) => {
                return Err(Error::shape(
                    &spec.name,
                    format!("architecture entry {entry:?} differs from Tiny VGG {want:?}"),
                ))
            }
            None => return Err(Error::shape(&spec.name, "missing from architecture")),
        }
    }
    if let Some(extra) = found.get(expected.len()) {
        return Err(Error::shape(&extra.name, "architecture has extra layers"));
    }
    Ok(())
}

fn check_conv_dims(name: &str, w: &ConvWeights, h: &ConvHyper) -> Result<()> {
    if w.out_channels() != h.out_channels
        || w.in_channels() != h.in_channels
        || w.kernel_size() != h.kernel_size
    {
        return Err(Error::shape(
            name,
            format!(
                "kernel is {}x{}x{k}x{k}, expected {}x{}x{hk}x{hk}",
                w.out_channels(),
                w.in_channels(),
                h.out_channels,
                h.in_channels,
                k = w.kernel_size(),
                hk = h.kernel_size
            ),
        ));
    }
    Ok(())
}

/// Serializes a value whose `serde_json::Value` leaves hold `f32` weights,
/// emitting floats through the `f32` path of the canonical formatter.
struct F32Values<'a, T>(&'a T);

impl<T: Serialize> Serialize for F32Values<'_, T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let value = serde_json::to_value(self.0).map_err(serde::ser::Error::custom)?;
        AsF32(&value).serialize(s)
    }
}

struct AsF32<'a>(&'a serde_json::Value);

impl Serialize for AsF32<'_> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::{SerializeMap, SerializeSeq};
        use serde_json::Value;
        match self.0 {
            Value::Number(n) if n.is_f64() => s.serialize_f32(n.as_f64().unwrap_or(0.0) as f32),
            Value::Array(items) => {
                let mut seq = s.serialize_seq(Some(items.len()))?;
                for item in items {
                    seq.serialize_element(&AsF32(item))?;
                }
                seq.end()
            }
            Value::Object(map) => {
                let mut m = s.serialize_map(Some(map.len()))?;
                for (k, v) in map {
                    m.serialize_entry(k, &AsF32(v))?;
                }
                m.end()
            }
            other => other.serialize(s),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_model() -> Model {
        let conv = tiny_vgg_spec()
            .iter()
            .filter_map(|l| match l.params {
                LayerParams::Conv(h) => Some(
                    ConvWeights::new(10, h.in_channels, 3, vec![0.0; 90 * h.in_channels], vec![0.0; 10])
                        .unwrap(),
                ),
                _ => None,
            })
            .collect();
        let dense = DenseWeights::new(10, 1690, vec![0.0; 16900], vec![0.0; 10]).unwrap();
        let labels = (0..10).map(|i| format!("c{i}")).collect();
        Model::new(conv, dense, labels, Normalization::default()).unwrap()
    }

    #[test]
    fn architecture_has_thirteen_layers() {
        let spec = tiny_vgg_spec();
        assert_eq!(spec.len(), 13);
        assert_eq!(spec.last().unwrap().kind, LayerKind::Softmax);
        let mut names: Vec<_> = spec.iter().map(|l| &l.name).collect();
        names.dedup();
        assert_eq!(names.len(), 13);
        assert!(matches!(
            spec[11].params,
            LayerParams::Dense { inputs: 1690, outputs: 10 }
        ));
    }

    #[test]
    fn zero_model_predicts_uniform() {
        let m = zero_model();
        let trace = m.forward(&Tensor3D::zeros(3, 64, 64).unwrap()).unwrap();
        assert!(trace.logits().unwrap().data().iter().all(|&l| l == 0.0));
        assert!(trace
            .probabilities()
            .unwrap()
            .data()
            .iter()
            .all(|&p| (p - 0.1).abs() < 1e-7));
        let pred = trace.prediction.unwrap();
        assert_eq!(pred.class_index, 0);
        assert_eq!(pred.label, "c0");
    }

    #[test]
    fn rejects_wrong_input_shape() {
        let m = zero_model();
        let err = m.forward(&Tensor3D::zeros(3, 32, 32).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn partial_trace() {
        let m = Model::seeded(1);
        let input = Tensor3D::from_fn(3, 64, 64, |c, r, k| ((c + r * k) % 7) as f32 / 7.0).unwrap();
        let one = m.forward_partial(&input, "conv_1_1").unwrap();
        assert_eq!(one.layers.len(), 1);
        assert!(one.prediction.is_none());
        assert_eq!(m.forward_partial(&input, "softmax").unwrap(), m.forward(&input).unwrap());
        assert_eq!(
            m.forward_partial(&input, "nonexistent").unwrap_err(),
            Error::UnknownLayer("nonexistent".into())
        );
    }

    #[test]
    fn weights_json_round_trip() {
        let m = Model::seeded(DEFAULT_SEED);
        let bytes = m.to_weights_json();
        let loaded = Model::load(&bytes).unwrap();
        assert_eq!(loaded.fingerprint(), m.fingerprint());
        assert_eq!(loaded.dense_weights(), m.dense_weights());
        assert_eq!(loaded.conv_weights("conv_2_2"), m.conv_weights("conv_2_2"));
        assert_eq!(loaded.to_weights_json(), bytes);
    }

    #[test]
    fn normalization_block_round_trips() {
        let m = Model::seeded(3);
        let norm = Normalization {
            mean: [0.5, 0.25, 0.125],
            std: [2.0, 1.0, 0.5],
        };
        let conv = ["conv_1_1", "conv_1_2", "conv_2_1", "conv_2_2"]
            .iter()
            .map(|n| m.conv_weights(n).unwrap().clone())
            .collect();
        let with_norm =
            Model::new(conv, m.dense_weights().clone(), m.class_labels().to_vec(), norm).unwrap();
        let loaded = Model::load(&with_norm.to_weights_json()).unwrap();
        assert_eq!(*loaded.normalization(), norm);

        let t = Tensor3D::from_fn(3, 1, 1, |_, _, _| 1.0).unwrap();
        assert_eq!(norm.apply(&t).unwrap().data(), &[0.25, 0.75, 1.75]);
    }

    #[test]
    fn seeded_is_deterministic() {
        assert_eq!(Model::seeded(7).to_weights_json(), Model::seeded(7).to_weights_json());
        assert_ne!(Model::seeded(7).fingerprint(), Model::seeded(8).fingerprint());
    }
}
