//! The recorded forward pass.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;
use crate::layers::ConvHyper;
use crate::model::LayerKind;
use crate::tensor::{Tensor3D, Vector1D};

/// Where the traced input came from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Provenance {
    #[default]
    Upload,
    Preset(String),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Upload => f.write_str("upload"),
            Provenance::Preset(id) => write!(f, "preset:{id}"),
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.strip_prefix("preset:") {
            Some(id) if !id.is_empty() => Ok(Provenance::Preset(id.to_owned())),
            _ if s == "upload" => Ok(Provenance::Upload),
            _ => Err(Error::Parse(format!("unrecognized input provenance `{s}`"))),
        }
    }
}

impl Serialize for Provenance {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Provenance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tensor(Tensor3D),
    Vector(Vector1D),
}

impl Activation {
    /// `[c, r, k]` for tensors, `[n]` for vectors.
    pub fn shape(&self) -> Vec<usize> {
        match self {
            Activation::Tensor(t) => vec![t.channels(), t.rows(), t.cols()],
            Activation::Vector(v) => vec![v.len()],
        }
    }

    pub fn values(&self) -> &[f32] {
        match self {
            Activation::Tensor(t) => t.data(),
            Activation::Vector(v) => v.data(),
        }
    }

    pub fn as_tensor(&self) -> Option<&Tensor3D> {
        match self {
            Activation::Tensor(t) => Some(t),
            Activation::Vector(_) => None,
        }
    }

    pub fn as_vector(&self) -> Option<&Vector1D> {
        match self {
            Activation::Vector(v) => Some(v),
            Activation::Tensor(_) => None,
        }
    }
}

/// Per-kind data recorded next to a layer's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerDetail {
    Conv {
        hyper: ConvHyper,
        /// `[out][in][row][col]`.
        kernels: Vec<Vec<Vec<Vec<f32>>>>,
        biases: Vec<f32>,
        /// One `in_channels x rows x cols` tensor per output channel.
        intermediates: Vec<Tensor3D>,
    },
    Relu,
    MaxPool {
        window: usize,
        stride: usize,
        /// Source `(row, col)` per output cell, in output layout order.
        argmax: Vec<(usize, usize)>,
    },
    Flatten {
        /// Source `(channel, row, col)` per vector index.
        index_map: Vec<(usize, usize, usize)>,
    },
    Dense {
        /// `outputs x inputs`.
        weights: Vec<Vec<f32>>,
        biases: Vec<f32>,
    },
    Softmax {
        max_logit: f32,
        exp_terms: Vec<f32>,
        normalizer: f32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerTrace {
    pub name: String,
    pub kind: LayerKind,
    pub input_shape: Vec<usize>,
    pub output: Activation,
    pub detail: LayerDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class_index: usize,
    pub label: String,
    pub probability: f32,
}

/// A forward pass, layer by layer. A trace cut short by
/// [`forward_partial`](crate::model::Model::forward_partial) has no prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub model_fingerprint: String,
    pub provenance: Provenance,
    pub input: Tensor3D,
    pub layers: Vec<LayerTrace>,
    pub prediction: Option<Prediction>,
}

impl Trace {
    pub fn layer(&self, name: &str) -> Option<&LayerTrace> {
        self.layers.iter().find(|l| l.name == name)
    }

    /// Class probabilities, when the trace reaches the softmax layer.
    pub fn probabilities(&self) -> Option<&Vector1D> {
        self.layers
            .iter()
            .find(|l| l.kind == LayerKind::Softmax)
            .and_then(|l| l.output.as_vector())
    }

    pub fn logits(&self) -> Option<&Vector1D> {
        self.layers
            .iter()
            .find(|l| l.kind == LayerKind::Dense)
            .and_then(|l| l.output.as_vector())
    }

    /// Output shapes in layer order.
    pub fn shape_chain(&self) -> Vec<Vec<usize>> {
        self.layers.iter().map(|l| l.output.shape()).collect()
    }
}
