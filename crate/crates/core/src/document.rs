//! Trace documents: the JSON form of a [`Trace`] served to clients.
//!
//! Documents are canonical. Field order is fixed and every float carries
//! nine significant digits, so deserializing and reserializing a document
//! reproduces it byte for byte.

use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::error::{Error, Result};
use crate::model::tiny_vgg_spec;
use crate::tensor::{max_abs_diff, Tensor3D};
use crate::trace::{LayerTrace, Prediction, Provenance, Trace};

pub const TRACE_SCHEMA_VERSION: u64 = 1;

#[derive(Serialize)]
struct DocumentOut<'a> {
    schema_version: u64,
    model_fingerprint: &'a str,
    provenance: &'a Provenance,
    input: &'a Tensor3D,
    layers: &'a [LayerTrace],
    prediction: &'a Option<Prediction>,
}

#[derive(Deserialize)]
struct DocumentIn {
    schema_version: u64,
    model_fingerprint: String,
    provenance: Provenance,
    input: Tensor3D,
    layers: Vec<LayerTrace>,
    prediction: Option<Prediction>,
}

#[derive(Deserialize)]
struct SchemaProbe {
    schema_version: u64,
}

pub fn serialize_trace(trace: &Trace) -> Vec<u8> {
    canonical::to_vec(&DocumentOut {
        schema_version: TRACE_SCHEMA_VERSION,
        model_fingerprint: &trace.model_fingerprint,
        provenance: &trace.provenance,
        input: &trace.input,
        layers: &trace.layers,
        prediction: &trace.prediction,
    })
}

fn version_error(found: u64) -> Error {
    Error::Version {
        what: "trace schema",
        found,
        expected: TRACE_SCHEMA_VERSION,
    }
}

pub fn deserialize_trace(bytes: &[u8]) -> Result<Trace> {
    let doc: DocumentIn = match serde_json::from_slice(bytes) {
        Ok(doc) => doc,
        Err(e) => {
            if let Ok(probe) = serde_json::from_slice::<SchemaProbe>(bytes) {
                if probe.schema_version != TRACE_SCHEMA_VERSION {
                    return Err(version_error(probe.schema_version));
                }
            }
            return Err(Error::Parse(format!("trace document: {e}")));
        }
    };
    if doc.schema_version != TRACE_SCHEMA_VERSION {
        return Err(version_error(doc.schema_version));
    }
    let trace = Trace {
        model_fingerprint: doc.model_fingerprint,
        provenance: doc.provenance,
        input: doc.input,
        layers: doc.layers,
        prediction: doc.prediction,
    };
    validate_structure(&trace)?;
    Ok(trace)
}

/// Layer records must follow the Tiny VGG order, chain shapes, and be
/// complete whenever a prediction is present.
fn validate_structure(trace: &Trace) -> Result<()> {
    let spec = tiny_vgg_spec();
    for (i, expected) in spec.iter().enumerate() {
        let Some(record) = trace.layers.get(i) else {
            if trace.prediction.is_some() {
                return Err(Error::Parse(format!(
                    "missing layer record `{}`",
                    expected.name
                )));
            }
            break;
        };
        if record.name != expected.name {
            return Err(Error::Parse(format!(
                "missing layer record `{}` (found `{}` in its place)",
                expected.name, record.name
            )));
        }
        if record.kind != expected.kind {
            return Err(Error::Parse(format!(
                "layer record `{}` has kind {:?}, expected {:?}",
                record.name, record.kind, expected.kind
            )));
        }
        let prev_shape = match i {
            0 => vec![trace.input.channels(), trace.input.rows(), trace.input.cols()],
            _ => trace.layers[i - 1].output.shape(),
        };
        if record.input_shape != prev_shape {
            return Err(Error::Parse(format!(
                "layer record `{}` takes {:?} but the previous output is {:?}",
                record.name, record.input_shape, prev_shape
            )));
        }
    }
    if trace.layers.len() > spec.len() {
        return Err(Error::Parse(format!(
            "unexpected layer record `{}`",
            trace.layers[spec.len()].name
        )));
    }
    Ok(())
}

/// Largest absolute difference between two traces' values for one layer.
/// `max_abs` is `None` when the layer is missing from either trace or the
/// shapes disagree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerDiff {
    pub name: String,
    pub max_abs: Option<f32>,
}

/// Compares the input and every layer output of two traces.
pub fn trace_diff(a: &Trace, b: &Trace) -> Vec<LayerDiff> {
    let mut diffs = vec![LayerDiff {
        name: "input".into(),
        max_abs: a.input.max_abs_diff(&b.input),
    }];
    for spec in tiny_vgg_spec() {
        let (la, lb) = (a.layer(&spec.name), b.layer(&spec.name));
        if la.is_none() && lb.is_none() {
            continue;
        }
        let max_abs = match (la, lb) {
            (Some(x), Some(y)) if x.output.shape() == y.output.shape() => {
                Some(max_abs_diff(x.output.values(), y.output.values()))
            }
            _ => None,
        };
        diffs.push(LayerDiff {
            name: spec.name,
            max_abs,
        });
    }
    diffs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Model;

    fn sample_trace() -> Trace {
        let m = Model::seeded(11);
        let input = Tensor3D::from_fn(3, 64, 64, |c, r, k| ((c * 31 + r * 7 + k * 3) % 17) as f32 / 16.0)
            .unwrap();
        m.forward_from(&input, Provenance::Preset("stripes".into())).unwrap()
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let trace = sample_trace();
        let bytes = serialize_trace(&trace);
        let back = deserialize_trace(&bytes).unwrap();
        assert_eq!(back, trace);
        assert_eq!(serialize_trace(&back), bytes);
    }

    #[test]
    fn rejects_other_schema_versions() {
        let bytes = serialize_trace(&sample_trace());
        let text = String::from_utf8(bytes).unwrap();
        let bumped = text.replacen("\"schema_version\":1", "\"schema_version\":999", 1);
        assert!(matches!(
            deserialize_trace(bumped.as_bytes()),
            Err(Error::Version { found: 999, .. })
        ));
        assert!(matches!(
            deserialize_trace(br#"{"schema_version":999}"#),
            Err(Error::Version { found: 999, .. })
        ));
    }

    #[test]
    fn missing_layer_is_named() {
        let mut trace = sample_trace();
        trace.layers.remove(1);
        let err = deserialize_trace(&serialize_trace(&trace)).unwrap_err();
        assert!(matches!(&err, Error::Parse(msg) if msg.contains("relu_1_1")), "{err}");

        let mut trace = sample_trace();
        trace.layers.pop();
        let err = deserialize_trace(&serialize_trace(&trace)).unwrap_err();
        assert!(matches!(&err, Error::Parse(msg) if msg.contains("softmax")), "{err}");
    }

    #[test]
    fn prefix_traces_are_accepted() {
        let m = Model::seeded(2);
        let input = Tensor3D::zeros(3, 64, 64).unwrap();
        let partial = m.forward_partial(&input, "max_pool_1").unwrap();
        let back = deserialize_trace(&serialize_trace(&partial)).unwrap();
        assert_eq!(back.layers.len(), 5);
    }

    #[test]
    fn garbage_is_a_parse_error() {
        assert!(matches!(deserialize_trace(b"{\"schema_"), Err(Error::Parse(_))));
    }

    #[test]
    fn diff_of_identical_traces_is_zero() {
        let t = sample_trace();
        let diffs = trace_diff(&t, &t);
        assert_eq!(diffs.len(), 14);
        assert!(diffs.iter().all(|d| d.max_abs == Some(0.0)));
    }
}
