//! The engine's three client calls over byte buffers.
//!
//! These are what the HTTP service exposes and what an in-browser build
//! exports, so both deployments answer identical requests with identical
//! bytes.

use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::document::serialize_trace;
use crate::error::{Error, Result};
use crate::ingest;
use crate::layers::{shape_report, sliding_steps, ConvHyper};
use crate::model::{ArchEntry, Model, Normalization, WEIGHTS_FORMAT_VERSION};
use crate::presets;
use crate::tensor::Tensor3D;
use crate::trace::{Provenance, Trace};

/// Largest input side accepted by the convolution demo.
pub const CONV_DEMO_MAX_INPUT: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvDemoRequest {
    #[serde(rename = "in")]
    pub input: usize,
    pub kernel: usize,
    pub stride: usize,
    #[serde(default)]
    pub padding: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvDemoResponse {
    #[serde(rename = "in")]
    pub input: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// Side of the (square) output; 0 when invalid.
    pub out: usize,
    pub out_rows: usize,
    pub out_cols: usize,
    pub fits_exactly: bool,
    pub valid: bool,
    /// Top-left kernel positions in padded-input coordinates, in visiting order.
    pub steps: Vec<(usize, usize)>,
}

pub fn conv_demo(req: ConvDemoRequest) -> Result<ConvDemoResponse> {
    if req.input == 0 || req.input > CONV_DEMO_MAX_INPUT {
        return Err(Error::config(format!(
            "input size must be between 1 and {CONV_DEMO_MAX_INPUT}"
        )));
    }
    let h = ConvHyper::new(req.kernel, req.stride, req.padding, 1, 1)?;
    let report = shape_report(req.input, req.input, &h);
    Ok(ConvDemoResponse {
        input: req.input,
        kernel: req.kernel,
        stride: req.stride,
        padding: req.padding,
        out: report.out_rows,
        out_rows: report.out_rows,
        out_cols: report.out_cols,
        fits_exactly: report.fits_exactly,
        valid: report.valid,
        steps: sliding_steps(req.input, req.input, &h),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PresetInfo {
    pub id: &'static str,
    pub label: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelInfo<'a> {
    pub format_version: u64,
    pub fingerprint: &'a str,
    pub architecture: Vec<ArchEntry>,
    pub class_labels: &'a [String],
    pub normalization: &'a Normalization,
    pub presets: Vec<PresetInfo>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PresetRequest {
    preset: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClassifyRequest<'a> {
    Image(&'a [u8]),
    Preset(String),
}

impl<'a> ClassifyRequest<'a> {
    /// A body whose first non-whitespace byte is `{` is read as
    /// `{"preset": "<id>"}`; anything else is treated as image bytes.
    pub fn parse(body: &'a [u8]) -> Result<Self> {
        let first = body.iter().find(|b| !b.is_ascii_whitespace());
        if first == Some(&b'{') {
            let req: PresetRequest = serde_json::from_slice(body)
                .map_err(|e| Error::Parse(format!("classify request: {e}")))?;
            Ok(ClassifyRequest::Preset(req.preset))
        } else {
            Ok(ClassifyRequest::Image(body))
        }
    }
}

/// A loaded model plus the ingestion pipeline. Cheap to share behind an `Arc`.
#[derive(Debug, Clone)]
pub struct Engine {
    model: Model,
}

impl Engine {
    pub fn new(model: Model) -> Self {
        Engine { model }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn model_info(&self) -> ModelInfo<'_> {
        ModelInfo {
            format_version: WEIGHTS_FORMAT_VERSION,
            fingerprint: self.model.fingerprint(),
            architecture: self.model.architecture(),
            class_labels: self.model.class_labels(),
            normalization: self.model.normalization(),
            presets: presets::PRESETS
                .iter()
                .map(|p| PresetInfo {
                    id: p.id,
                    label: p.label,
                })
                .collect(),
        }
    }

    pub fn model_info_json(&self) -> Vec<u8> {
        canonical::to_vec(&self.model_info())
    }

    /// Decoded, cropped, resized and normalized model input for `bytes`.
    pub fn prepare_input(&self, bytes: &[u8]) -> Result<Tensor3D> {
        let t = ingest::image_to_input(bytes)?;
        self.model.normalization().apply(&t)
    }

    pub fn classify_image(&self, bytes: &[u8]) -> Result<Trace> {
        let input = self.prepare_input(bytes)?;
        self.model.forward_from(&input, Provenance::Upload)
    }

    pub fn classify_preset(&self, id: &str) -> Result<Trace> {
        let preset =
            presets::find(id).ok_or_else(|| Error::config(format!("unknown preset `{id}`")))?;
        let input = self.prepare_input(preset.bytes)?;
        self.model
            .forward_from(&input, Provenance::Preset(preset.id.to_owned()))
    }

    pub fn classify(&self, request: ClassifyRequest<'_>) -> Result<Trace> {
        match request {
            ClassifyRequest::Image(bytes) => self.classify_image(bytes),
            ClassifyRequest::Preset(id) => self.classify_preset(&id),
        }
    }

    /// `classify` over raw bytes, answering with a trace document.
    pub fn classify_bytes(&self, body: &[u8]) -> Result<Vec<u8>> {
        let trace = self.classify(ClassifyRequest::parse(body)?)?;
        Ok(serialize_trace(&trace))
    }

    /// `conv_demo` over raw JSON bytes.
    pub fn conv_demo_bytes(&self, body: &[u8]) -> Result<Vec<u8>> {
        conv_demo_bytes(body)
    }
}

/// `conv_demo` over raw JSON bytes. Needs no model.
pub fn conv_demo_bytes(body: &[u8]) -> Result<Vec<u8>> {
    let req: ConvDemoRequest = serde_json::from_slice(body)
        .map_err(|e| Error::Parse(format!("conv-demo request: {e}")))?;
    Ok(canonical::to_vec(&conv_demo(req)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_demo_misfit() {
        let r = conv_demo(ConvDemoRequest {
            input: 6,
            kernel: 4,
            stride: 3,
            padding: 0,
        })
        .unwrap();
        assert_eq!((r.out, r.fits_exactly, r.valid), (1, false, true));
        assert_eq!(r.steps, vec![(0, 0)]);
    }

    #[test]
    fn conv_demo_nine_steps() {
        let r = conv_demo(ConvDemoRequest {
            input: 5,
            kernel: 3,
            stride: 1,
            padding: 0,
        })
        .unwrap();
        assert_eq!(r.out, 3);
        assert_eq!(r.steps.len(), 9);
    }

    #[test]
    fn conv_demo_invalid() {
        let r = conv_demo(ConvDemoRequest {
            input: 2,
            kernel: 3,
            stride: 1,
            padding: 0,
        })
        .unwrap();
        assert!(!r.valid);
        assert!(r.steps.is_empty());
        assert!(conv_demo(ConvDemoRequest { input: 5, kernel: 0, stride: 1, padding: 0 }).is_err());
        assert!(conv_demo(ConvDemoRequest { input: 0, kernel: 1, stride: 1, padding: 0 }).is_err());
    }

    #[test]
    fn request_sniffing() {
        assert_eq!(
            ClassifyRequest::parse(br#" {"preset":"orange"}"#).unwrap(),
            ClassifyRequest::Preset("orange".into())
        );
        assert!(ClassifyRequest::parse(br#"{"preset":1}"#).is_err());
        let png = [0x89u8, b'P', b'N', b'G'];
        assert_eq!(ClassifyRequest::parse(&png).unwrap(), ClassifyRequest::Image(&png));
    }

    #[test]
    fn unknown_preset() {
        let engine = Engine::new(Model::seeded(1));
        assert!(matches!(engine.classify_preset("zebra"), Err(Error::Config(_))));
    }

    #[test]
    fn every_preset_classifies() {
        let engine = Engine::new(Model::seeded(1));
        for p in presets::PRESETS {
            let trace = engine.classify_preset(p.id).unwrap();
            assert_eq!(trace.provenance, Provenance::Preset(p.id.into()));
        }
    }
}
