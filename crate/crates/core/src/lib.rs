//! Introspectable forward propagation for a Tiny VGG image classifier.
//!
//! The engine runs the classifier and records every quantity an explanation
//! UI needs: per-input-channel convolution intermediates, pooling argmax
//! positions, the flatten index map, logits and softmax terms.
//!
//! ```no_run
//! use cnn_lens_core::{document, Engine, Model};
//!
//! let model = Model::load(&std::fs::read("weights.json")?)?;
//! let engine = Engine::new(model);
//! let trace = engine.classify_image(&std::fs::read("pepper.png")?)?;
//! println!("{:?}", trace.prediction);
//! let doc = document::serialize_trace(&trace);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod api;
pub mod canonical;
pub mod document;
pub mod error;
pub mod ingest;
pub mod layers;
pub mod model;
pub mod presets;
pub mod tensor;
pub mod trace;

pub use api::Engine;
pub use error::{Error, Result};
pub use model::Model;
pub use tensor::{approx_equal, Tensor3D, Vector1D};
pub use trace::{Activation, LayerDetail, LayerTrace, Prediction, Provenance, Trace};
