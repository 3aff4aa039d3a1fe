use cnn_lens_core::document::{deserialize_trace, serialize_trace};
use cnn_lens_core::model::{tiny_vgg_spec, LayerKind, DEFAULT_SEED};
use cnn_lens_core::trace::Activation;
use cnn_lens_core::{Engine, Error, Model, Tensor3D};
use serde_json::Value;

const REFERENCE: &[u8] = include_bytes!("../fixtures/reference_weights.json");

fn reference() -> Model {
    Model::load(REFERENCE).unwrap()
}

fn wavy_input(seed: usize) -> Tensor3D {
    Tensor3D::from_fn(3, 64, 64, |c, r, k| {
        (((r * 3 + k * 5 + c * 11 + seed * 17) % 29) as f32 / 28.0).clamp(0.0, 1.0)
    })
    .unwrap()
}

fn edit_reference(edit: impl FnOnce(&mut Value)) -> Vec<u8> {
    let mut doc: Value = serde_json::from_slice(REFERENCE).unwrap();
    edit(&mut doc);
    serde_json::to_vec(&doc).unwrap()
}

#[test]
fn reference_file_loads() {
    let m = reference();
    let convs = m
        .layers()
        .iter()
        .filter(|l| l.kind == LayerKind::Conv)
        .filter(|l| m.conv_weights(&l.name).is_some())
        .count();
    assert_eq!(convs, 4);
    assert_eq!(m.class_labels().len(), 10);
    assert!(m.class_labels().iter().any(|l| l == "bell pepper"));
    assert!(m.fingerprint().starts_with("sha256:"));
}

#[test]
fn nine_output_biases_name_the_layer() {
    let bytes = edit_reference(|doc| {
        doc["weights"]["output"]["bias"].as_array_mut().unwrap().pop();
    });
    match Model::load(&bytes) {
        Err(Error::ShapeMismatch { layer, .. }) => assert_eq!(layer, "output"),
        other => panic!("expected shape mismatch, got {other:?}"),
    }
}

#[test]
fn wrong_conv_kernel_names_the_layer() {
    let bytes = edit_reference(|doc| {
        doc["weights"]["conv_2_1"]["kernel"][0][0][0]
            .as_array_mut()
            .unwrap()
            .push(Value::from(0.5));
    });
    assert!(matches!(
        Model::load(&bytes),
        Err(Error::ShapeMismatch { layer, .. }) if layer == "conv_2_1"
    ));

    let bytes = edit_reference(|doc| {
        doc["weights"].as_object_mut().unwrap().remove("conv_1_2");
    });
    assert!(matches!(
        Model::load(&bytes),
        Err(Error::ShapeMismatch { layer, .. }) if layer == "conv_1_2"
    ));
}

#[test]
fn architecture_is_validated() {
    let bytes = edit_reference(|doc| {
        doc["architecture"][0]["stride"] = Value::from(2);
    });
    assert!(matches!(
        Model::load(&bytes),
        Err(Error::ShapeMismatch { layer, .. }) if layer == "conv_1_1"
    ));
    let bytes = edit_reference(|doc| {
        doc["architecture"].as_array_mut().unwrap().remove(4);
    });
    assert!(matches!(
        Model::load(&bytes),
        Err(Error::ShapeMismatch { layer, .. }) if layer == "max_pool_1"
    ));
}

#[test]
fn label_count_is_checked() {
    let bytes = edit_reference(|doc| {
        doc["class_labels"].as_array_mut().unwrap().pop();
    });
    assert!(matches!(Model::load(&bytes), Err(Error::ShapeMismatch { .. })));
}

#[test]
fn truncated_file_is_parse_error() {
    let cut = &REFERENCE[..REFERENCE.len() / 2];
    assert!(matches!(Model::load(cut), Err(Error::Parse(_))));
    assert!(matches!(Model::load(b""), Err(Error::Parse(_))));
}

#[test]
fn version_mismatch() {
    let bytes = edit_reference(|doc| doc["format_version"] = Value::from(2));
    assert!(matches!(
        Model::load(&bytes),
        Err(Error::Version { found: 2, expected: 1, .. })
    ));
}

#[test]
fn tiny_vgg_shapes() {
    let spec = tiny_vgg_spec();
    assert_eq!(spec.len(), 13);
    let m = Model::seeded(DEFAULT_SEED);
    let trace = m.forward_partial(&wavy_input(0), "max_pool_2").unwrap();
    assert_eq!(trace.layers.last().unwrap().output.shape(), vec![10, 13, 13]);
    assert_eq!(m.dense_weights().outputs(), 10);
}

#[test]
fn shape_chain() {
    let trace = reference().forward(&wavy_input(1)).unwrap();
    let expected: Vec<Vec<usize>> = vec![
        vec![10, 62, 62],
        vec![10, 62, 62],
        vec![10, 60, 60],
        vec![10, 60, 60],
        vec![10, 30, 30],
        vec![10, 28, 28],
        vec![10, 28, 28],
        vec![10, 26, 26],
        vec![10, 26, 26],
        vec![10, 13, 13],
        vec![1690],
        vec![10],
        vec![10],
    ];
    assert_eq!(trace.shape_chain(), expected);
}

#[test]
fn forward_is_deterministic() {
    let m = reference();
    let a = m.forward(&wavy_input(2)).unwrap();
    let b = m.forward(&wavy_input(2)).unwrap();
    assert_eq!(serialize_trace(&a), serialize_trace(&b));
}

#[test]
fn partial_traces_are_prefixes() {
    let m = reference();
    let input = wavy_input(3);
    let full = m.forward(&input).unwrap();
    for (i, spec) in tiny_vgg_spec().iter().enumerate() {
        let part = m.forward_partial(&input, &spec.name).unwrap();
        assert_eq!(part.layers.len(), i + 1);
        assert_eq!(part.layers[..], full.layers[..=i]);
    }
    assert_eq!(m.forward_partial(&input, "softmax").unwrap(), full);
}

#[test]
fn every_layer_recomputes_from_previous_output() {
    let m = reference();
    let trace = m.forward(&wavy_input(4)).unwrap();
    for (i, layer) in trace.layers.iter().enumerate() {
        let prev = match i {
            0 => Activation::Tensor(trace.input.clone()),
            _ => trace.layers[i - 1].output.clone(),
        };
        assert_eq!(&m.apply_layer(i, &prev).unwrap(), layer, "layer {}", layer.name);
    }
}

#[test]
fn probabilities_are_valid() {
    let trace = reference().forward(&wavy_input(5)).unwrap();
    let probs = trace.probabilities().unwrap();
    let sum: f64 = probs.data().iter().map(|&p| f64::from(p)).sum();
    assert!((sum - 1.0).abs() <= 1e-6);
    let pred = trace.prediction.as_ref().unwrap();
    assert!(pred.probability > 0.0 && pred.probability <= 1.0);
    assert_eq!(pred.class_index, probs.argmax());
    if let Some(layer) = trace.layers.last() {
        if let cnn_lens_core::LayerDetail::Softmax { exp_terms, normalizer, .. } = &layer.detail {
            for (t, p) in exp_terms.iter().zip(probs.data()) {
                assert!((t / normalizer - p).abs() <= 1e-6);
            }
        } else {
            panic!("last layer is not softmax");
        }
    }
}

#[test]
fn golden_bell_pepper() {
    let golden: Value =
        serde_json::from_slice(include_bytes!("../fixtures/golden/bell_pepper.json")).unwrap();
    let engine = Engine::new(reference());
    let trace = engine.classify_preset("bell_pepper").unwrap();
    let pred = trace.prediction.as_ref().unwrap();
    assert_eq!(pred.label, "bell pepper");
    assert_eq!(golden["prediction"]["label"], "bell pepper");
    assert_eq!(trace.model_fingerprint, golden["model_fingerprint"].as_str().unwrap());
    for (key, actual) in [
        ("logits", trace.logits().unwrap().data()),
        ("probabilities", trace.probabilities().unwrap().data()),
    ] {
        let frozen = golden[key].as_array().unwrap();
        assert_eq!(frozen.len(), 10);
        for (f, a) in frozen.iter().zip(actual) {
            assert!((f.as_f64().unwrap() - f64::from(*a)).abs() <= 1e-5, "{key}: {f} vs {a}");
        }
    }
    for (frozen, layer) in golden["layer_sums"].as_array().unwrap().iter().zip(&trace.layers) {
        assert_eq!(frozen["name"], layer.name.as_str());
        let sum: f64 = layer.output.values().iter().map(|&v| f64::from(v)).sum();
        let want = frozen["sum"].as_f64().unwrap();
        assert!((sum - want).abs() <= 1e-6 * want.abs().max(1.0), "{}: {sum} vs {want}", layer.name);
    }
}

#[test]
fn other_presets_match_goldens() {
    let engine = Engine::new(reference());
    for (id, golden) in [
        ("orange", &include_bytes!("../fixtures/golden/orange.json")[..]),
        ("lifeboat", &include_bytes!("../fixtures/golden/lifeboat.json")[..]),
    ] {
        let golden: Value = serde_json::from_slice(golden).unwrap();
        let pred = engine.classify_preset(id).unwrap().prediction.unwrap();
        assert_eq!(pred.label, golden["prediction"]["label"].as_str().unwrap());
        assert_eq!(pred.label, id);
    }
}

#[test]
fn reference_trace_document_round_trips() {
    let trace = Engine::new(reference()).classify_preset("bell_pepper").unwrap();
    let bytes = serialize_trace(&trace);
    let back = deserialize_trace(&bytes).unwrap();
    assert_eq!(serialize_trace(&back), bytes);
    assert!(back.input.approx_equal(&trace.input, 1e-7));
}
