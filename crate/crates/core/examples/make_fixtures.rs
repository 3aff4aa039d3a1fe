//! Regenerates the bundled fixtures:
//!
//! * `fixtures/presets/*.png`: synthetic preset photos,
//! * `fixtures/reference_weights.json`: a hand-built color-detector model,
//! * `fixtures/golden/*.json`: frozen summaries of the preset traces.
//!
//! The reference model is not trained. Its first three channels in every
//! convolution compute interpretable color responses ("red", "orange",
//! "blue") and carry them through 3x3 box filters; the remaining channels
//! hold small seeded random kernels so every view has texture. The dense
//! layer reads the color channels for the bell pepper, orange and lifeboat
//! classes and only small random weights elsewhere.
//!
//! Run with `cargo run -p cnn-lens-core --example make_fixtures`. Presets
//! are embedded at compile time, so run it twice after changing images.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use cnn_lens_core::layers::{ConvWeights, DenseWeights};
use cnn_lens_core::model::{tiny_vgg_spec, LayerParams, Normalization};
use cnn_lens_core::{presets, Engine, Model};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const LABELS: [&str; 10] = [
    "lifeboat",
    "ladybug",
    "pizza",
    "bell pepper",
    "school bus",
    "koala",
    "espresso",
    "red panda",
    "orange",
    "sport car",
];
const SEED: u64 = 0x5EED_CAFE;
const COLOR_CHANNELS: usize = 3;

fn write_png(path: &Path, img: &image::RgbImage) {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png).unwrap();
    fs::write(path, buf.into_inner()).unwrap();
}

fn inside_ellipse(x: f32, y: f32, cx: f32, cy: f32, rx: f32, ry: f32) -> bool {
    let (dx, dy) = ((x - cx) / rx, (y - cy) / ry);
    dx * dx + dy * dy <= 1.0
}

/// A glossy red pepper with a green stem on white, deliberately non-square.
fn bell_pepper() -> image::RgbImage {
    image::RgbImage::from_fn(120, 96, |x, y| {
        let (x, y) = (x as f32, y as f32);
        if inside_ellipse(x, y, 60.0, 20.0, 5.0, 10.0) {
            return image::Rgb([40, 120, 30]);
        }
        let lobes = [(46.0, 56.0), (74.0, 56.0), (60.0, 62.0)];
        if lobes.iter().any(|&(cx, cy)| inside_ellipse(x, y, cx, cy, 22.0, 30.0)) {
            let shade = ((x - 60.0).abs() / 40.0).min(1.0);
            let highlight = inside_ellipse(x, y, 50.0, 44.0, 4.0, 9.0);
            return if highlight {
                image::Rgb([250, 170, 170])
            } else {
                image::Rgb([(215.0 - 60.0 * shade) as u8, 22, 28])
            };
        }
        image::Rgb([255, 255, 255])
    })
}

fn orange() -> image::RgbImage {
    image::RgbImage::from_fn(80, 80, |x, y| {
        let (x, y) = (x as f32, y as f32);
        if inside_ellipse(x, y, 40.0, 42.0, 30.0, 29.0) {
            let dimple = ((x * 1.7).sin() * (y * 1.3).cos() * 12.0) as i32;
            return image::Rgb([250, (150 + dimple) as u8, 20]);
        }
        if inside_ellipse(x, y, 40.0, 12.0, 6.0, 3.0) {
            return image::Rgb([60, 110, 40]);
        }
        image::Rgb([245, 245, 240])
    })
}

fn lifeboat() -> image::RgbImage {
    image::RgbImage::from_fn(100, 70, |x, y| {
        let (xf, yf) = (x as f32, y as f32);
        let hull = yf > 30.0 && yf < 42.0 && (xf - 50.0).abs() < 30.0 - (yf - 30.0);
        if hull {
            return image::Rgb([240, 110, 20]);
        }
        if yf >= 36.0 {
            let wave = ((xf * 0.4 + yf * 0.7).sin() * 15.0) as i32;
            return image::Rgb([20, (80 + wave) as u8, 170]);
        }
        image::Rgb([170, 200, 235])
    })
}

fn build_reference_model() -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let box_kernel = [1.0f32 / 9.0; 9];
    let mut convs = Vec::new();
    for spec in tiny_vgg_spec() {
        let LayerParams::Conv(h) = spec.params else { continue };
        let cin = h.in_channels;
        let mut kernels = Vec::with_capacity(h.out_channels * cin * 9);
        let mut biases = Vec::with_capacity(h.out_channels);
        for o in 0..h.out_channels {
            for i in 0..cin {
                let kernel: Vec<f32> = if o < COLOR_CHANNELS {
                    let weight = if cin == 3 {
                        // red = R - G, orange = (R + G) / 2 - B, blue = B - (R + G) / 2
                        let mix = [[1.0, -1.0, 0.0], [0.5, 0.5, -1.0], [-0.5, -0.5, 1.0]];
                        mix[o][i]
                    } else if i == o {
                        1.0
                    } else {
                        0.0
                    };
                    box_kernel.iter().map(|b| b * weight).collect()
                } else {
                    (0..9).map(|_| rng.random_range(-0.3f32..0.3)).collect()
                };
                kernels.extend(kernel);
            }
            biases.push(if o < COLOR_CHANNELS {
                0.0
            } else {
                rng.random_range(-0.05f32..0.05)
            });
        }
        convs.push(ConvWeights::new(h.out_channels, cin, 3, kernels, biases).unwrap());
    }

    // Dense rows over the 10x13x13 feature map; color channel c occupies
    // indices c*169 .. (c+1)*169.
    let plane = 169;
    let gain = 6.0 / plane as f32;
    let mut rows = Vec::new();
    for label in LABELS {
        let per_channel: [f32; COLOR_CHANNELS] = match label {
            "bell pepper" => [2.0, -1.0, -1.0],
            "orange" => [-1.0, 2.0, -1.0],
            "lifeboat" => [-1.0, 0.5, 1.5],
            _ => [0.0; COLOR_CHANNELS],
        };
        let row = (0..1690)
            .map(|idx| {
                let noise = rng.random_range(-0.002f32..0.002);
                match per_channel.get(idx / plane) {
                    Some(w) => w * gain + noise,
                    None => noise,
                }
            })
            .collect();
        rows.push(row);
    }
    let biases = (0..10).map(|_| rng.random_range(-0.01f32..0.01)).collect();
    let dense = DenseWeights::from_rows(&rows, biases).unwrap();
    let labels = LABELS.iter().map(|s| s.to_string()).collect();
    Model::new(convs, dense, labels, Normalization::default()).unwrap()
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    fs::create_dir_all(root.join("presets")).unwrap();
    fs::create_dir_all(root.join("golden")).unwrap();

    write_png(&root.join("presets/bell_pepper.png"), &bell_pepper());
    write_png(&root.join("presets/orange.png"), &orange());
    write_png(&root.join("presets/lifeboat.png"), &lifeboat());

    let model = build_reference_model();
    let weights = model.to_weights_json();
    fs::write(root.join("reference_weights.json"), &weights).unwrap();

    // Golden summaries come from the file as it will be loaded by clients.
    let engine = Engine::new(Model::load(&weights).unwrap());
    for preset in presets::PRESETS {
        let bytes = fs::read(root.join(format!("presets/{}.png", preset.id))).unwrap();
        if bytes != preset.bytes {
            eprintln!("preset {} changed on disk; rebuild and rerun to refresh goldens", preset.id);
            continue;
        }
        let trace = engine.classify_preset(preset.id).unwrap();
        let pred = trace.prediction.clone().unwrap();
        println!("{:>12}: {} ({:.4})", preset.id, pred.label, pred.probability);
        let layer_sums: Vec<_> = trace
            .layers
            .iter()
            .map(|l| json!({ "name": l.name, "sum": l.output.values().iter().map(|&v| f64::from(v)).sum::<f64>() }))
            .collect();
        let golden = json!({
            "preset": preset.id,
            "model_fingerprint": trace.model_fingerprint,
            "prediction": { "class_index": pred.class_index, "label": pred.label, "probability": pred.probability },
            "logits": trace.logits().unwrap().data(),
            "probabilities": trace.probabilities().unwrap().data(),
            "layer_sums": layer_sums,
        });
        let mut text = serde_json::to_string_pretty(&golden).unwrap();
        text.push('\n');
        fs::write(root.join(format!("golden/{}.json", preset.id)), text).unwrap();
    }
}
