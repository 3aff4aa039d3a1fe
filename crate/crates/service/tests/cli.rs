use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cnn_lens_core::document::deserialize_trace;
use serde_json::Value;

fn reference_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/reference_weights.json")
}

fn preset_path(id: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../core/fixtures/presets/{id}.png"))
}

fn cnn_lens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cnn-lens"))
        .args(args)
        .env_remove("CNN_LENS_MODEL")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn classify_writes_a_valid_document() {
    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("trace.json");
    let model = reference_path();
    let image = preset_path("bell_pepper");
    let out = cnn_lens(&[
        "classify",
        "--model",
        model.to_str().unwrap(),
        "--image",
        image.to_str().unwrap(),
        "--out",
        doc.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("bell pepper\t"));

    let bytes = std::fs::read(&doc).unwrap();
    let trace = deserialize_trace(&bytes).unwrap();
    assert_eq!(trace.layers.len(), 13);
    assert_eq!(trace.prediction.unwrap().label, "bell pepper");
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["provenance"], "upload");
}

#[test]
fn model_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_cnn-lens"))
        .args(["classify", "--preset", "orange"])
        .env("CNN_LENS_MODEL", reference_path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("orange\t"));

    // An explicit flag wins over the environment.
    let model = reference_path();
    let out = Command::new(env!("CARGO_BIN_EXE_cnn-lens"))
        .args(["classify", "--preset", "orange", "--model", model.to_str().unwrap()])
        .env("CNN_LENS_MODEL", "/nonexistent/weights.json")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let garbage = dir.path().join("garbage.png");
    std::fs::write(&garbage, b"definitely not an image").unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, b"{\"format_version\": 1").unwrap();
    let model = reference_path();
    let model = model.to_str().unwrap();

    assert_eq!(cnn_lens(&[]).status.code(), Some(2));
    assert_eq!(cnn_lens(&["classify", "--preset", "orange"]).status.code(), Some(2));
    assert_eq!(cnn_lens(&["classify", "--model", model]).status.code(), Some(2));
    assert_eq!(cnn_lens(&["shape", "--in", "6"]).status.code(), Some(2));
    assert_eq!(
        cnn_lens(&["classify", "--model", model, "--image", garbage.to_str().unwrap()])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        cnn_lens(&["classify", "--model", broken.to_str().unwrap(), "--preset", "orange"])
            .status
            .code(),
        Some(4)
    );
    assert_eq!(
        cnn_lens(&["classify", "--model", "/nonexistent.json", "--preset", "orange"])
            .status
            .code(),
        Some(4)
    );
    assert_eq!(
        cnn_lens(&["classify", "--model", model, "--preset", "zebra"]).status.code(),
        Some(1)
    );
}

#[test]
fn shape_reports() {
    for (args, expected) in [
        (&["--in", "64", "--kernel", "3"][..], "out: 62x62\nfits_exactly: true\nvalid: true\n"),
        (
            &["--in", "6", "--kernel", "4", "--stride", "3"][..],
            "out: 1x1\nfits_exactly: false\nvalid: true\n",
        ),
        (&["--in", "2", "--kernel", "5"][..], "out: 0x0\nfits_exactly: false\nvalid: false\n"),
        (
            &["--in", "5", "--kernel", "3", "--stride", "2", "--pad", "1"][..],
            "out: 3x3\nfits_exactly: true\nvalid: true\n",
        ),
    ] {
        let mut full = vec!["shape"];
        full.extend_from_slice(args);
        let out = cnn_lens(&full);
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(stdout(&out), expected, "{args:?}");
    }
}

#[test]
fn trace_diff_between_image_and_preset() {
    let dir = tempfile::tempdir().unwrap();
    let model = reference_path();
    let model = model.to_str().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let c = dir.path().join("c.json");
    let image = preset_path("bell_pepper");
    let runs = [
        vec!["classify", "--model", model, "--image", image.to_str().unwrap(), "--out", a.to_str().unwrap()],
        vec!["classify", "--model", model, "--preset", "bell_pepper", "--out", b.to_str().unwrap()],
        vec!["classify", "--model", model, "--preset", "orange", "--out", c.to_str().unwrap()],
    ];
    for args in &runs {
        assert_eq!(cnn_lens(args).status.code(), Some(0));
    }

    let same = cnn_lens(&["trace-diff", a.to_str().unwrap(), b.to_str().unwrap(), "--tol", "0"]);
    assert_eq!(same.status.code(), Some(0));
    let text = stdout(&same);
    assert_eq!(text.lines().count(), 14);
    assert!(text.lines().all(|l| l.ends_with("\t0e0")), "{text}");

    let differ = cnn_lens(&["trace-diff", a.to_str().unwrap(), c.to_str().unwrap(), "--tol", "1e-6"]);
    assert_eq!(differ.status.code(), Some(1));
    assert!(stdout(&differ).contains("prediction\tdiffers"));

    // Without a tolerance the diff is informational only.
    let report = cnn_lens(&["trace-diff", a.to_str().unwrap(), c.to_str().unwrap()]);
    assert_eq!(report.status.code(), Some(0));

    let missing = cnn_lens(&["trace-diff", a.to_str().unwrap(), "/nonexistent.json"]);
    assert_eq!(missing.status.code(), Some(1));
}
