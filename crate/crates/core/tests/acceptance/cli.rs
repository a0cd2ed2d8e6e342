//! Byte-level reproducibility of the command-line pipeline.

use std::path::Path;
use std::process::Command;

const SYNTH: &str = r#"{"persons": 3, "records_per_person": 20, "noise_sigma": 2.0, "landmark_noise_px": 0.3}"#;
const CNN: &str = r#"{"cnn": {"learning_rate": 0.01, "batch_size": 16, "epochs": 2, "lr_drops": [1]}}"#;

fn gazekit(dir: &Path, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_gazekit"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn gazekit");
    assert!(
        out.status.success(),
        "gazekit {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Runs synth, normalize, train and eval in `dir`.
pub fn pipeline(dir: &Path) {
    std::fs::write(dir.join("synth.json"), SYNTH).unwrap();
    std::fs::write(dir.join("cnn.json"), CNN).unwrap();
    gazekit(dir, &["synth", "--params", "synth.json", "--seed", "5", "--out", "data"]);
    gazekit(dir, &["normalize", "--manifest", "data/manifest.jsonl", "--out", "store.gzn"]);
    gazekit(
        dir,
        &["train", "--store", "store.gzn", "--estimator", "cnn", "--params", "cnn.json", "--seed", "5", "--model-file", "model.bin"],
    );
    gazekit(
        dir,
        &[
            "eval", "--protocol", "lopo", "--estimator", "cnn", "--params", "cnn.json", "--store", "store.gzn",
            "--quota", "0", "--seed", "5", "--out", "report.json",
        ],
    );
}

pub const COMPARED: [&str; 7] = [
    "data/manifest.jsonl",
    "data/truth.jsonl",
    "store.gzn",
    "store.index.jsonl",
    "model.bin",
    "report.json",
    "report.samples.csv",
];

/// Files that differ between two runs in separate directories.
pub fn determinism() -> Vec<String> {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    COMPARED
        .iter()
        .filter(|f| std::fs::read(a.path().join(f)).unwrap() != std::fs::read(b.path().join(f)).unwrap())
        .map(|f| f.to_string())
        .collect()
}
