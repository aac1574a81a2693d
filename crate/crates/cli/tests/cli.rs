use std::path::Path;
use std::process::{Command, Output};

use skirtlink::spectral::MaskDefinition;

fn skirtlink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skirtlink")).args(args).output().expect("binary runs")
}

fn write_mask(dir: &Path) -> String {
    let path = dir.join("mask.json");
    std::fs::write(&path, MaskDefinition::reference().to_json().unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn designed_filter_validates() {
    let dir = tempfile::tempdir().unwrap();
    let mask = write_mask(dir.path());
    let taps = dir.path().join("taps.csv");
    let taps = taps.to_str().unwrap();

    let design = skirtlink(&["design-filter", "--mask", &mask, "--taps", "65", "--out", taps]);
    assert!(design.status.success(), "{}", String::from_utf8_lossy(&design.stderr));
    assert_eq!(std::fs::read_to_string(taps).unwrap().lines().count(), 65);

    let check = skirtlink(&["validate-mask", "--taps", taps, "--mask", &mask]);
    assert_eq!(check.status.code(), Some(0), "{}", String::from_utf8_lossy(&check.stdout));
}

#[test]
fn oversized_filter_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mask = write_mask(dir.path());
    let taps = dir.path().join("loud.csv");
    std::fs::write(&taps, "0.5\n3.0\n0.5\n").unwrap();

    let check = skirtlink(&["validate-mask", "--taps", taps.to_str().unwrap(), "--mask", &mask]);
    assert_eq!(check.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&check.stdout).contains("VIOLATION"));
}

#[test]
fn missing_inputs_exit_with_error_code() {
    let check = skirtlink(&["validate-mask", "--taps", "/nonexistent/taps.csv", "--mask", "/nonexistent/mask.json"]);
    assert_eq!(check.status.code(), Some(2));
}

#[test]
fn run_writes_results_and_replays_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scenario.json");
    std::fs::write(
        &config,
        r#"{"scheme":"ssf","equalizer":"thp","M":[64],"snr_db":[40.0],"n_symbols":20000,"n_channels":2,"seed":5}"#,
    )
    .unwrap();
    let first = dir.path().join("first");
    let out = skirtlink(&["run", "--config", config.to_str().unwrap(), "--out", first.to_str().unwrap(), "--threads", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(first.join("results.csv")).unwrap();
    assert!(csv.lines().next().unwrap().starts_with("scheme,"));
    assert_eq!(csv.lines().count(), 2);
    assert!(first.join("envelope.csv").exists());

    let second = dir.path().join("second");
    let manifest = first.join("manifest.json");
    let out = skirtlink(&["run", "--config", manifest.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(second.join("results.csv")).unwrap(), csv);
}

#[test]
fn seed_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scenario.json");
    std::fs::write(
        &config,
        r#"{"scheme":"ssf","equalizer":"le","M":[1024],"snr_db":[40.0],"n_symbols":10000,"n_channels":1,"seed":5}"#,
    )
    .unwrap();
    let read = |seed: &str, name: &str| {
        let out_dir = dir.path().join(name);
        let out = skirtlink(&["run", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--seed", seed]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()
    };
    let a = read("5", "a");
    let b = read("6", "b");
    assert!(a.contains("\"seed\": 5") && b.contains("\"seed\": 6"));
}
