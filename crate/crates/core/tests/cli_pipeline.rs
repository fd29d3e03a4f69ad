use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn run(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_counterlens")).args(args).env("RUST_LOG", "warn").output().unwrap();
    assert!(out.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn lines(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn generate_label_build_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let d = |name: &str| tmp.path().join(name).to_str().unwrap().to_string();

    run(&[
        "generate",
        "--count",
        "40",
        "--seed",
        "100",
        "--loads",
        "4",
        "--compute",
        "10",
        "--inputs",
        "2",
        "--renames",
        "1",
        "--out",
        &d("kernels"),
    ]);
    let index = lines(&tmp.path().join("kernels/index.jsonl"));
    assert_eq!(index.len(), 80);
    assert_eq!(index.iter().filter(|e| e["variant_of"].is_null()).count(), 40);

    run(&["label-oracle", "--kernels", &d("kernels"), "--flags", "-O3", "--out", &d("labeled.jsonl")]);
    let labeled = lines(&tmp.path().join("labeled.jsonl"));
    assert_eq!(labeled.len(), 160);

    run(&["build-dataset", "--input", &d("labeled.jsonl"), "--test-count", "8", "--seed", "1", "--out", &d("dataset")]);
    let test = lines(&tmp.path().join("dataset/test.jsonl"));
    assert!(!test.is_empty());
    // every fingerprint lives in exactly one split
    let mut seen = std::collections::HashMap::new();
    for split in ["train", "val", "test"] {
        for rec in lines(&tmp.path().join(format!("dataset/{split}.jsonl"))) {
            let fp = rec["meta"]["fingerprint"].as_str().unwrap().to_string();
            assert_eq!(*seen.entry(fp).or_insert(split), split);
        }
    }

    run(&["export", "--input", &d("dataset/train.jsonl"), "--template", "llama3", "--out", &d("train.llama3.jsonl")]);
    let exported = lines(&tmp.path().join("train.llama3.jsonl"));
    assert!(exported[0]["text"].as_str().unwrap().contains("<|start_header_id|>assistant"));

    run(&["eval", "--test", &d("dataset/test.jsonl"), "--metadata", &d("kernels"), "--out", &d("report")]);
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report/report.json")).unwrap()).unwrap();
    assert_eq!(report["failed_samples"], 0);
    for row in report["rows"].as_array().unwrap() {
        if row["counted"].as_u64().unwrap() > 0 {
            assert_eq!(row["proportions"][0], 1.0, "{row}");
        }
    }
    assert!(tmp.path().join("report/report.md").exists());
    assert!(tmp.path().join("report/histograms/L1_Cache_Hit_Rate.truth.csv").exists());
}

#[test]
fn rename_is_deterministic_and_preserves_structure() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    run(&["generate", "--seed", "7", "--out", dir]);
    let src = tmp.path().join("k00000007.hip");
    let a = run(&["rename", "--input", src.to_str().unwrap(), "--seed", "3"]);
    let b = run(&["rename", "--input", src.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(a, b);
    assert_ne!(a, std::fs::read_to_string(&src).unwrap());
    assert!(a.contains("__global__"));
}

#[test]
fn expand_writes_cross_product() {
    let tmp = tempfile::tempdir().unwrap();
    let d = |name: &str| tmp.path().join(name).to_str().unwrap().to_string();
    run(&["generate", "--count", "2", "--out", &d("k")]);
    run(&[
        "expand",
        "--kernels",
        &d("k"),
        "--flags",
        "-O3",
        "--flags",
        "-O3 -ffast-math",
        "--arch",
        "gfx90a",
        "--arch",
        "gfx942",
        "--out",
        &d("jobs.jsonl"),
    ]);
    assert_eq!(lines(&tmp.path().join("jobs.jsonl")).len(), 8);
}

#[test]
fn bad_arguments_fail_cleanly() {
    let out = Command::new(env!("CARGO_BIN_EXE_counterlens"))
        .args(["generate", "--stores", "0", "--out", "/nonexistent/x"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}
