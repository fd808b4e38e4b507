mod common;

use std::path::Path;
use std::process::{Command, Output};

use spikecast::synthetic::generate;

fn spikecast(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spikecast"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .unwrap()
}

fn write_prices(dir: &Path) {
    let data = generate(&common::planted_single()).unwrap();
    std::fs::write(dir.join("prices.csv"), data.table.to_csv().unwrap()).unwrap();
}

#[test]
fn unknown_flag_exits_one_with_help() {
    let dir = tempfile::tempdir().unwrap();
    let out = spikecast(dir.path(), &["label", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--bogus"));
    assert!(err.contains("Usage:"));
}

#[test]
fn missing_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = spikecast(dir.path(), &["ingest", "--in", "nope.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn label_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write_prices(dir.path());
    let out = spikecast(dir.path(), &["label", "--in", "prices.csv", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let labels = std::fs::read_to_string(dir.path().join("out/labels.csv")).unwrap();
    let prices = std::fs::read_to_string(dir.path().join("prices.csv")).unwrap();
    // Header plus one label per year after the first.
    assert_eq!(labels.lines().count(), prices.lines().count() - 1);
    let manifest = spikecast::cli::manifest::read(&dir.path().join("out")).unwrap();
    let entry = &manifest.runs["label"];
    assert_eq!(entry.seed, 3);
    assert_eq!(entry.inputs.len(), 1);
    assert_eq!(entry.inputs[0].sha256.len(), 64);
    assert_eq!(entry.started_at, "2023-11-14T22:13:20Z");
}

#[test]
fn rerun_without_force_uses_a_new_subdirectory() {
    let dir = tempfile::tempdir().unwrap();
    write_prices(dir.path());
    assert!(spikecast(dir.path(), &["ingest", "--in", "prices.csv"]).status.success());
    let again = spikecast(dir.path(), &["ingest", "--in", "prices.csv"]);
    let printed = String::from_utf8_lossy(&again.stdout).trim().to_string();
    assert!(printed.contains("run-20231114T221320Z"), "{printed}");
    assert!(dir.path().join(&printed).join("composite.csv").exists());
    let forced = spikecast(dir.path(), &["ingest", "--in", "prices.csv", "--force"]);
    assert_eq!(String::from_utf8_lossy(&forced.stdout).trim(), "out");
}

#[test]
fn distill_writes_one_line_per_year() {
    let dir = tempfile::tempdir().unwrap();
    let out = spikecast(dir.path(), &["distill", "--years", "1960:1962"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("out/summaries.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn ablate_reports_requested_variants() {
    let dir = tempfile::tempdir().unwrap();
    write_prices(dir.path());
    std::fs::write(dir.path().join("run.toml"), "window = 3\nd_prime = 2\nhidden = 4\nattn = 4\nhead_hidden = 4\nepochs = 5\n").unwrap();
    let cfg = ["--config", "run.toml"];
    let run = |args: &[&str]| {
        let all: Vec<&str> = args.iter().chain(cfg.iter()).copied().collect();
        let out = spikecast(dir.path(), &all);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    run(&["distill", "--years", "1960:2023"]);
    run(&["embed", "--summaries", "out/summaries.jsonl", "--dim", "16"]);
    run(&["ablate", "--prices", "prices.csv", "--embeddings", "out/embeddings.jsonl", "--variants", "full,no_news"]);
    let rows = spikecast::eval::read_cv_csv(&std::fs::read_to_string(dir.path().join("out/cv_report.csv")).unwrap()).unwrap();
    let variants: std::collections::BTreeSet<String> = rows.iter().map(|r| r.0.clone()).collect();
    assert_eq!(variants.into_iter().collect::<Vec<_>>(), ["full", "no_news"]);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/cv_summary.json")).unwrap()).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 2);

    run(&["report", "--inputs", "out", "--out", "rep"]);
    assert!(dir.path().join("rep/auc_summary.csv").exists());
}
