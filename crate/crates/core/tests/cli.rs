mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::fixture;
use relseq::corpus;
use relseq::features::encode_sequence;
use relseq::model::SavedModel;
use serde_json::Value;

fn relseq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relseq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Vec<u8> {
    let out = relseq(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("valid json")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes a small synthetic corpus and returns its config path.
fn small_corpus(dir: &Path, seed: &str) -> std::path::PathBuf {
    let seed_config = dir.join("gen.toml");
    fs::write(
        &seed_config,
        "[generator]\nnum_sequences = 30\n[model.train]\nouter_iterations = 3\nperceptron_epochs = 10\n[eval]\nk = 3\n",
    )
    .unwrap();
    let out = dir.join("corpus");
    ok(&[
        "--config",
        p(&seed_config),
        "--seed",
        seed,
        "--out",
        p(&out),
        "synth",
    ]);
    out.join("config.toml")
}

#[test]
fn extract_threshold_flag_changes_sequence_count() {
    let docs = fixture("corpus/docs");
    let count = |extra: &[&str]| {
        let mut args = vec!["--docs", p(&docs)];
        args.extend_from_slice(extra);
        args.push("extract");
        json(&ok(&args))["sequence_count"].as_u64().unwrap()
    };
    assert_eq!(count(&[]), 1);
    assert_eq!(count(&["--min-cooccur", "2"]), 4);
}

#[test]
fn extract_writes_feature_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("features.tsv");
    let out = ok(&[
        "--docs",
        p(&fixture("corpus/docs")),
        "--lexicons",
        p(&fixture("features/lexicons")),
        "--frames",
        p(&fixture("features/frames.tsv")),
        "--stopwords",
        p(&fixture("features/stopwords.txt")),
        "extract",
        "--features",
        p(&table),
    ]);
    let report = json(&out);
    assert_eq!(report["command"], "extract");
    assert_eq!(report["sequences"][0]["length"], 5);
    let text = fs::read_to_string(&table).unwrap();
    assert_eq!(text.lines().count(), 1 + 5);
}

#[test]
fn empty_document_dir_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = relseq(&["--docs", p(dir.path()), "extract"]);
    assert_eq!(out.status.code(), Some(1));
    let err = json(&out.stderr);
    assert_eq!(err["error"]["kind"], "runtime");
    assert!(err["error"]["message"]
        .as_str()
        .unwrap()
        .contains("no documents found"));
}

#[test]
fn bad_usage_and_bad_config_exit_nonzero() {
    let out = relseq(&["--seed", "notanumber", "extract"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out.stderr)["error"]["kind"], "usage");

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "seed = 1\nunknown_key = 3\n").unwrap();
    let out = relseq(&["--config", p(&config), "extract"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out.stderr)["error"]["kind"], "runtime");
}

#[test]
fn train_then_predict_matches_library_decoding() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_corpus(dir.path(), "11");
    let model_path = dir.path().join("model.json");
    let report = dir.path().join("train.json");
    ok(&[
        "--config",
        p(&config),
        "--model",
        p(&model_path),
        "--report",
        p(&report),
        "train",
    ]);
    let train = json(&fs::read(&report).unwrap());
    assert_eq!(train["command"], "train");
    assert!(train["training"]["rounds"].as_u64().unwrap() >= 1);

    let predicted = json(&ok(&[
        "--config",
        p(&config),
        "--model",
        p(&model_path),
        "predict",
    ]));
    let model = SavedModel::from_json(&fs::read_to_string(&model_path).unwrap()).unwrap();
    assert_eq!(
        predicted["model_config_hash"],
        model.training.config_hash.as_str()
    );

    let base = config.parent().unwrap();
    let lexicons =
        relseq::cli::load_lexicons(&relseq::cli::RunConfig::load(&config).unwrap()).unwrap();
    let sequences: Vec<_> = corpus::load_documents(&base.join("docs"))
        .unwrap()
        .iter()
        .flat_map(|d| corpus::extract_pair_sequences(d, 5))
        .collect();
    let entries = predicted["predictions"].as_array().unwrap();
    assert_eq!(entries.len(), sequences.len());
    for (entry, seq) in entries.iter().zip(&sequences) {
        let p = model
            .predict(&encode_sequence(seq, &lexicons).contents)
            .unwrap();
        let signs: Vec<i64> = p
            .states
            .iter()
            .map(|&s| if s == 0 { 1 } else { -1 })
            .collect();
        assert_eq!(entry["doc_id"], seq.doc_id.as_str());
        assert_eq!(entry["states"], serde_json::json!(signs));
        assert_eq!(entry["has_change"], p.has_change());
    }

    let eval = json(&ok(&[
        "--config",
        p(&config),
        "--model",
        p(&model_path),
        "evaluate",
    ]));
    assert!(eval["metrics"]["averaged_f"].as_f64().unwrap() > 0.5);
}

#[test]
fn cv_output_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_corpus(dir.path(), "4");
    let run = |workers: &str| ok(&["--config", p(&config), "--workers", workers, "cv"]);
    let one = run("1");
    assert_eq!(one, run("4"));
    let report = json(&one);
    assert_eq!(report["per_fold"].as_array().unwrap().len(), 3);
    let other_seed = ok(&["--config", p(&config), "--seed", "5", "cv"]);
    assert_ne!(json(&other_seed)["config_hash"], report["config_hash"]);
}
