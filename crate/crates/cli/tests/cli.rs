use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use tversky::model::{ModelFile, TrainingMetadata};
use tversky::{Measure, TverskyParams};

fn tversky(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tversky")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Classes own disjoint blocks of four features; each item drops at most one
/// feature of its block, so same-class Jaccard is >= 0.5 and cross-class is 0.
fn write_clusters(path: &Path, classes: usize, per_class: usize, id_offset: usize) {
    let m = classes * 4;
    let mut text = String::from("id,label");
    for f in 0..m {
        text.push_str(&format!(",f{f}"));
    }
    text.push('\n');
    for c in 0..classes {
        for i in 0..per_class {
            let dropped = (i + id_offset) % 5;
            let row: Vec<&str> = (0..m)
                .map(|f| if f / 4 == c && f % 4 != dropped { "1" } else { "0" })
                .collect();
            text.push_str(&format!("item{}_{c}_{i},class{c},{}\n", id_offset, row.join(",")));
        }
    }
    fs::write(path, text).unwrap();
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn trained_model(dir: &TempDir) -> (PathBuf, PathBuf) {
    let (train, val, model) = (dir.path().join("train.csv"), dir.path().join("val.csv"), dir.path().join("model.toml"));
    write_clusters(&train, 4, 12, 0);
    write_clusters(&val, 4, 6, 1);
    let out = tversky(&[
        "train", "--train", p(&train), "--val", p(&val), "--family", "ts", "--symmetric", "true",
        "--max-iters", "60", "--val-pairs", "2000", "--tune-triplets", "5000", "--seed", "3", "--out", p(&model),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    (model, val)
}

#[test]
fn split_writes_three_files() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("all.csv");
    write_clusters(&data, 2, 5, 0);
    let out_dir = dir.path().join("parts");
    let out = tversky(&["split", "--data", p(&data), "--out-dir", p(&out_dir), "--ratios", "70/10/20", "--seed", "7"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).trim(), "train=7 val=1 test=2");
    for (name, rows) in [("train.csv", 7), ("val.csv", 1), ("test.csv", 2)] {
        let text = fs::read_to_string(out_dir.join(name)).unwrap();
        assert_eq!(text.lines().count(), rows + 1, "{name}");
    }
}

#[test]
fn split_of_missing_file_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = tversky(&["split", "--data", p(&missing), "--out-dir", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.starts_with("error:") && err.contains("nope.csv"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn bad_ratios_and_unknown_flags_exit_2() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("all.csv");
    write_clusters(&data, 2, 5, 0);
    let out = tversky(&["split", "--data", p(&data), "--out-dir", p(dir.path()), "--ratios", "50/10/20"]);
    assert_eq!(out.status.code(), Some(2));
    let out = tversky(&["split", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr(&out).trim_end().lines().count(), 1);
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn symmetric_ts_training_and_eval() {
    let dir = TempDir::new().unwrap();
    let (model_path, val) = trained_model(&dir);
    let model = ModelFile::load(&model_path).unwrap();
    assert_eq!(model.alpha.unwrap().to_bits(), model.beta.unwrap().to_bits());
    assert!(model.training.best_val_accuracy >= 0.95, "{}", model.training.best_val_accuracy);

    let args = ["eval", "--model", p(&model_path), "--data", p(&val), "--triplets", "5000", "--seed", "11"];
    let first = tversky(&args);
    assert!(first.status.success(), "{}", stderr(&first));
    let line = stdout(&first);
    assert!(line.starts_with("family=ts cr=1.000000 f1=1.000000"), "{line}");
    assert_eq!(stdout(&tversky(&args)), line);
}

#[test]
fn single_iteration_still_writes_a_model() {
    let dir = TempDir::new().unwrap();
    let (train, val, model) = (dir.path().join("t.csv"), dir.path().join("v.csv"), dir.path().join("m.toml"));
    write_clusters(&train, 3, 6, 0);
    write_clusters(&val, 3, 4, 2);
    let out = tversky(&[
        "train", "--train", p(&train), "--val", p(&val), "--family", "euclidean", "--max-iters", "1",
        "--val-pairs", "500", "--tune-triplets", "500", "--out", p(&model),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("iter=1 "), "{}", stdout(&out));
    assert_eq!(ModelFile::load(&model).unwrap().training.iterations, 1);
}

#[test]
fn out_of_range_margin_is_rejected() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("d.csv");
    write_clusters(&data, 2, 5, 0);
    let out = tversky(&[
        "train", "--train", p(&data), "--val", p(&data), "--family", "wts", "--margin", "1.5",
        "--out", p(&dir.path().join("m.toml")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error:") && stderr(&out).contains("margin"), "{}", stderr(&out));
}

#[test]
fn threshold_one_predicts_nothing_similar() {
    let dir = TempDir::new().unwrap();
    let (model_path, val) = trained_model(&dir);
    let mut model = ModelFile::load(&model_path).unwrap();
    model.threshold = 1.0;
    model.save(&model_path).unwrap();
    let out = tversky(&["eval", "--model", p(&model_path), "--data", p(&val), "--triplets", "2000"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains(" f1=0.000000 "), "{}", stdout(&out));
}

#[test]
fn feature_name_mismatch_names_the_column() {
    let dir = TempDir::new().unwrap();
    let (model_path, val) = trained_model(&dir);
    let text = fs::read_to_string(&val).unwrap().replacen(",f2,", ",snout,", 1);
    let renamed = dir.path().join("renamed.csv");
    fs::write(&renamed, text).unwrap();

    let out = tversky(&["eval", "--model", p(&model_path), "--data", p(&renamed), "--triplets", "100"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("\"f2\"") && stderr(&out).contains("\"snout\""), "{}", stderr(&out));

    let out = tversky(&["eval", "--model", p(&model_path), "--data", p(&renamed), "--triplets", "100", "--ignore-names"]);
    assert!(out.status.success(), "{}", stderr(&out));
}

fn jaccard_model(dir: &TempDir) -> PathBuf {
    let path = dir.path().join("jaccard.toml");
    let names = vec!["f1".to_string(), "f2".to_string(), "f3".to_string()];
    let meta = TrainingMetadata {
        seed: 0,
        iterations: 0,
        best_val_accuracy: 0.0,
    };
    ModelFile::new(&Measure::Tversky(TverskyParams::jaccard()), names, 0.5, 0.5, meta)
        .unwrap()
        .save(&path)
        .unwrap();
    path
}

#[test]
fn score_reports_value_and_label() {
    let dir = TempDir::new().unwrap();
    let model = jaccard_model(&dir);

    let out = tversky(&["score", "--model", p(&model), "--x", "1,1,0", "--y", "0,1,1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).trim(), "score=0.333333 label=dissimilar");

    let out = tversky(&["score", "--model", p(&model), "--x", "1,0,1", "--y", "1,0,1"]);
    assert_eq!(stdout(&out).trim(), "score=1.000000 label=similar");

    let out = tversky(&["score", "--model", p(&model), "--x", "0,0,0", "--y", "0,0,0"]);
    assert_eq!(stdout(&out).trim(), "score=1.000000 label=similar");
    assert!(stderr(&out).starts_with("warning:"), "{}", stderr(&out));
}

#[test]
fn score_rejects_malformed_rows() {
    let dir = TempDir::new().unwrap();
    let model = jaccard_model(&dir);
    let out = tversky(&["score", "--model", p(&model), "--x", "1,0", "--y", "1,0,1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = tversky(&["score", "--model", p(&model), "--x", "1,2,0", "--y", "1,0,1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error: --x"), "{}", stderr(&out));
}
