use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gpdr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpdr")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn toy_dataset(dir: &Path) -> PathBuf {
    let mut text = String::from("f1,f2,f3,label\n");
    for i in 0..40 {
        let class = i % 2;
        let t = i as f64 * 0.61;
        writeln!(text, "{:.4},{:.4},{:.4},{}", t.sin() + 3.0 * class as f64, t.cos(), (t * 1.3).sin() - class as f64, ["yes", "no"][class]).unwrap();
    }
    let path = dir.join("toy.csv");
    std::fs::write(&path, text).unwrap();
    path
}

fn toy_config(dir: &Path) -> PathBuf {
    let data = toy_dataset(dir);
    let text = format!(
        r#"dataset = "{}"
label_column = "label"
methods = ["pca", "mt_dist_euclidean", "amt_gp"]
k = [2]
runs = 2
n_neighbors = 5

[gp]
population = 20
generations = 3
batch_size = 15

[teacher]
epochs = 10

[eval]
folds = 3

[eval.forest]
trees = 8

[eval.decoder]
epochs = 10
"#,
        data.file_name().unwrap().to_string_lossy()
    );
    let path = dir.join("experiment.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_summarize_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_config(dir.path());
    let out = dir.path().join("out");
    let run = gpdr(&["run", "-c", config.to_str().unwrap(), "-o", out.to_str().unwrap(), "--quiet"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let table = stdout(&run);
    assert!(table.contains("MT F_dist (Euclidean)"), "{table}");
    assert!(out.join("config.toml").exists());
    assert_eq!(std::fs::read_dir(out.join("runs")).unwrap().count(), 6);

    let summary = gpdr(&["summarize", "-o", out.to_str().unwrap()]);
    assert!(summary.status.success());
    assert_eq!(stdout(&summary), table);

    let json = gpdr(&["summarize", "-o", out.to_str().unwrap(), "--json"]);
    let parsed: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert!(parsed["cells"].as_array().is_some_and(|c| !c.is_empty()));

    let export = gpdr(&["export-expr", "-o", out.to_str().unwrap(), "--method", "amt_gp", "--k", "2"]);
    assert!(export.status.success(), "{}", String::from_utf8_lossy(&export.stderr));
    let text = stdout(&export);
    assert!(text.contains("X~1 =") && text.contains("X^1 ="), "{text}");

    let rerun = gpdr(&["run", "-c", out.join("config.toml").to_str().unwrap(), "--quiet"]);
    assert!(rerun.status.success(), "{}", String::from_utf8_lossy(&rerun.stderr));
    assert_eq!(stdout(&rerun), table);
}

#[test]
fn validate_data_reports_shape() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy_dataset(dir.path());
    let o = gpdr(&["validate-data", "--dataset", data.to_str().unwrap(), "--label", "label"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("40") && text.contains("yes"), "{text}");
}

#[test]
fn failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let o = gpdr(&["validate-data", "--dataset", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let o = gpdr(&["run", "--dataset", missing.to_str().unwrap(), "--methods", "pca", "--runs", "1"]);
    assert_eq!(o.status.code(), Some(2));

    let o = gpdr(&["export-expr", "-o", dir.path().to_str().unwrap(), "--method", "pca", "--k", "2"]);
    assert_eq!(o.status.code(), Some(2));

    assert!(!gpdr(&["run", "--methods", "tsne"]).status.success());
}
