use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gauss-mlc"))
        .current_dir(dir)
        .env_remove("GAUSS_MLC_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn noiseless_training_is_accurate() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["--seed", "3", "--out-dir", "o", "train", "--k", "3", "--d", "20", "--eps", "0.05"]);
    let o = tmp.path().join("o");
    let r = report(&o);
    let err = r["results"]["err"].as_f64().unwrap();
    assert!(err <= 0.05, "err = {err}");
    for f in ["model.json", "pairs.csv", "trace.csv", "plot_trace_1_2.csv", "report.json"] {
        assert!(o.join(f).exists(), "{f} missing");
    }
    assert_eq!(r["constants"]["pair_epsilon"].as_f64().unwrap(), 0.05 / 9.0);

    // The saved model evaluates to the same holdout error.
    ok(tmp.path(), &["--seed", "3", "--out-dir", "e", "eval", "--model", "o/model.json", "--k", "3", "--d", "20"]);
    let e = report(&tmp.path().join("e"));
    assert_eq!(e["results"]["err"], r["results"]["err"]);
    assert_eq!(e["results"]["decomposition"]["holds"], Value::Bool(true));
}

#[test]
fn runs_are_byte_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |out: &'static str, threads: &'static str| {
        vec!["--seed", "9", "--threads", threads, "--out-dir", out, "train", "--k", "4", "--d", "8", "--eps", "0.1", "--noise", "uniform-flip", "--eta", "0.05"]
    };
    ok(tmp.path(), &args("a", "1"));
    ok(tmp.path(), &args("b", "3"));
    for f in ["model.json", "pairs.csv", "trace.csv", "plot_trace_2_4.csv"] {
        assert_eq!(read(tmp.path().join("a").join(f)), read(tmp.path().join("b").join(f)), "{f} differs");
    }
}

#[test]
fn malformed_config_exits_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"version": 1, "algo": "aggregate-init", "bogus": 3}"#,
        r#"{"algo": "aggregate-init"}"#,
        r#"{"version": 7}"#,
        r#"{"version": 1, "train": {"epsilon": -1.0}}"#,
        r#"not json"#,
    ];
    for (c, body) in cases.iter().enumerate() {
        let cfg = tmp.path().join(format!("c{c}.json"));
        std::fs::write(&cfg, body).unwrap();
        let out = run(tmp.path(), &["--config", cfg.to_str().unwrap(), "--out-dir", "never", "train"]);
        assert_eq!(out.status.code(), Some(2), "{body}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!tmp.path().join("never").exists(), "{body} created output");
    }
    let out = run(tmp.path(), &["--out-dir", "never", "train", "--algo", "aggregate-local3", "--k", "4"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(tmp.path(), &["--out-dir", "never", "train", "--eta", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("never").exists());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"version": 1, "seed": 4, "n": 50, "source": {"truth": {"kind": "hard_instance", "k": 3, "d": 5}, "noise": {"kind": "uniform_flip", "rate": 0.1}}}"#,
    )
    .unwrap();
    ok(tmp.path(), &["--config", "c.json", "--out-dir", "o", "gen-data", "--n", "30"]);
    let r = report(&tmp.path().join("o"));
    assert_eq!(r["config"]["n"], 30);
    assert_eq!(r["config"]["seed"], 4);
    assert_eq!(r["results"]["d"], 5);
    let lines = read(tmp.path().join("o/data.txt"));
    assert!(lines.lines().count() >= 30);
}

#[test]
fn compare_identical_arms_and_mismatched_sources() {
    let tmp = tempfile::tempdir().unwrap();
    ok(
        tmp.path(),
        &["--out-dir", "o", "compare", "--algo-a", "aggregate-init", "--algo-b", "aggregate-init", "--seeds", "2", "--k", "3", "--d", "6", "--n-eval", "5000"],
    );
    let csv = read(tmp.path().join("o/compare.csv"));
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[1], f[2]);
        assert_eq!(f[3].parse::<f64>().unwrap(), 0.0);
    }
    assert_eq!(report(&tmp.path().join("o"))["results"]["sign_test_p"], 1.0);

    let a = tmp.path().join("a.json");
    let b = tmp.path().join("b.json");
    std::fs::write(&a, r#"{"version": 1, "source": {"truth": {"kind": "random_mlc", "k": 3, "d": 6}}}"#).unwrap();
    std::fs::write(&b, r#"{"version": 1, "source": {"truth": {"kind": "random_mlc", "k": 4, "d": 6}}}"#).unwrap();
    let out = run(tmp.path(), &["--out-dir", "m", "compare", "--config-a", "a.json", "--config-b", "b.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sources differ"));
    assert!(!tmp.path().join("m").exists());
}

#[test]
fn training_from_a_dataset_file() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["--seed", "2", "--out-dir", "g", "gen-data", "--k", "3", "--d", "5", "--n", "20000"]);
    ok(
        tmp.path(),
        &["--seed", "2", "--out-dir", "p", "train", "--algo", "perceptron", "--data", "g/data.txt", "--perceptron-n", "20000", "--k", "3", "--d", "5"],
    );
    let r = report(&tmp.path().join("p"));
    assert_eq!(r["results"]["training_data_size"], 20000);
    assert!(r["results"]["err"].as_f64().unwrap() < 0.2);
    // Asking for more examples than the file holds is a run-time failure.
    let out = run(
        tmp.path(),
        &["--out-dir", "q", "train", "--algo", "perceptron", "--data", "g/data.txt", "--perceptron-n", "30000", "--k", "3", "--d", "5"],
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn analysis_commands_write_their_tables() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["--out-dir", "g", "geometry", "--k", "3", "--d", "8", "--n-mc", "20000"]);
    assert_eq!(read(tmp.path().join("g/geometry.csv")).lines().count(), 4);
    ok(tmp.path(), &["--out-dir", "t", "geometry", "--k", "3", "--d", "8", "--trials", "4", "--n-mc", "5000"]);
    assert_eq!(read(tmp.path().join("t/trials.csv")).lines().count(), 5);
    ok(tmp.path(), &["--out-dir", "l", "lowerbound", "--k", "3", "--d", "4", "--l", "2", "--eps", "0.1", "--trials", "2", "--n-schedule", "10,100", "--n-eval", "2000"]);
    assert_eq!(read(tmp.path().join("l/lowerbound.csv")).lines().count(), 3);
    let out = ok(tmp.path(), &["--out-dir", "m", "lemma-lab", "--trials", "4", "--n-mc", "20000"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 failed"));
    let r = report(&tmp.path().join("m"));
    assert_eq!(r["results"]["pgd"]["passed"], 4);
    let out = run(tmp.path(), &["--out-dir", "x", "lemma-lab", "--checks", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}
