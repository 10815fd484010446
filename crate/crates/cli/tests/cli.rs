mod common;

use common::{artifacts, fixtures, mada, run_pipeline};

#[test]
fn pipeline_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    run_pipeline(a.path(), 3, 1);
    run_pipeline(b.path(), 3, 1);
    run_pipeline(c.path(), 3, 4);
    let first = artifacts(a.path());
    assert_eq!(first.len(), 19);
    assert_eq!(first, artifacts(b.path()));
    assert_eq!(first, artifacts(c.path()));
}

fn act_numbers(table: &str) -> (f64, f64) {
    let line = table.lines().find(|l| l.starts_with("Act #")).unwrap();
    let v: Vec<f64> = line[5..].split_whitespace().map(|x| x.parse().unwrap()).collect();
    (v[0], v[1])
}

#[test]
fn report_shows_augmented_act_gain() {
    let dir = tempfile::tempdir().unwrap();
    let table = run_pipeline(dir.path(), 1, 2);
    let (raw, aug) = act_numbers(&table);
    assert!(aug > raw, "{table}");
}

#[test]
fn bad_top_p_is_a_validation_error() {
    let f = fixtures();
    let p = |n: &str| f.join(n).to_str().unwrap().to_string();
    let out = mada(&[
        "decode", "--ontology", &p("ontology.json"), "--db", &p("db.json"), "--corpus", &p("corpus.json"),
        "--model", "unused.json", "--out", "unused.jsonl", "--method", "top-p", "--top-p", "1.5",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("top-p"));
}

#[test]
fn missing_file_is_an_io_error() {
    let f = fixtures();
    let p = |n: &str| f.join(n).to_str().unwrap().to_string();
    let out = mada(&["build-map", "--ontology", &p("ontology.json"), "--db", &p("db.json"), "--corpus", "/nonexistent/c.json", "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/c.json"));
}

#[test]
fn invalid_corpus_names_dialog_and_turn() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixtures();
    let text = std::fs::read_to_string(f.join("balance.json")).unwrap();
    let bad = text.replacen("\"hotel\",\n              \"inform\"", "\"spa\",\n              \"inform\"", 1);
    assert_ne!(bad, text);
    let path = dir.path().join("bad.json");
    std::fs::write(&path, bad).unwrap();
    let p = |n: &str| f.join(n).to_str().unwrap().to_string();
    let out = mada(&["build-map", "--ontology", &p("ontology.json"), "--db", &p("db.json"), "--corpus", path.to_str().unwrap(), "--out", dir.path().join("m.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bal00") && err.contains("turn 0"), "{err}");
}

#[test]
fn config_file_sets_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mada.toml");
    std::fs::write(&cfg, "[decode]\ntop_p = 1.5\n").unwrap();
    let f = fixtures();
    let ont = f.join("ontology.json").to_str().unwrap().to_string();
    let db = f.join("db.json").to_str().unwrap().to_string();
    let mut args = vec![
        "--config", cfg.to_str().unwrap(), "decode", "--ontology", &ont, "--db", &db,
        "--corpus", "/nonexistent.json", "--model", "m", "--out", "o",
    ];
    assert_eq!(mada(&args).status.code(), Some(1), "config value is validated");
    args.extend(["--top-p", "0.5"]);
    assert_eq!(mada(&args).status.code(), Some(2), "flag overrides config, then the corpus is missing");
}

#[test]
fn help_documents_flags() {
    let out = mada(&["decode", "--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for flag in ["--method", "--actions", "--gamma", "--top-k", "--top-p", "--seed", "--max-len"] {
        assert!(text.contains(flag), "{flag}");
    }
}

#[test]
fn report_averages_repeated_runs() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, x: f64| {
        let p = dir.path().join(name);
        let json = format!(
            r#"{{"inform":{x},"success":{x},"bleu":{x},"combined":{c},"act_number":2.0,"slot_number":1.0}}"#,
            c = 2.0 * x
        );
        std::fs::write(&p, json).unwrap();
        p.to_str().unwrap().to_string()
    };
    let (a, b, c) = (write("a.json", 10.0), write("b.json", 30.0), write("c.json", 50.0));
    let out = mada(&["report", "--raw", &a, "--raw", &b, "--augmented", &c]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let inform = text.lines().find(|l| l.starts_with("Inform")).unwrap();
    assert_eq!(inform.split_whitespace().collect::<Vec<_>>(), ["Inform", "20.00", "50.00"]);
}
