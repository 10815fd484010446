//! Drives the `mada` binary through the whole pipeline.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

pub fn mada(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mada"))
        .args(args)
        .output()
        .expect("run mada")
}

fn ok(args: &[&str]) {
    let out = mada(args);
    assert!(
        out.status.success(),
        "mada {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Runs ingest through report into `dir`; returns the report table.
pub fn run_pipeline(dir: &Path, seed: u64, jobs: usize) -> String {
    let f = fixtures();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let ont = s(&f.join("ontology.json"));
    let db = s(&f.join("db.json"));
    let d = |name: &str| s(&dir.join(name));
    let seed = seed.to_string();
    let jobs = jobs.to_string();
    let base = ["--jobs", &jobs, "--ontology", &ont, "--db", &db];
    let with = |cmd: &str, rest: &[&str]| {
        let mut v = vec![cmd];
        v.extend(base.iter().copied());
        v.extend(rest.iter().copied());
        v.into_iter().map(String::from).collect::<Vec<_>>()
    };
    let run = |v: Vec<String>| ok(&v.iter().map(String::as_str).collect::<Vec<_>>());

    run(with("ingest", &["--corpus", &s(&f.join("corpus.json")), "--out-dir", &d(""), "--seed", &seed]));
    run(with("delex", &["--corpus", &d("train.json"), "--out", &d("train.delex.json"), "--vocab", &d("vocab.json")]));
    run(with("delex", &["--corpus", &d("test.json"), "--out", &d("test.delex.json")]));
    run(with("build-map", &["--corpus", &d("train.json"), "--out", &d("map.json")]));
    run(with("augment", &["--corpus", &d("train.json"), "--map", &d("map.json"), "--out", &d("aug.jsonl"), "--seed", &seed]));
    for variant in ["raw", "aug"] {
        let model = d(&format!("model.{variant}.json"));
        let mut train = vec!["--corpus".to_string(), d("train.delex.json"), "--out".into(), model.clone(), "--bank".into(), d("bank.json")];
        if variant == "raw" {
            train.push("--raw".into());
        } else {
            train.extend(["--augmented".to_string(), d("aug.jsonl")]);
        }
        run(with("train", &train.iter().map(String::as_str).collect::<Vec<_>>()));
        let decoded = d(&format!("decoded.{variant}.jsonl"));
        run(with("decode", &["--corpus", &d("test.delex.json"), "--model", &model, "--out", &decoded, "--method", "top-k", "--actions", "5", "--seed", &seed]));
        let preds = d(&format!("predictions.{variant}.jsonl"));
        run(with("realize", &["--corpus", &d("test.delex.json"), "--decoded", &decoded, "--bank", &d("bank.json"), "--out", &preds]));
        run(with("evaluate", &["--corpus", &d("test.delex.json"), "--predictions", &preds, "--out", &d(&format!("eval.{variant}.json"))]));
    }
    let out = mada(&["report", "--raw", &d("eval.raw.json"), "--augmented", &d("eval.aug.json"), "--out", &d("report.txt")]);
    assert!(out.status.success());
    String::from_utf8(out.stdout).unwrap()
}

/// Every file under `dir`, sorted by name, with its bytes.
pub fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}
