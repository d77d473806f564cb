//! Helpers for driving the `ethnoname` binary from tests.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ethnoname_core::training::INIT_STREAM;
use ethnoname_core::{save_model, seeded_rng, Mode, Model, ModelSpec};

pub const FULL_HEADER: &str = "firstname,lastname,prob_asian,prob_black,prob_hispanic,prob_white,race";
pub const LAST_HEADER: &str = "lastname,prob_asian,prob_black,prob_hispanic,prob_white,race";

pub fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ethnoname"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn model_file(dir: &Path, mode: Mode) -> PathBuf {
    let model = Model::init(&ModelSpec::toy_student(mode), &mut seeded_rng(5, INIT_STREAM)).unwrap();
    let path = dir.join(format!("{mode}.json"));
    save_model(&model, &path).unwrap();
    path
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

/// Runs prep → train → distill → predict in `dir` and returns every
/// artifact's bytes.
pub fn pipeline(dir: &Path, seed: &str) -> Vec<(String, Vec<u8>)> {
    let data = dir.join("data");
    let teacher = dir.join("teacher.json");
    let student = dir.join("student.json");
    let input = write(dir, "names.csv", "first,last\nmia,okafor\nli,wang\nNA,NA\njose,ruiz\n");
    let predictions = dir.join("pred.csv");
    let steps: Vec<Vec<&str>> = vec![
        vec!["prep", "--toy", "--output", s(&data), "--seed", seed],
        vec![
            "train",
            "--data",
            s(&data),
            "--model",
            s(&teacher),
            "--preset",
            "toy",
            "--epochs",
            "1",
            "--seed",
            seed,
        ],
        vec![
            "distill",
            "--data",
            s(&data),
            "--teacher",
            s(&teacher),
            "--model",
            s(&student),
            "--preset",
            "toy",
            "--epochs",
            "1",
            "--seed",
            seed,
        ],
        vec![
            "predict",
            "--model",
            s(&student),
            "--input",
            s(&input),
            "--output",
            s(&predictions),
            "--last-col",
            "last",
            "--na-rm",
            "--threads",
            "2",
        ],
    ];
    for args in &steps {
        let out = run(args);
        assert_eq!(code(&out), 0, "{args:?}: {}", stderr(&out));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(&data).unwrap().map(|e| e.unwrap().path()).collect();
    files.extend(
        fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.is_file()),
    );
    files.sort();
    files
        .into_iter()
        .map(|p| {
            (
                p.strip_prefix(dir).unwrap().display().to_string(),
                fs::read(&p).unwrap(),
            )
        })
        .collect()
}
