//! Determinism of every verb: two runs with the same spec and seed write
//! byte-identical files.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

const SPEC: &str = r#"{
  "n": 8, "k": 2, "D": {"2": 1.0}, "family": "ldgm", "eta": 0.2, "seed": 17, "samples": 12,
  "solver": {"population": 400, "iterations": 15, "mc_samples": 4000}
}"#;

fn run(dir: &Path, args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_ldgm-mi"))
        .args(args)
        .env("LDGM_MI_OUT", dir)
        .output()
        .unwrap();
    assert!(status.status.success(), "{args:?}: {}", String::from_utf8_lossy(&status.stderr));
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_10_cli_determinism() {
    let start = Instant::now();
    let work = tempfile::tempdir().unwrap();
    let spec = work.path().join("spec.json");
    std::fs::write(&spec, SPEC).unwrap();
    let spec = spec.to_str().unwrap();
    let verbs: Vec<Vec<&str>> = vec![
        vec!["ensemble-sample"],
        vec!["mi-predict"],
        vec!["mi-exact"],
        vec!["mi-sweep", "--eta", "0.1:0.3:0.1"],
        vec!["check-sym"],
        vec!["check-pos"],
        vec!["check-nishimori"],
        vec!["couple", "--n-grid", "60:120:60", "--reps", "5"],
        vec!["interpolate", "--s", "3", "--t", "0.5"],
        vec!["pd-solve"],
    ];
    let mut outputs = Vec::new();
    for round in ["a", "b"] {
        let dir = work.path().join(round);
        for verb in &verbs {
            let mut args = verb.clone();
            args.extend(["--spec", spec]);
            run(&dir, &args);
        }
        outputs.push(snapshot(&dir));
    }
    let differing: Vec<&String> = outputs[0]
        .iter()
        .zip(&outputs[1])
        .filter(|(a, b)| a != b)
        .map(|(a, _)| &a.0)
        .collect();
    let pass = outputs[0].len() == outputs[1].len() && outputs[0].len() >= verbs.len() && differing.is_empty();
    let elapsed = start.elapsed();
    let ok = pass && elapsed <= Duration::from_secs(60);
    let line = format!(
        "criterion 10 [{}] {} files from {} verbs, differing: {:?} ({:.1}s, limit 60s)\n",
        if ok { "PASS" } else { "FAIL" },
        outputs[0].len(),
        verbs.len(),
        differing,
        elapsed.as_secs_f64()
    );
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(ok);
}
