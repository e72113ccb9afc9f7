use std::path::Path;
use std::process::{Command, Output};

fn ldgm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldgm-mi"))
        .args(args)
        .env("LDGM_MI_OUT", dir)
        .output()
        .unwrap()
}

fn write_spec(dir: &Path, body: &str) -> String {
    let path = dir.join("spec.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = r#"{"n": 6, "k": 3, "D": {"3": 1.0}, "family": "ldgm", "eta": 0.3, "samples": 10,
  "solver": {"population": 300, "iterations": 10, "mc_samples": 3000}}"#;

#[test]
fn sweep_writes_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), SMALL);
    let out = ldgm(dir.path(), &["mi-sweep", "--spec", &spec, "--eta", "0.05:0.5:0.05"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("mi-sweep.csv")).unwrap();
    let mut lines = text.lines();
    let header: serde_json::Value = serde_json::from_str(lines.next().unwrap().strip_prefix("# ").unwrap()).unwrap();
    assert_eq!(header["spec"]["eta"], 0.3);
    assert_eq!(header["seed"], 0);
    assert_eq!(lines.next().unwrap(), "n,k,eta,alpha,beta,T,samples,H_per_n,stderr,MI_per_n");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 10);
    // MI is non-increasing in eta on every code, so also on average
    assert!(rows.windows(2).all(|w| w[1][9] <= w[0][9] + 1e-12));
    assert!(rows[9][9].abs() < 1e-12);
}

#[test]
fn check_sym_reports_zero_for_codes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), SMALL);
    let out = ldgm(dir.path(), &["check-sym", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("check-sym.json")).unwrap()).unwrap();
    assert_eq!(doc["result"]["deviation"], 0.0);
}

#[test]
fn check_sym_flags_asymmetric_families() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        r#"{"n": 4, "k": 1, "D": {"1": 1.0}, "family": {"q": 2, "tables": [[1.5, 0.5]]}}"#,
    );
    let out = ldgm(dir.path(), &["check-sym", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exact_mi_over_the_cap_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), &SMALL.replace("\"n\": 6", "\"n\": 30"));
    let out = ldgm(dir.path(), &["mi-exact", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cap"));
}

#[test]
fn bad_specs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for (body, field) in [
        (SMALL.replace("0.3", "1.5"), "eta"),
        (SMALL.replace("1.0", "0.9"), "D"),
        (SMALL.replace("\"samples\"", "\"bogus\": 1, \"samples\""), "bogus"),
    ] {
        let spec = write_spec(dir.path(), &body);
        let out = ldgm(dir.path(), &["check-sym", "--spec", &spec]);
        assert_eq!(out.status.code(), Some(1));
        assert!(String::from_utf8_lossy(&out.stderr).contains(field), "{field}");
    }
}

#[test]
fn seed_flag_and_out_override() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), SMALL);
    let target = dir.path().join("nested/graph.txt");
    let out = ldgm(
        dir.path(),
        &["ensemble-sample", "--spec", &spec, "--seed", "99", "--out", target.to_str().unwrap()],
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(&target).unwrap();
    let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap().strip_prefix("# ").unwrap()).unwrap();
    assert_eq!(header["seed"], 99);
    let graph = ldgm_mi::graph::read_graph(text.as_bytes()).unwrap();
    assert_eq!(graph.n(), 6);
    assert_eq!(graph.degrees(), vec![3; 6]);
}

#[test]
fn bits_flag_only_changes_the_display() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), SMALL);
    let nats = ldgm(dir.path(), &["mi-exact", "--spec", &spec]);
    let file_nats = std::fs::read(dir.path().join("mi-exact.csv")).unwrap();
    let bits = ldgm(dir.path(), &["mi-exact", "--spec", &spec, "--bits"]);
    let file_bits = std::fs::read(dir.path().join("mi-exact.csv")).unwrap();
    assert_eq!(file_nats, file_bits);
    assert!(String::from_utf8_lossy(&nats.stdout).contains("nats"));
    assert!(String::from_utf8_lossy(&bits.stdout).contains("bits"));
}

#[test]
fn pd_solve_population_feeds_interpolate() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), SMALL);
    assert!(ldgm(dir.path(), &["pd-solve", "--spec", &spec]).status.success());
    let pop = dir.path().join("pd-solve.population.csv");
    let out = ldgm(
        dir.path(),
        &["interpolate", "--spec", &spec, "--population", pop.to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("k-ary 0"), "{stdout}");
}
