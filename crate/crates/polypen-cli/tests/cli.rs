//! End-to-end runs of the binary: file round trips, exit codes, header
//! content, and agreement with the library's own numbers.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicU32, Ordering};

fn tmpdir() -> PathBuf {
    static COUNTER: AtomicU32 = AtomicU32::new(0);
    let dir = std::env::temp_dir().join(format!(
        "polypen-cli-{}-{}",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::SeqCst)
    ));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn polypen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polypen"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn polypen_env(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_polypen"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_interval_file(dir: &Path, m: Option<f64>, n: u32) -> PathBuf {
    let path = dir.join("problem.json");
    let m_part = m.map(|m| format!("\"m\": {m}, ")).unwrap_or_default();
    fs::write(
        &path,
        format!(r#"{{"Q": [[0.5]], "q": [-1.0], "A": [[1.0]], "v": [0.0], {m_part}"N": {n}}}"#),
    )
    .unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn solve_writes_a_decreasing_feasible_trace() {
    let dir = tmpdir();
    let input = write_interval_file(&dir, Some(1.0), 100);
    let out = polypen(&["solve", "--input", input.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("# m 1.0"));
    assert!(text.contains("# certified yes"));
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('k'))
        .map(|l| {
            l.split(',')
                .map(|c| c.parse().unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    assert_eq!(rows.len(), 101);
    let f_first = rows[1][2];
    let f_last = rows[100][2];
    assert!(f_last < f_first, "f did not decrease: {f_first} -> {f_last}");
    assert!(rows.iter().all(|r| r[3] <= 1.0 + 1e-9), "left the set");
}

#[test]
fn solve_reports_json_traces_with_attachments() {
    let dir = tmpdir();
    let input = write_interval_file(&dir, None, 20);
    let output = dir.join("trace.json");
    let out = polypen(&[
        "solve",
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
        "--circuit",
        "--diagnostics",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&output).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["records"].as_array().unwrap().len(), 20);
    assert!(v["circuit"]["max_level"].as_u64().is_some());
    assert_eq!(v["diagnostics"]["invariance"], "ok");
    assert_eq!(v["certified"], true);
    // m was estimated: 0.25 from the endpoints times the 1.1 safety.
    let m = v["m"].as_f64().unwrap();
    assert!((m - 0.275).abs() < 1e-12, "estimated m = {m}");
}

#[test]
fn asymmetric_shape_fails_validation_naming_the_field() {
    let dir = tmpdir();
    let path = dir.join("bad.json");
    fs::write(
        &path,
        r#"{"Q": [[0.5, 0.0], [0.0, 0.5]], "q": [0.0, 0.0],
           "A": [[1.0, 0.5], [0.1, 1.0]], "v": [0.0, 0.0], "N": 5}"#,
    )
    .unwrap();
    let out = polypen(&["solve", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains('A'), "{}", stderr(&out));
}

#[test]
fn zero_penalty_runs_but_is_uncertified() {
    let dir = tmpdir();
    let input = write_interval_file(&dir, Some(0.0), 30);
    let out = polypen(&["solve", "--input", input.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("uncertified"), "{}", stderr(&out));
    assert!(stdout(&out).contains("# certified no"));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tmpdir();
    let path = dir.join("typo.json");
    fs::write(
        &path,
        r#"{"Q": [[0.5]], "q": [-1.0], "A": [[1.0]], "v": [0.0], "N": 5, "steps": 3}"#,
    )
    .unwrap();
    let out = polypen(&["validate", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("steps"), "{}", stderr(&out));
}

#[test]
fn infeasible_start_is_a_validation_error() {
    let dir = tmpdir();
    let path = dir.join("start.json");
    fs::write(
        &path,
        r#"{"Q": [[0.5]], "q": [-1.0], "A": [[1.0]], "v": [0.0], "N": 5, "x1": [3.0]}"#,
    )
    .unwrap();
    for sub in ["validate", "solve"] {
        let out = polypen(&[sub, "--input", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{sub}");
        assert!(stderr(&out).contains("x1") || stderr(&out).contains("start"));
    }
}

#[test]
fn estimate_m_matches_the_endpoint_analysis() {
    let dir = tmpdir();
    let input = write_interval_file(&dir, None, 10);
    let out = polypen(&["estimate-m", "--input", input.to_str().unwrap()]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert!((v["m_min_hat"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert!((v["m_min"].as_f64().unwrap() - 0.275).abs() < 1e-12);
    assert_eq!(v["certified"], true);
}

#[test]
fn seed_falls_back_to_the_environment() {
    let dir = tmpdir();
    let input = write_interval_file(&dir, None, 10);
    let args = ["estimate-m", "--input", input.to_str().unwrap()];
    let with_env = polypen_env(&args, &[("POLYPEN_SEED", "77")]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&with_env)).unwrap();
    assert_eq!(v["seed"], 77);
    let again = polypen_env(&args, &[("POLYPEN_SEED", "77")]);
    assert_eq!(stdout(&with_env), stdout(&again), "not deterministic");
    let flag_wins = polypen_env(
        &["estimate-m", "--input", input.to_str().unwrap(), "--seed", "5"],
        &[("POLYPEN_SEED", "77")],
    );
    let v: serde_json::Value = serde_json::from_str(&stdout(&flag_wins)).unwrap();
    assert_eq!(v["seed"], 5);
    let bad = polypen_env(&args, &[("POLYPEN_SEED", "not-a-number")]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn plan_depth_emits_the_table() {
    let out = polypen(&["plan-depth", "--iters", "1"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 1);
    assert_eq!(v["total"], 0);
    let seq = polypen(&["plan-depth", "--iters", "8", "--strategy", "sequential"]);
    let vs: serde_json::Value = serde_json::from_str(&stdout(&seq)).unwrap();
    let rs = polypen(&["plan-depth", "--iters", "8"]);
    let vr: serde_json::Value = serde_json::from_str(&stdout(&rs)).unwrap();
    assert!(vr["total"].as_u64().unwrap() <= vs["total"].as_u64().unwrap());
}

#[test]
fn min_of_two_family() {
    let exact = polypen(&["minab", "--a", "2", "--b", "6", "--alpha", "1", "--iters", "1"]);
    assert!(exact.status.success());
    assert_eq!(stdout(&exact).trim(), "2");

    let equal = polypen(&["minab", "--a", "5", "--b", "5"]);
    assert!(equal.status.success());
    assert_eq!(stdout(&equal).trim(), "5");

    // Negative operands must parse as values, not flags.
    let negative = polypen(&["minab", "--a", "-3.5", "--b", "11", "--alpha", "1", "--iters", "1"]);
    assert!(negative.status.success(), "{}", stderr(&negative));
    assert_eq!(stdout(&negative).trim(), "-3.5");

    let strict = polypen(&["minab", "--a", "5", "--b", "5", "--strict"]);
    assert_eq!(strict.status.code(), Some(2));

    let long = polypen(&["minab", "--a", "2", "--b", "6", "--alpha", "2", "--iters", "50"]);
    let value: f64 = stdout(&long).trim().parse().unwrap();
    let mp = polypen::MinProblem::new(2.0, 6.0, 2.0).unwrap();
    let expected = *mp.iterates(50).last().unwrap();
    assert_eq!(value.to_bits(), expected.to_bits(), "CLI disagrees with library");
    assert!((value - 2.0).abs() <= 2.0 * mp.auxiliary_error(50));

    let circuit = polypen(&[
        "minab", "--a", "2", "--b", "6", "--alpha", "2", "--iters", "3", "--circuit",
    ]);
    let text = stdout(&circuit);
    let mut lines = text.lines();
    let _value: f64 = lines.next().unwrap().trim().parse().unwrap();
    let stats: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert!(stats["ct_ct_muls"].as_u64().unwrap() >= 1);
}

#[test]
fn dump_normalized_round_trips_bitwise() {
    let dir = tmpdir();
    let path = dir.join("messy.json");
    // Asymmetry below the accept threshold: normalization symmetrizes it.
    fs::write(
        &path,
        r#"{"Q": [[2.0, 0.30000000000000004], [0.3, 1.0]], "q": [0.1, -0.2],
           "A": [[1.0, 0.0], [0.0, 2.0]], "v": [0.25, 0.0],
           "m": 0.7, "N": 12, "x1": [0.25, 0.1],
           "step_policy": "reciprocal_smoothness", "seed": 9}"#,
    )
    .unwrap();
    let first = polypen(&["validate", "--input", path.to_str().unwrap(), "--dump-normalized"]);
    assert!(first.status.success(), "{}", stderr(&first));
    let dumped = dir.join("normalized.json");
    fs::write(&dumped, stdout(&first)).unwrap();
    let second = polypen(&["validate", "--input", dumped.to_str().unwrap(), "--dump-normalized"]);
    assert_eq!(stdout(&first), stdout(&second), "normalization not idempotent");

    // Solving the original and the normalized file gives identical traces.
    let t1 = polypen(&["solve", "--input", path.to_str().unwrap()]);
    let t2 = polypen(&["solve", "--input", dumped.to_str().unwrap()]);
    assert!(t1.status.success());
    assert_eq!(stdout(&t1), stdout(&t2));
}

#[test]
fn fixed_point_overflow_exits_numeric() {
    let dir = tmpdir();
    let path = dir.join("overflow.json");
    fs::write(
        &path,
        r#"{"Q": [[0.5]], "q": [1e8], "A": [[1.0]], "v": [0.0], "m": 0.01, "N": 2}"#,
    )
    .unwrap();
    let out = polypen(&[
        "solve",
        "--input",
        path.to_str().unwrap(),
        "--fixed-point-bits",
        "52",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("overflow") || stderr(&out).contains("step"));
}
