use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn gpfusion(dir: &Path, args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_gpfusion"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap();
    Run {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn single(dim: usize, p: f64, lambda: &str, weight: f64) -> String {
    let id: Vec<String> = (0..dim)
        .map(|i| {
            let row: Vec<&str> = (0..dim).map(|j| if i == j { "1" } else { "0" }).collect();
            format!("[{}]", row.join(", "))
        })
        .collect();
    format!(
        r#"{{"version": 1, "space": {{"dim": {dim}, "p": {p}}},
            "triples": [{{"projection": {{"matrix": [{}]}}, "lambda_matrix": {lambda}, "weight": {weight}}}]}}"#,
        id.join(", ")
    )
}

fn report(run: &Run) -> Value {
    serde_json::from_str(&run.stdout).unwrap_or_else(|e| panic!("bad report ({e}): {}", run.stdout))
}

fn comparison(run: &Run) -> (f64, f64) {
    let r = report(run);
    let m = &r["result"]["comparison"]["measured"];
    (m["lower"].as_f64().unwrap(), m["upper"].as_f64().unwrap())
}

#[test]
fn check_identity_is_parseval() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "id.json", &single(2, 2.0, "[[1, 0], [0, 1]]", 1.0));
    let run = gpfusion(dir.path(), &["check", f.to_str().unwrap()]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let r = report(&run);
    assert_eq!(r["result"]["classification"]["class"], "Parseval");
    assert_eq!(r["exit_code"], 0);
    assert!(r["timing_ms"].is_number());
    assert!(run.stderr.starts_with("Parseval"));
}

#[test]
fn check_rank_deficient_is_not_frame() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "def.json", &single(2, 3.0, "[[1, 0]]", 1.0));
    let run = gpfusion(dir.path(), &["check", f.to_str().unwrap()]);
    assert_eq!(run.code, 3);
    assert_eq!(report(&run)["result"]["classification"]["class"], "NotFrame");
}

#[test]
fn check_bessel_only_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "b.json", &single(2, 2.0, "[[1, 0], [0, 1e-9]]", 1.0));
    let run = gpfusion(dir.path(), &["check", f.to_str().unwrap()]);
    assert_eq!(run.code, 2);
    assert_eq!(report(&run)["result"]["classification"]["class"], "BesselOnly");
}

#[test]
fn check_coordinate_frame_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"version": 1, "space": {"dim": 2, "p": 2},
        "triples": [
          {"projection": {"basis": [[1, 0], [0, 1]]}, "lambda_matrix": [[1, 0], [0, 0]], "weight": 1},
          {"projection": {"basis": [[1, 0], [0, 1]]}, "lambda_matrix": [[0, 0], [0, 1]], "weight": 1}
        ]}"#;
    let f = write(dir.path(), "coord.json", text);
    let run = gpfusion(dir.path(), &["check", f.to_str().unwrap()]);
    assert_eq!(run.code, 0);
    let r = report(&run);
    assert!((r["result"]["bounds"]["lower"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((r["result"]["bounds"]["upper"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn parse_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "w.json", &single(2, 2.0, "[[1, 0], [0, 1]]", 0.0));
    let run = gpfusion(dir.path(), &["check", f.to_str().unwrap()]);
    assert_eq!(run.code, 1);
    assert!(run.stderr.contains("weight must be > 0"));
    let f = write(dir.path(), "bad.json", "{ not json");
    let run = gpfusion(dir.path(), &["check", f.to_str().unwrap()]);
    assert_eq!(run.code, 1);
    assert!(run.stderr.contains("line 1"));
}

#[test]
fn riesz_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let id = write(dir.path(), "id.json", &single(2, 2.0, "[[1, 0], [0, 1]]", 1.0));
    assert_eq!(gpfusion(dir.path(), &["riesz", id.to_str().unwrap()]).code, 0);
    let over = r#"{"version": 1, "space": {"dim": 1, "p": 2},
        "triples": [
          {"projection": {"basis": [[1]]}, "lambda_matrix": [[1]], "weight": 1},
          {"projection": {"basis": [[1]]}, "lambda_matrix": [[1]], "weight": 1}
        ]}"#;
    let over = write(dir.path(), "over.json", over);
    let run = gpfusion(dir.path(), &["riesz", over.to_str().unwrap()]);
    assert_eq!(run.code, 3);
    assert_eq!(report(&run)["result"]["riesz"]["is_riesz"], false);
}

#[test]
fn perturb_radius_mode() {
    let dir = tempfile::tempdir().unwrap();
    let base = write(dir.path(), "l.json", &single(2, 2.0, "[[1, 0], [0, 1]]", 1.0));
    let b = base.to_str().unwrap();
    let same = gpfusion(dir.path(), &["perturb", b, b, "--radius"]);
    assert_eq!(same.code, 0, "{}", same.stderr);
    let r = report(&same);
    assert_eq!(r["result"]["measured_radius"]["value"], 0.0);
    assert_eq!(r["result"]["comparison"]["theorem"], "perturbation-2");

    let scaled = write(dir.path(), "g.json", &single(2, 2.0, "[[1.01, 0], [0, 1.01]]", 1.0));
    let run = gpfusion(dir.path(), &["perturb", b, scaled.to_str().unwrap(), "--radius"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let (lo, hi) = comparison(&run);
    assert!((lo - 1.01).abs() < 1e-12 && (hi - 1.01).abs() < 1e-12);
    let radius = report(&run)["result"]["measured_radius"]["value"].as_f64().unwrap();
    assert!((radius - 0.01).abs() < 1e-12);

    let far = write(dir.path(), "far.json", &single(2, 2.0, "[[3, 0], [0, 3]]", 1.0));
    let run = gpfusion(dir.path(), &["perturb", b, far.to_str().unwrap(), "--radius"]);
    assert_eq!(run.code, 4);
    assert!(run.stderr.contains("theorem inapplicable"));
}

#[test]
fn perturb_general_mode() {
    let dir = tempfile::tempdir().unwrap();
    let base = write(dir.path(), "l.json", &single(2, 3.0, "[[1, 0], [0, 1]]", 1.0));
    let scaled = write(dir.path(), "g.json", &single(2, 3.0, "[[1.01, 0], [0, 1.01]]", 1.0));
    let doubled = write(dir.path(), "d.json", &single(2, 3.0, "[[2, 0], [0, 2]]", 1.0));
    let (b, s, d) = (
        base.to_str().unwrap(),
        scaled.to_str().unwrap(),
        doubled.to_str().unwrap(),
    );
    let args = ["--lambda1", "0.02", "--lambda2", "0", "--mu", "0"];

    let mut ok = vec!["perturb", b, s];
    ok.extend_from_slice(&args);
    let run = gpfusion(dir.path(), &ok);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(report(&run)["result"]["comparison"]["theorem"], "perturbation-1");

    let mut violated = vec!["perturb", b, d, "--lambda1", "0.1", "--lambda2", "0", "--mu", "0"];
    let run = gpfusion(dir.path(), &violated);
    assert_eq!(run.code, 4);

    violated[4] = "1.5";
    let run = gpfusion(dir.path(), &violated);
    assert_eq!(run.code, 1);
    assert!(run.stderr.contains("lambda1"));

    let run = gpfusion(
        dir.path(),
        &["perturb", b, s, "--lambda1", "0.1", "--lambda2", "0", "--mu", "5"],
    );
    assert_eq!(run.code, 1);
    assert!(run.stderr.contains("mu"));

    assert_eq!(gpfusion(dir.path(), &["perturb", b, s]).code, 1);
}

#[test]
fn combine_examples() {
    let dir = tempfile::tempdir().unwrap();
    let id = write(dir.path(), "id.json", &single(2, 2.0, "[[1, 0], [0, 1]]", 1.0));
    let t2 = write(dir.path(), "t2.json", &single(1, 2.0, "[[2]]", 1.0));
    let t3 = write(dir.path(), "t3.json", &single(1, 2.0, "[[3]]", 1.0));
    let p3 = write(dir.path(), "p3.json", &single(2, 3.0, "[[1, 0], [0, 1]]", 1.0));
    let out = dir.path().join("product.json");

    let i = id.to_str().unwrap();
    let run = gpfusion(
        dir.path(),
        &["combine", i, i, "--tensor", "--out", out.to_str().unwrap()],
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(comparison(&run), (1.0, 1.0));
    let written = std::fs::read_to_string(&out).unwrap();
    let check = gpfusion(dir.path(), &["check", out.to_str().unwrap()]);
    assert_eq!(check.code, 0);
    assert!(written.contains("\"combined\": \"tensor\""));

    let run = gpfusion(
        dir.path(),
        &["combine", t2.to_str().unwrap(), t3.to_str().unwrap(), "--direct-sum"],
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    let (lo, hi) = comparison(&run);
    assert!((lo - 2.0).abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);

    let run = gpfusion(dir.path(), &["combine", i, p3.to_str().unwrap(), "--tensor"]);
    assert_eq!(run.code, 1);
    assert!(run.stderr.contains("exponents"));
}

#[test]
fn gen_examples() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "--seed",
        "7",
        "gen",
        "--dim",
        "2",
        "--blocks",
        "2",
        "--block-dims",
        "1,1",
        "--p",
        "2",
        "--class",
        "parseval",
    ];
    let a = gpfusion(dir.path(), &args);
    let b = gpfusion(dir.path(), &args);
    assert_eq!(a.code, 0);
    assert_eq!(a.stdout, b.stdout);
    let f = write(dir.path(), "gen.json", &a.stdout);
    let run = gpfusion(dir.path(), &["check", f.to_str().unwrap()]);
    assert_eq!(report(&run)["result"]["classification"]["class"], "Parseval");

    let run = gpfusion(
        dir.path(),
        &[
            "gen",
            "--dim",
            "3",
            "--blocks",
            "1",
            "--block-dims",
            "1",
            "--class",
            "frame",
        ],
    );
    assert_eq!(run.code, 1);
    assert!(run.stderr.contains("rank deficit"));
}

#[test]
fn p2_exact_flag_switches_estimator() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "m.json", &single(2, 2.0, "[[1, 2], [0, 1]]", 1.0));
    let f = f.to_str().unwrap();
    let exact = report(&gpfusion(dir.path(), &["check", f]));
    let approx = report(&gpfusion(dir.path(), &["--no-p2-exact", "check", f]));
    assert_eq!(exact["result"]["bounds"]["estimates"]["exact"][0]["method"], "ExactP2");
    assert!(approx["result"]["bounds"]["estimates"]["exact"].is_null());
    assert_eq!(approx["p2_exact"], false);
    let a = exact["result"]["bounds"]["upper"].as_f64().unwrap();
    let b = approx["result"]["bounds"]["upper"].as_f64().unwrap();
    assert!((a - b).abs() < 1e-6 * a);
}
