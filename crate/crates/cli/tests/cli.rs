use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jsonschema::JSONSchema;
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_magnilift"));
    c.env_remove("MAGNILIFT_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn schema_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(format!("{name}.schema.json"))
}

fn assert_valid(schema: &str, out: &Output) -> Value {
    let value: Value = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    });
    let raw: Value = serde_json::from_str(&std::fs::read_to_string(schema_path(schema)).unwrap()).unwrap();
    let compiled = JSONSchema::compile(&raw).expect("schema compiles");
    if let Err(errors) = compiled.validate(&value) {
        let msgs: Vec<String> = errors.map(|e| format!("{e} at {}", e.instance_path)).collect();
        panic!("{schema}: {msgs:?}\n{value}");
    }
    value
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn gen_to(dir: &Path, name: &str, args: &[&str]) -> String {
    let p = dir.join(name).display().to_string();
    let mut full = vec!["gen"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["-o", &p]);
    let out = run(&full);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    p
}

#[test]
fn certify_range_identity_is_not_conjugate_pr() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "i2.csv", "1,0\n0,1\n");
    let out = run(&["certify-range", "--matrix", &m]);
    assert_eq!(out.status.code(), Some(0));
    let v = assert_valid("certify_verdict", &out);
    assert_eq!(v["status"], "NotConjugatePR");

    let m = write(dir.path(), "three.json", "[[1,0],[0,1],[1,1]]");
    let out = run(&["certify-range", "--input", &m]);
    assert_eq!(assert_valid("certify_verdict", &out)["status"], "ConjugatePR");

    let x = write(dir.path(), "x.csv", "1,0\n0,1\n");
    let m = write(dir.path(), "i2b.csv", "1,0\n0,1\n");
    let out = run(&["certify-range", "--matrix", &m, "--vector", &x]);
    let v = assert_valid("certify_verdict", &out);
    assert_eq!(v["status"], "NotConjugatePR");
    assert!(v["decomposition"].is_object());
}

#[test]
fn reconstruct_circulant_reports_no_simplex() {
    let dir = tempfile::tempdir().unwrap();
    let c4 = gen_to(dir.path(), "c4.json", &["--kind", "circulant-counterexample", "--n", "4"]);
    let out = run(&["reconstruct-field", "--input", &c4]);
    assert_eq!(out.status.code(), Some(0));
    let v = assert_valid("reconstruct_result", &out);
    assert_eq!(v["status"], "NoSimplex");
    assert_eq!(v["certified_unique"], false);
}

#[test]
fn graph_commands_validate() {
    let dir = tempfile::tempdir().unwrap();
    let g = gen_to(dir.path(), "g.json", &["--kind", "glued-simplices", "--d", "3", "--length", "4", "--seed", "2"]);
    let gen_out: Value = serde_json::from_str(&std::fs::read_to_string(&g).unwrap()).unwrap();
    assert!(JSONSchema::compile(&serde_json::from_str(&std::fs::read_to_string(schema_path("graph_instance")).unwrap()).unwrap())
        .unwrap()
        .is_valid(&gen_out));

    for method in ["auto", "propagate"] {
        let out = run(&["reconstruct-field", "--input", &g, "--method", method]);
        assert_eq!(out.status.code(), Some(0));
        let v = assert_valid("reconstruct_result", &out);
        assert_eq!(v["certified_unique"], true);
    }
    let out = run(&["reconstruct-field", "--input", &g, "--method", "complete"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["simplex-graph", "--input", &g]);
    let v = assert_valid("simplex_graph", &out);
    assert_eq!(v["simplices"].as_array().unwrap().len(), 4);
    assert_eq!(v["connected"], true);

    let out = run(&["observe", "--input", &g]);
    let v = assert_valid("graph_instance", &out);
    assert!(v.get("field").is_none());
    let obs = write(dir.path(), "obs.json", &String::from_utf8(out.stdout).unwrap());
    let out = run(&["reconstruct-field", "--input", &obs]);
    assert_eq!(assert_valid("reconstruct_result", &out)["status"], "Certified");

    let f = gen_to(dir.path(), "f.json", &["--kind", "random-field", "--n", "7", "--d", "3"]);
    let out = run(&["reconstruct-field", "-i", &f, "--method", "complete"]);
    assert_eq!(assert_valid("reconstruct_result", &out)["method"], "CompleteGram");
}

#[test]
fn spline_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "c.json", r#"{"offset": 0, "coeffs": [[1, 0], [0, 1], [1, 0]]}"#);
    let out = run(&["hat-check", "--coeffs", &c]);
    let v = assert_valid("hat_check", &out);
    assert_eq!(v["retrievable"], false);
    assert_eq!(v["im_positions"], serde_json::json!([0, 1]));
    let hc = write(dir.path(), "hc.json", &String::from_utf8(out.stdout).unwrap());
    let out = run(&["hat-recover", "--samples", &hc]);
    let v = assert_valid("hat_recover", &out);
    assert_eq!(v["class_count"], 2);

    let s = write(dir.path(), "s.json", &serde_json::to_string(&serde_json::json!({
        "grid_start": -1.0, "values": [0.0, 0.5, 1.0, 1.0, 1.0, 0.5, 0.0]
    })).unwrap());
    let out = run(&["hat-recover", "--input", &s]);
    let v = assert_valid("hat_recover", &out);
    assert_eq!(v["status"], "Unique");

    let gap = write(dir.path(), "gap.json", r#"{"offset": 0, "coeffs": [[1, 0], [0, 0], [1, 0]]}"#);
    let out = run(&["hat-check", "--coeffs", &gap]);
    assert_eq!(assert_valid("hat_check", &out)["support_gap"], 1);
    let hg = write(dir.path(), "hg.json", &String::from_utf8(out.stdout).unwrap());
    let out = run(&["hat-recover", "--samples", &hg]);
    assert_eq!(assert_valid("hat_recover", &out)["status"], "Continuum");

    let spline = gen_to(dir.path(), "sp.json", &["--kind", "random-spline", "--n", "6", "--im-positions", "1"]);
    let out = run(&["hat-check", "--coeffs", &spline]);
    assert_eq!(assert_valid("hat_check", &out)["retrievable"], true);
}

#[test]
fn quaternion_and_affine_commands_validate() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "f.json", "[[1, 0, 0, 0], [1, 0, 0, 0]]");
    let out = run(&["quat-check", "--function", &f]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(assert_valid("quat_report", &out)["verdict"], "counterexample");

    let single = write(dir.path(), "one.json", "[[1, 0, 0, 0], [0, 0, 0, 0]]");
    let cands = write(dir.path(), "cands.json", "[[[0, 1, 0, 0], [0, 0, 0, 0]]]");
    let out = run(&["quat-check", "--function", &single, "--candidates", &cands]);
    let v = assert_valid("quat_report", &out);
    assert_eq!(v["verdict"], "retrievable_certified");
    assert_eq!(v["candidates"][0]["in_orbit"], true);

    let sys = write(dir.path(), "a.json", r#"{"p": 1, "measurements": [{"phi": [[1]], "refs": [[5]]}]}"#);
    let out = run(&["affine-check", "--system", &sys]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(assert_valid("affine_report", &out)["verdict"], "CERTIFIED_NO");

    for mode in ["generic", "realized", "single"] {
        let g = gen_to(dir.path(), &format!("{mode}.json"), &["--kind", "random-affine-system", "--mode", mode, "-N", "2", "--m", "3"]);
        let raw: Value = serde_json::from_str(&std::fs::read_to_string(&g).unwrap()).unwrap();
        let schema: Value = serde_json::from_str(&std::fs::read_to_string(schema_path("affine_system")).unwrap()).unwrap();
        assert!(JSONSchema::compile(&schema).unwrap().is_valid(&raw));
        let out = run(&["affine-check", "--system", &g]);
        assert_ne!(out.status.code(), Some(1));
        assert_valid("affine_report", &out);
    }

    let m = gen_to(dir.path(), "m.json", &["--kind", "random-range-matrix", "--n", "5", "--m", "3", "--directions", "4"]);
    let out = run(&["certify-range", "--matrix", &m, "--budget", "2000"]);
    assert_ne!(out.status.code(), Some(1));
    assert_valid("certify_verdict", &out);
}

#[test]
fn input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["certify-range", "--matrix", "x.csv", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["nonsense"]);
    assert_eq!(out.status.code(), Some(1));

    let bad = write(dir.path(), "bad.json", "{\"dim\": 2,\n \"vertices\": 2,\n \"edges\": [[0, 1]\n");
    let out = run(&["reconstruct-field", "--input", &bad]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr).to_string();
    assert!(err.contains("line 4"), "{err}");
    assert!(out.stdout.is_empty());

    let csv = write(dir.path(), "bad.csv", "1,0\n0,x\n");
    let out = run(&["certify-range", "--matrix", &csv]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr).to_string();
    assert!(err.contains("line 2") && err.contains("field 2"), "{err}");

    let deficient = write(dir.path(), "def.csv", "1,1\n2,2\n");
    let out = run(&["certify-range", "--matrix", &deficient]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["gen", "--kind", "circulant-counterexample", "--n", "5"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["gen", "--kind", "unknown-kind"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["hat-check", "--coeffs", "/nonexistent/c.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_flag_and_environment() {
    let a = run(&["gen", "--kind", "random-field", "--seed", "9"]);
    let b = bin().args(["gen", "--kind", "random-field"]).env("MAGNILIFT_SEED", "9").output().unwrap();
    let c = run(&["gen", "--kind", "random-field", "--seed", "10"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let d = bin().args(["gen", "--kind", "random-field", "--seed", "10"]).env("MAGNILIFT_SEED", "9").output().unwrap();
    assert_eq!(c.stdout, d.stdout);
}

#[test]
fn verbose_summary_goes_to_stderr() {
    let out = run(&["-v", "gen", "--kind", "random-spline"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("random-spline"));
    assert_valid("spline_coeffs", &out);
    let quiet = run(&["gen", "--kind", "random-spline"]);
    assert!(quiet.stderr.is_empty());
    assert_eq!(quiet.stdout, out.stdout);
}
