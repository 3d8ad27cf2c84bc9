//! End-to-end runs of the binary: report contents and the exit-code contract.

use std::path::PathBuf;
use std::process::Command;

use serde_json::{json, Value};

fn dir() -> PathBuf {
    let d = std::env::temp_dir().join(format!("sqnm-cli-tests-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn write(name: &str, v: &Value) -> PathBuf {
    let p = dir().join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn gen(name: &str, params: Value) -> Value {
    json!({"generator": name, "params": params})
}

fn sqnm(args: &[&str]) -> (i32, Value, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_sqnm")).args(args).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout).to_string();
    let report = serde_json::from_str(&stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap(), report, String::from_utf8_lossy(&out.stderr).to_string())
}

fn path(p: &PathBuf) -> &str {
    p.to_str().unwrap()
}

#[test]
fn compute_ghz_qcmi_and_bell_mi() {
    let f = write("ghz.json", &gen("ghz", json!({})));
    let (code, r, _) = sqnm(&["compute", path(&f), "-q", "qcmi"]);
    assert_eq!(code, 0);
    assert_eq!(r["results"]["values"]["qcmi"], json!(1.0));
    assert_eq!(r["command"], "compute");
    assert!(r["input_digest"].as_str().unwrap().len() == 64);

    let f = write("bellb.json", &gen("bell", json!({"b_dim": 2})));
    let (code, r, _) = sqnm(&["compute", path(&f), "-q", "mi:A|C", "-q", "entropy:B"]);
    assert_eq!(code, 0);
    assert_eq!(r["results"]["values"]["mi:A|C"], json!(2.0));
    assert_eq!(r["results"]["values"]["entropy:B"], json!(1.0));
}

#[test]
fn malformed_input_exits_1_with_position() {
    let p = dir().join("bad.json");
    std::fs::write(&p, "{\n  \"layout\": [{\"name\": \"A\", \"dim\": 1}],\n  \"matrix\": [[[1.0, ]]]\n}").unwrap();
    let (code, _, err) = sqnm(&["compute", path(&p), "-q", "entropy:A"]);
    assert_eq!(code, 1);
    assert!(err.contains("line 3"), "{err}");
    let (code, _, _) = sqnm(&["compute", "/nonexistent/state.json", "-q", "qcmi"]);
    assert_eq!(code, 1);
}

#[test]
fn sqnm_pinned_values() {
    let f = write("obs1.json", &gen("observation1", json!({})));
    let (code, r, _) = sqnm(&["sqnm", path(&f), "--restarts", "1", "--edims", "2"]);
    assert_eq!(code, 0);
    assert!(r["results"]["estimate"]["value"].as_f64().unwrap().abs() <= 1e-9);

    let f = write("me2.json", &gen("max_ent", json!({"d": 2})));
    let (code, r, _) = sqnm(&["sqnm", path(&f), "--restarts", "1"]);
    assert_eq!(code, 0);
    assert!((r["results"]["estimate"]["value"].as_f64().unwrap() - 1.0).abs() <= 1e-6);
}

#[test]
fn tiny_budget_exits_2() {
    let f = write("rand.json", &gen("random", json!({"dims": [2, 2, 2], "rank": 6, "seed": 3})));
    let (code, r, _) = sqnm(&["sqnm", path(&f), "--restarts", "2", "--edims", "3", "--budget", "2"]);
    assert_eq!(code, 2);
    assert!(r["flags"].as_array().unwrap().contains(&json!("budget_exhausted")));
    assert!(r["results"]["estimate"]["value"].is_number());
}

#[test]
fn extendibility_verdicts() {
    let bell = write("bell.json", &gen("bell", json!({})));
    let (code, r, _) = sqnm(&["extendibility", path(&bell), "--k", "2"]);
    assert_eq!(code, 0);
    assert_eq!(r["results"]["feasible"], json!(false));
    assert!(r["results"]["residual"].as_f64().unwrap() > 1e-3);

    let iso = write("iso0.json", &gen("isotropic", json!({"p": 0.0})));
    let (code, r, _) = sqnm(&["extendibility", path(&iso), "--k", "4"]);
    assert_eq!(code, 0);
    assert_eq!(r["results"]["feasible"], json!(true));
    assert!((r["results"]["caps"]["one_sided"].as_f64().unwrap() - 0.25).abs() < 1e-12);

    let q = write("qutrit.json", &gen("max_ent", json!({"d": 3})));
    let (code, _, err) = sqnm(&["extendibility", path(&q), "--k", "6"]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn rates_and_costs() {
    let s = write("schmidt.json", &gen("schmidt", json!({"probs": [0.7, 0.3]})));
    let (code, r, _) = sqnm(&["rates", path(&s), path(&s), "--restarts", "1"]);
    assert_eq!(code, 0);
    assert!((r["results"]["achievable"]["rate"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!((r["results"]["converse"]["rate"].as_f64().unwrap() - 1.0).abs() < 1e-6);

    let me = write("me2c.json", &gen("max_ent", json!({"d": 2})));
    let (code, r, _) = sqnm(&["cost", path(&me), "--restarts", "1"]);
    assert_eq!(code, 0);
    assert!((r["results"]["prepare_lower"].as_f64().unwrap() - 1.0).abs() < 1e-6);

    let m = write("markov.json", &gen("markov", json!({"blocks": 2, "seed": 1})));
    let (code, _, err) = sqnm(&["rates", path(&me), path(&m), "--restarts", "1"]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn audit_passes_and_rejects_signalling() {
    let bell = write("bell_b.json", &gen("bell", json!({"b_dim": 2})));
    let ladder = write(
        "ladder.json",
        &json!([
            {"op": "depolarize", "party": "A", "system": "A", "p": 0.2},
            {"op": "depolarize", "party": "A", "system": "A", "p": 0.5},
            {"op": "random_unitary", "party": "B", "system": "B", "seed": 3}
        ]),
    );
    let (code, r, err) = sqnm(&["audit", path(&bell), path(&ladder), "--restarts", "1", "--edims", "2"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(r["results"]["pass"], json!(true));

    let bad = write("bad_ops.json", &json!([{"op": "move", "from": "B", "to": "C", "system": "B"}]));
    let (code, _, err) = sqnm(&["audit", path(&bell), path(&bad)]);
    assert_eq!(code, 1);
    assert!(err.contains("not a free operation"), "{err}");
}

#[test]
fn selftest_is_deterministic() {
    let a = sqnm(&["selftest", "--suite", "fast", "--only", "1,4", "--seed", "5"]);
    let b = sqnm(&["selftest", "--suite", "fast", "--only", "1,4", "--seed", "5"]);
    assert_eq!(a.0, 0);
    assert_eq!(a.1["results"], b.1["results"]);
    assert_eq!(a.1["results"]["pass"], json!(true));
}

#[test]
fn out_flag_writes_file() {
    let f = write("ghz2.json", &gen("ghz", json!({})));
    let out = dir().join("report.json");
    let (code, _, _) = sqnm(&["compute", path(&f), "-q", "entropy:A", "--out", path(&out)]);
    assert_eq!(code, 0);
    let r: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(r["results"]["values"]["entropy:A"], json!(1.0));
}
