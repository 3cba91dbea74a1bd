use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const NET: &str = r#"{"format":1,"layer_sizes":[2,3,2],
"weights":[[[1,0],[0,1],[1,1]],[[1,0,0.5],[0,1,0.2]]],
"biases":[[0,0,0],[0,0.1]],"input_mean":[0,0],"input_range":[1,1]}"#;

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Fixture {
            dir: tempfile::tempdir().unwrap(),
        };
        f.write("net.json", NET);
        f.write("seed.json", "[1.0, 0.5]");
        f
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_nnverif"))
            .current_dir(self.dir.path())
            .env_remove("NNVERIF_TIMEOUT")
            .args(args)
            .output()
            .unwrap()
    }
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn verify_exit_codes_follow_verdict() {
    let f = Fixture::new();
    let robust = f.run(&["verify", "--net", "net.json", "--seed-input", "seed.json", "--noise", "10"]);
    assert_eq!(code(&robust), 0);
    assert_eq!(json(&robust)["kind"], "UNSAT");

    let broken = f.run(&["verify", "--net", "net.json", "--seed-input", "seed.json", "--noise", "90", "--engine", "explicit"]);
    assert_eq!(code(&broken), 1);
    let v = json(&broken);
    assert_eq!(v["kind"], "SAT");
    assert_eq!(v["witness"].as_array().unwrap().len(), 2);
}

#[test]
fn zero_timeout_from_env_reports_timeout() {
    let f = Fixture::new();
    let out = Command::new(env!("CARGO_BIN_EXE_nnverif"))
        .current_dir(f.dir.path())
        .env("NNVERIF_TIMEOUT", "0")
        .args(["verify", "--net", "net.json", "--seed-input", "seed.json", "--noise", "10"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert_eq!(json(&out)["kind"], "TIMEOUT");
}

#[test]
fn missing_file_and_bad_usage_exit_above_two() {
    let f = Fixture::new();
    let missing = f.run(&["verify", "--net", "nope.json", "--seed-input", "seed.json", "--noise", "10"]);
    assert_eq!(code(&missing), 3);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.json"));
    assert_eq!(code(&f.run(&["verify", "--net", "net.json", "--frobnicate"])), 4);
    assert_eq!(code(&f.run(&["verify", "--net", "net.json"])), 3);

    f.write("bad.json", r#"{"format":1,"layer_sizes":[2,2]}"#);
    let bad = f.run(&["verify", "--net", "bad.json", "--seed-input", "seed.json", "--noise", "10"]);
    assert_eq!(code(&bad), 3);
}

#[test]
fn tolerance_reports_largest_robust_level() {
    let f = Fixture::new();
    let out = f.run(&["tolerance", "--net", "net.json", "--seed-input", "seed.json", "--schedule", "90,50,20"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["tolerance_percent"], 50.0);
    assert_eq!(v["levels"].as_array().unwrap().len(), 2);
}

#[test]
fn bench_emits_two_rows_per_level() {
    let f = Fixture::new();
    let out = f.run(&["bench", "--net", "net.json", "--seed-input", "seed.json", "--sweep", "2,5,8,10"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "percent,engine,wall_ms,work,verdict");
    assert_eq!(lines.len(), 9);
}

#[test]
fn collect_then_analyze() {
    let f = Fixture::new();
    let out = f.run(&[
        "collect", "--net", "net.json", "--seed-input", "seed.json", "--noise", "90", "--max", "15",
        "--engine", "explicit", "--db", "db.json", "--csv", "db.csv",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["records"], 15);
    assert!(f.path("db.csv").exists());

    let bias = f.run(&["analyze", "--net", "net.json", "--db", "db.json", "--report", "bias"]);
    assert_eq!(code(&bias), 0);
    assert_eq!(json(&bias)["verdict"], "insufficient_data");

    let sens = f.run(&[
        "analyze", "--net", "net.json", "--db", "db.csv", "--report", "sensitivity", "--csv", "hist.csv",
    ]);
    assert_eq!(code(&sens), 0);
    assert_eq!(json(&sens)["records"], 15);
    let hist = std::fs::read_to_string(f.path("hist.csv")).unwrap();
    assert!(hist.starts_with("node,bin,lower,upper,count"));
}

#[test]
fn tampered_database_is_rejected() {
    let f = Fixture::new();
    f.run(&[
        "collect", "--net", "net.json", "--seed-input", "seed.json", "--noise", "90", "--max", "3",
        "--engine", "explicit", "--db", "db.json",
    ]);
    let mut db: Value = serde_json::from_str(&std::fs::read_to_string(f.path("db.json")).unwrap()).unwrap();
    db["records"][0]["input"] = serde_json::json!([1.0, 0.5]);
    f.write("db.json", &db.to_string());
    let out = f.run(&["analyze", "--net", "net.json", "--db", "db.json", "--report", "bias"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn safety_paths_never_prove_when_sampling() {
    let f = Fixture::new();
    f.write(
        "safe.json",
        r#"{"kind":"safety","input_box":{"lower":[0,0],"upper":[1,1]},"constraint":{"op":"le","index":0,"value":2.5}}"#,
    );
    f.write("plan.json", r#"{"bins":[4,4],"seed":3}"#);
    let base = ["verify", "--net", "net.json", "--convention", "raw", "--property", "safe.json"];
    let full = f.run(&base);
    assert_eq!(json(&full)["kind"], "UNSAT");
    let plan = f.run(&[&base[..], &["--plan", "plan.json", "--parallel", "3"]].concat());
    assert_eq!(code(&plan), 0);
    assert_eq!(json(&plan)["kind"], "NONE_FOUND");
    assert_eq!(json(&plan)["stats"]["subproblems"], 8);
    let coarse = f.run(&[&base[..], &["--coarse-steps", "0.25,0.25"]].concat());
    assert_eq!(json(&coarse)["kind"], "NONE_FOUND");
    assert_eq!(json(&coarse)["stats"]["points"], 25);
}

#[test]
fn manifest_records_hashes_and_replays() {
    let f = Fixture::new();
    let out = f.run(&[
        "verify", "--net", "net.json", "--seed-input", "seed.json", "--noise", "90", "--engine", "explicit",
        "--manifest", "m.json",
    ]);
    assert_eq!(code(&out), 1);
    let m: Value = serde_json::from_str(&std::fs::read_to_string(f.path("m.json")).unwrap()).unwrap();
    assert_eq!(m["subcommand"], "verify");
    assert_eq!(m["inputs"]["net.json"].as_str().unwrap().len(), 64);
    assert!(m["result"]["stats"].get("wall_ms").is_none());

    let replay = f.run(&["replay", "m.json"]);
    assert_eq!(code(&replay), 1);
    assert_eq!(json(&replay)["witness"], json(&out)["witness"]);

    f.write("seed.json", "[1.0, 0.4]");
    assert_eq!(code(&f.run(&["replay", "m.json"])), 3);
}

#[test]
fn emit_dot_prints_reduced_model() {
    let f = Fixture::new();
    let out = f.run(&["emit-dot", "--model", "explicit", "--n", "4", "--classes", "2", "--merge"]);
    assert_eq!(code(&out), 0);
    let dot = String::from_utf8(out.stdout).unwrap();
    assert!(dot.starts_with("digraph"));
    assert_eq!(dot.matches("->").count(), 6);
    assert!(Path::new(&f.path("nnverif-manifest.json")).exists());
}
