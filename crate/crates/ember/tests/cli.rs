//! End-to-end command-line tests driving the installed binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn ember() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ember"))
}

fn write(dir: &tempfile::TempDir, name: &str, content: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, content).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).to_string()
}

const TINY_DATA: &str = r#"{
  "ptrs": {"shape": [3], "data": [0, 2, 3]},
  "idxs": {"shape": [3], "data": [1, 0, 2]},
  "vals": {"shape": [3, 2], "data": [1, 2, 3, 4, 5, 6]},
  "out":  {"shape": [2, 2], "data": [0, 0, 0, 0]},
  "n_batches": 2,
  "emb_len": 2
}"#;

#[test]
fn compile_then_run_tiny_sls() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(&dir, "sls.scf", ember::workloads::SLS_SRC);
    let prog = dir.path().join("sls.dlc");
    let o = ember()
        .args(["compile"])
        .arg(&src)
        .args(["--opt", "0", "-o"])
        .arg(&prog)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));

    let data = write(&dir, "data.json", TINY_DATA);
    let out = dir.path().join("out.json");
    let stats = dir.path().join("stats.json");
    let o = ember()
        .args(["run"])
        .arg(&prog)
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&out)
        .arg("--stats")
        .arg(&stats)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));

    let out_json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(out_json["out"]["data"], serde_json::json!([4.0, 6.0, 5.0, 6.0]));
    let stats_json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&stats).unwrap()).unwrap();
    // Six iteration tokens plus done.
    assert_eq!(stats_json["ctrl_pushes"], serde_json::json!(7));
    assert_eq!(stats_json["ctrl_tokens"], serde_json::json!(6));
    assert_eq!(stats_json["data_elements"], serde_json::json!(18));
    assert_eq!(stats_json["version"], serde_json::json!(1));
}

#[test]
fn compile_rejects_two_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(
        &dir,
        "two.scf",
        r#"
void f(a: mref<? x f32>, b: mref<? x f32>, o1: mref<? x f32>, o2: mref<? x f32>, n: idx) {
  for(idx i = 0; i < n; i++) {
    f32 x = a[i];
    o1[i] = x;
  }
  for(idx j = 0; j < n; j++) {
    f32 y = b[j];
    o2[j] = y;
  }
}
"#,
    );
    let o = ember().args(["compile"]).arg(&src).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("decouple"), "{}", stderr(&o));
    assert!(stderr(&o).contains("two offloading candidates"), "{}", stderr(&o));
}

#[test]
fn run_missing_binding_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(&dir, "sls.scf", ember::workloads::SLS_SRC);
    let prog = dir.path().join("sls.dlc");
    assert!(ember()
        .args(["compile"])
        .arg(&src)
        .args(["-o"])
        .arg(&prog)
        .output()
        .unwrap()
        .status
        .success());
    let data = write(&dir, "data.json", r#"{"n_batches": 2, "emb_len": 2}"#);
    let o = ember()
        .args(["run"])
        .arg(&prog)
        .arg("--data")
        .arg(&data)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn run_out_of_bounds_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(&dir, "sls.scf", ember::workloads::SLS_SRC);
    let prog = dir.path().join("sls.dlc");
    assert!(ember()
        .args(["compile"])
        .arg(&src)
        .args(["-o"])
        .arg(&prog)
        .output()
        .unwrap()
        .status
        .success());
    let bad = TINY_DATA.replace("[1, 0, 2]", "[1, 0, 99]");
    let data = write(&dir, "data.json", &bad);
    let o = ember()
        .args(["run"])
        .arg(&prog)
        .arg("--data")
        .arg(&data)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("out-of-bounds"), "{}", stderr(&o));
}

#[test]
fn dump_ir_slc_is_pipeline_composable() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(&dir, "sls.scf", ember::workloads::SLS_SRC);
    // One-shot compile at opt 2.
    let o = ember()
        .args(["compile"])
        .arg(&src)
        .args(["--opt", "2", "--vlen", "4"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let oneshot = stdout(&o);

    // Dump the optimized mid-level form, re-feed it through the rest.
    let o = ember()
        .args(["compile"])
        .arg(&src)
        .args(["--opt", "2", "--vlen", "4", "--dump-ir", "slc"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let slc = write(&dir, "sls.slc", &stdout(&o));
    let o = ember()
        .args(["compile"])
        .arg(&slc)
        .args(["--opt", "2", "--vlen", "4"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), oneshot);
}

#[test]
fn verify_kernel_matrix_passes() {
    let o = ember()
        .args([
            "verify",
            "--kernel",
            "sls",
            "--opts",
            "0,3",
            "--vlens",
            "1,4",
            "--seeds",
            "2",
            "--batches",
            "3",
            "--lookups",
            "4",
            "--rows",
            "16",
            "--emb-len",
            "6",
        ])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}\n{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("pass"));
    assert!(!text.contains("FAIL"));
    assert!(text.contains("8 cells, 0 failures"));
}

#[test]
fn cdf_from_trace_file() {
    let dir = tempfile::tempdir().unwrap();
    let trace = write(&dir, "trace.txt", "7\n9\n7\n9\n");
    let o = ember().args(["cdf"]).arg(&trace).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["cold"], serde_json::json!(2));
    assert_eq!(v["points"], serde_json::json!([[1, 1.0]]));

    // LRU rates for [A,A,B,A] at capacities 1 and 2.
    let trace = write(&dir, "t2.txt", "1\n1\n2\n1\n");
    let o = ember()
        .args(["cdf"])
        .arg(&trace)
        .args(["--capacities", "1,2"])
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["lru"]["1"], serde_json::json!(0.25));
    assert_eq!(v["lru"]["2"], serde_json::json!(0.5));
}

#[test]
fn cdf_generator_dominance() {
    let get = |gen: &str| -> serde_json::Value {
        let o = ember()
            .args([
                "cdf", "--gen", gen, "--rows", "64", "--count", "20000", "--seed", "4",
                "--capacities", "8",
            ])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        serde_json::from_str(&stdout(&o)).unwrap()
    };
    let uni = get("uniform");
    let zipf = get("zipf1.2");
    let rate = |v: &serde_json::Value| v["lru"]["8"].as_f64().unwrap();
    assert!(rate(&zipf) > rate(&uni), "{} vs {}", rate(&zipf), rate(&uni));
}

#[test]
fn cdf_empty_trace_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let trace = write(&dir, "empty.txt", "");
    let o = ember().args(["cdf"]).arg(&trace).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn classification_dump_is_json() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(&dir, "mp.scf", ember::workloads::MP_SRC);
    let o = ember()
        .args(["compile"])
        .arg(&src)
        .args(["--dump-classification", "--dump-ir", "scf", "-o"])
        .arg(dir.path().join("mp.dlc"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let json_start = text.find('{').unwrap();
    let json_end = text.rfind('}').unwrap();
    let _ = &text[json_start..=json_end];
    assert!(text.contains("\"class\": \"workspace\""));
    assert!(text.contains("\"class\": \"candidate\""));
}
