use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fbdiff::config::{parse_config, CANONICAL};

fn fbdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbdiff")).args(args).output().unwrap()
}

fn small_canonical() -> String {
    CANONICAL.replace("\"n\": 2001", "\"n\": 201").replace("\"t_end\": 0.5", "\"t_end\": 0.1")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn rates_prints_shortest_floats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", CANONICAL);
    let out = fbdiff(&["rates", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "k0=1 k1=1");
}

#[test]
fn monotone_flux_fails_the_model_check() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
  "model": { "flux": { "name": "linear" }, "convection": { "name": "none" } },
  "grid": { "a": 0, "b": 1, "n": 101 },
  "initial": { "kind": "sine" },
  "time": { "t_end": 0.01, "sample_interval": 0.001 }
}"#;
    let cfg = write(dir.path(), "c.json", text);
    assert_eq!(fbdiff(&["check-model", "--config", &cfg]).status.code(), Some(1));
    let pm = write(dir.path(), "pm.json", CANONICAL);
    assert_eq!(fbdiff(&["check-model", "--config", &pm]).status.code(), Some(0));
}

#[test]
fn bad_documents_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "u.json", &CANONICAL.replace("\"grid\":", "\"gird\": {}, \"grid\":"));
    assert_eq!(fbdiff(&["simulate", "--config", &unknown]).status.code(), Some(3));
    let order = write(dir.path(), "o.json", &CANONICAL.replace("\"a1\": -1, \"b1\": 1", "\"a1\": 1, \"b1\": -1"));
    let out = fbdiff(&["simulate", "--config", &order]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("a ≤ a₁ ≤ b₁ ≤ b"));
    assert_eq!(fbdiff(&["simulate", "--config", "/nonexistent/c.json"]).status.code(), Some(3));
}

#[test]
fn unwritable_output_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &small_canonical());
    let blocker = write(dir.path(), "file", "x");
    let out = fbdiff(&["simulate", "--config", &cfg, "--out", &format!("{blocker}/sub")]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &small_canonical());
    let out_dir = dir.path().join("run");
    let out = fbdiff(&["simulate", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["interfaces.csv", "states.csv", "interfaces.svg", "report.json"] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "completed");
    let back = parse_config(&report["config"].to_string()).unwrap();
    assert_eq!(back, parse_config(&small_canonical()).unwrap());
    let rows = fs::read_to_string(out_dir.join("interfaces.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 11);
    roxmltree::Document::parse(&fs::read_to_string(out_dir.join("interfaces.svg")).unwrap()).unwrap();
}

#[test]
fn lemma_subcommand_writes_fronts() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{ "lemma": { "K": 1, "C": 1, "g_kind": "sqrt_exact", "x1": -6, "x2": -1, "x3": 1, "x4": 6,
        "initial": { "kind": "parabola", "height": 1 }, "n": 241, "t_end": 0.5, "sample_interval": 0.02 } }"#;
    let cfg = write(dir.path(), "l.json", text);
    let out_dir = dir.path().join("lemma");
    let out = fbdiff(&["lemma", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("verdict true"));
    for f in ["fronts.csv", "fronts.svg", "lemma_report.json"] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
}

fn sweep_outputs(root: &Path) -> Vec<(String, String)> {
    let mut files = Vec::new();
    for entry in fs::read_dir(root).unwrap() {
        let sub = entry.unwrap().path();
        for f in ["interfaces.csv", "states.csv"] {
            let name = format!("{}/{f}", sub.file_name().unwrap().to_string_lossy());
            files.push((name, fs::read_to_string(sub.join(f)).unwrap()));
        }
    }
    files.sort();
    files
}

#[test]
fn sweep_is_order_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &small_canonical());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let run = |values: &str, jobs: &str, out: &Path| {
        let o = fbdiff(&["sweep", "--config", &cfg, "--param", "grid.n", "--values", values, "--jobs", jobs, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    };
    run("101,201,161", "3", &a);
    run("161,201,101", "1", &b);
    let (fa, fb) = (sweep_outputs(&a), sweep_outputs(&b));
    assert_eq!(fa.len(), 6);
    assert_eq!(fa, fb);
    assert!(a.join("grid.n=101").is_dir());
}

#[test]
fn backward_datum_reports_shrinking() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_canonical()
        .replace("\"kind\": \"piecewise_slope\"", "\"kind\": \"super_interval\"")
        .replace("\"slope_left\": -2, \"slope_mid\": 0, \"slope_right\": 2", "\"slope_left\": 0, \"slope_mid\": 2, \"slope_right\": 0");
    let cfg = write(dir.path(), "m.json", &text);
    let out_dir = dir.path().join("m");
    let out = fbdiff(&["simulate", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["shrink"]["initial_width"].as_f64().map(|w| (w - 2.0).abs() < 0.1), Some(true));
    assert!(report["rates"].is_null());
}
