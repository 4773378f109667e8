use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn spreadlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spreadlab")).args(args).output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn kernel_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k.json");
    let o = spreadlab(&["kernel", "--d", "1", "--L", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    assert_eq!(v["support_size"], 2);
    assert_eq!(v["sigma2"].as_f64(), Some(1.0));
    assert_eq!(v["d_at_origin"].as_f64(), Some(0.0));

    let m = json(&dir.path().join("k.json.manifest.json"));
    assert_eq!(m["subcommand"], "kernel");
    assert_eq!(m["outputs"][0]["bytes"].as_u64(), Some(fs::metadata(&out).unwrap().len()));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(spreadlab(&["simulate", "--d", "2", "--L", "1"]).status.code(), Some(2));
    assert_eq!(spreadlab(&["kernel", "--d", "0", "--L", "1"]).status.code(), Some(2));
    assert_eq!(spreadlab(&["kernel", "--d", "2", "--L", "1", "--profile", "gaussian"]).status.code(), Some(2));
    assert_eq!(spreadlab(&["series", "gauss", "--s", "2", "--d", "3", "--mode", "sideways"]).status.code(), Some(2));
    assert_eq!(spreadlab(&["--help"]).status.code(), Some(0));
}

#[test]
fn exact_budget_is_refused() {
    let o = spreadlab(&["exact", "--d", "2", "--L", "1", "--p", "1", "--n-max", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("refused"));
    assert!(o.stdout.is_empty());
}

#[test]
fn simulate_is_reproducible_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let o = spreadlab(&[
            "--workers", workers, "simulate", "--d", "2", "--L", "1", "--p", "0.9", "--n-max", "6", "--samples", "3000",
            "--seed", "11", "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(out).unwrap()
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "1");
    let c = run("c.csv", "8");
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert!(a.starts_with("model,d,L,p,eps,n,s,norm_mode,mean,stderr,samples,seed\n"));
    let m = json(&dir.path().join("c.csv.manifest.json"));
    assert_eq!(m["seed"], 11);
    assert_eq!(m["workers"], 8);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "# kernel settings\nd = 3\nL = 2\nmoment = 2\n").unwrap();
    let out = dir.path().join("k.json");
    let c = cfg.to_str().unwrap();
    let o = spreadlab(&["--config", c, "kernel", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&out)["d"], 3);
    assert_eq!(json(&out)["support_size"], 124);

    let o = spreadlab(&["--config", c, "kernel", "--d", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let v = json(&out);
    assert_eq!(v["d"], 1);
    assert_eq!(v["L"], 2);
    assert_eq!(v["support_size"], 4);
}

#[test]
fn exact_then_identity_check() {
    let dir = tempfile::tempdir().unwrap();
    let ex = dir.path().join("ex.json");
    let o = spreadlab(&["exact", "--d", "1", "--L", "1", "--p", "1", "--n-max", "8", "--out", ex.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = dir.path().join("id.json");
    let o = spreadlab(&["series", "identity-check", "--input", ex.to_str().unwrap(), "--out", rep.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&rep);
    assert_eq!(v["passed"], true);
    assert_eq!(v["leibniz"].as_array().unwrap().len(), 4);
}

#[test]
fn scaling_reports_every_assertion() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cp.csv");
    let o = spreadlab(&[
        "cp", "--d", "2", "--L", "1", "--p", "1.2", "--t-list", "0.25,0.5,1,2,4", "--s", "0,1,2", "--samples", "2000",
        "--out", csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = dir.path().join("rep.json");
    let o = spreadlab(&["scaling", "--in", csv.to_str().unwrap(), "--report", rep.to_str().unwrap(), "--check", "holder"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&rep);
    let a = v["assertions"].as_array().unwrap();
    // (s, 2r) = (1, 2) for both norm modes
    assert_eq!(a.len(), 2);
    assert!(a.iter().all(|x| x["check"] == "holder" && x["passed"] == true && x["margin"].as_f64().unwrap() >= 0.0));
}

#[test]
fn extract_recovers_square_coefficients() {
    let o = spreadlab(&["series", "extract", "--f", "power", "--u", "2", "--n-max", "100"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let a = v["coefficients"].as_array().unwrap();
    for (n, x) in a.iter().enumerate() {
        assert!((x.as_f64().unwrap() / (n as f64 + 1.0) - 1.0).abs() < 1e-9, "a_{n} = {x}");
    }
}
