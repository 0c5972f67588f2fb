use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_disclab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn lines(text: &str) -> Vec<Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn read_lines(p: &Path) -> Vec<Value> {
    lines(&std::fs::read_to_string(p).unwrap())
}

fn kind<'a>(v: &'a [Value], k: &str) -> Vec<&'a Value> {
    v.iter().filter(|x| x["kind"] == k).collect()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap()
}

#[test]
fn scaffold_writes_four_generations() {
    let d = TempDir::new().unwrap();
    let o = run(
        d.path(),
        &["scaffold", "--p1", "2", "--p2", "3", "--k", "1", "--generations", "4", "--out", "s.json", "--csv", "s.csv"],
    );
    assert!(o.status.success(), "{o:?}");
    let v = read_lines(&d.path().join("s.json"));
    assert_eq!(kind(&v, "scaffold.generation").len(), 4);
    let csv = std::fs::read_to_string(d.path().join("s.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "n,g_rn,g_rprime,g_rhat,g_rstar,g_rdprime,eps,residual"
    );
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn ode_predict_example() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), &["ode", "predict", "--k", "1", "--p1", "2", "--p2", "4", "--p", "4"]);
    assert!(o.status.success());
    let v = &lines(&String::from_utf8(o.stdout).unwrap())[0];
    assert_eq!(v["sigma"].as_f64(), Some(3.0));
    assert_eq!(v["alpha"].as_f64(), Some(0.5));
    assert_eq!(v["lambda"].as_f64(), Some(1.5));
}

#[test]
fn series_prop43b_writes_trace() {
    let d = TempDir::new().unwrap();
    let o = run(
        d.path(),
        &["series", "prop43", "--variant", "b", "--lambda", "1", "--sigma", "2", "--out", "se.json", "--trace", "t.csv"],
    );
    assert!(o.status.success(), "{o:?}");
    let v = read_lines(&d.path().join("se.json"));
    assert_eq!(kind(&v, "series.prop43").len(), 1);
    let summary = kind(&v, "series.summary")[0];
    assert_eq!(summary["exactness_mismatches"].as_u64(), Some(0));
    let csv = std::fs::read_to_string(d.path().join("t.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "g,log_mu,nu,K_log");
    assert!(csv.lines().count() > 100);
}

#[test]
fn report_empty_and_missing() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), &["report", "--out", "r.md"]);
    assert!(o.status.success());
    let md = std::fs::read_to_string(d.path().join("r.md")).unwrap();
    assert_eq!(md.lines().count(), 2);

    let o = run(d.path(), &["report", "nope.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "validation");
}

#[test]
fn report_has_closure_row_for_scaffold_run() {
    let d = TempDir::new().unwrap();
    assert!(run(d.path(), &["scaffold", "--out", "s.json"]).status.success());
    let o = run(d.path(), &["report", "s.json", "--csv", "r.csv"]);
    assert!(o.status.success());
    let md = String::from_utf8(o.stdout).unwrap();
    assert!(md.contains("| closure cross-residual |"), "{md}");
    assert!(!md.contains("FAIL"));
    assert!(d.path().join("r.csv").exists());
}

#[test]
fn validation_errors_exit_2_with_json() {
    let d = TempDir::new().unwrap();
    // p1 must be below p2
    let o = run(d.path(), &["scaffold", "--p1", "3", "--p2", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_json(&o);
    assert_eq!(e["exit_code"], 2);
    assert!(!e["message"].as_str().unwrap().is_empty());

    let o = run(d.path(), &["bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "validation");

    let o = run(d.path(), &["ode", "xi", "--p1", "2", "--p2", "3", "--eps", "5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_and_overrides() {
    let d = TempDir::new().unwrap();
    std::fs::write(
        d.path().join("c.toml"),
        "[scaffold]\nk = 1\np1 = 2.0\np2 = 4.0\n\n[ode]\np = 4.0\n",
    )
    .unwrap();
    let o = run(d.path(), &["--config", "c.toml", "ode", "predict"]);
    assert!(o.status.success(), "{o:?}");
    let v = &lines(&String::from_utf8(o.stdout).unwrap())[0];
    assert_eq!(v["sigma"].as_f64(), Some(3.0));
    let o = run(d.path(), &["ode", "predict", "--config", "c.toml", "--p2", "3", "--p", "3"]);
    let v = &lines(&String::from_utf8(o.stdout).unwrap())[0];
    assert_eq!(v["sigma"].as_f64(), Some(2.0));

    std::fs::write(d.path().join("bad.toml"), "[scaffold]\nbogus = 1\n").unwrap();
    let o = run(d.path(), &["--config", "bad.toml", "scaffold"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_json(&o)["message"].as_str().unwrap().contains("bogus"));
}

#[test]
fn outputs_are_deterministic() {
    let d = TempDir::new().unwrap();
    for name in ["a", "b"] {
        let out = format!("{name}.json");
        let o = run(d.path(), &["riesz", "--cells", "10", "--circles", "20", "--out", &out]);
        assert!(o.status.success(), "{o:?}");
    }
    let a = std::fs::read(d.path().join("a.json")).unwrap();
    let b = std::fs::read(d.path().join("b.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn floats_carry_seventeen_digits() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), &["ode", "xi", "--p1", "2", "--p2", "3"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let v = &lines(&text)[0];
    let xi = v["result"]["xi"].as_f64().unwrap();
    let lit = text.split("\"xi\":").nth(1).unwrap().split([',', '}']).next().unwrap();
    assert_eq!(lit.split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
    assert_eq!(lit.parse::<f64>().unwrap(), xi);
}

#[test]
fn ode_instances_pass_audit() {
    let d = TempDir::new().unwrap();
    let o = run(d.path(), &["ode", "majorant", "--p1", "3", "--p2", "4", "--out", "m.json", "--csv", "m.csv"]);
    assert!(o.status.success(), "{o:?}");
    let v = read_lines(&d.path().join("m.json"));
    let inst = kind(&v, "ode.instance")[0];
    assert_eq!(inst["inequalities"]["thm13a"]["pass"], true);
    assert_eq!(inst["inequalities"]["cor14"]["pass"], true);
    let csv = std::fs::read_to_string(d.path().join("m.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "g,log_logM,ratio");
}

#[test]
fn numerical_failure_exits_3() {
    let d = TempDir::new().unwrap();
    // the integrand overflows long before g = 800
    let o = run(d.path(), &["logderiv", "i-alpha", "--g", "800", "--s", "3"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["error"], "numerical");
}
