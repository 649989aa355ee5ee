use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::json;

fn lumen(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lumen")).args(args).current_dir(dir).output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn dense(dir: &Path) -> PathBuf {
    let users: Vec<_> = (0..5)
        .map(|k| json!({"x": 2.0 + 0.3 * (k % 3) as f64, "y": 4.0 + 0.25 * (k / 3) as f64, "beta": 2, "t_user": 12.0}))
        .collect();
    let s = json!({"users": users, "fleet": [{"home": [0.0, 0.0, 0.0]}]});
    let p = dir.join("dense.json");
    fs::write(&p, s.to_string()).unwrap();
    p
}

fn sparse(dir: &Path) -> PathBuf {
    let mut users: Vec<_> = (0..3).map(|k| json!({"x": 0.3 * k as f64, "y": 2.0, "beta": 1, "t_user": 10.0})).collect();
    users.extend((0..3).map(|k| json!({"x": 100.0 + 0.3 * k as f64, "y": 2.0, "beta": 3, "t_user": 10.0})));
    let s = json!({"users": users, "fleet": [{"home": [0.0, 0.0, 0.0]}, {"home": [98.0, 0.0, 0.0]}]});
    let p = dir.join("sparse.json");
    fs::write(&p, s.to_string()).unwrap();
    p
}

fn circles(svg: &str) -> usize {
    let doc = roxmltree::Document::parse(svg).unwrap();
    doc.descendants().filter(|n| n.has_tag_name("circle")).count()
}

#[test]
fn dense_plan_has_one_trace_and_disk() {
    let dir = tempfile::tempdir().unwrap();
    let s = dense(dir.path());
    ok(&lumen(&["plan", s.to_str().unwrap(), "-o", "out"], dir.path()));
    let out = dir.path().join("out");
    assert!(out.join("trace_1.csv").exists());
    assert!(!out.join("trace_2.csv").exists());
    assert_eq!(circles(&fs::read_to_string(out.join("map2d.svg")).unwrap()), 1);
}

#[test]
fn sparse_plan_has_two_traces_and_disks() {
    let dir = tempfile::tempdir().unwrap();
    let s = sparse(dir.path());
    ok(&lumen(&["plan", s.to_str().unwrap(), "-o", "out"], dir.path()));
    let out = dir.path().join("out");
    assert!(out.join("trace_1.csv").exists() && out.join("trace_2.csv").exists());
    assert_eq!(circles(&fs::read_to_string(out.join("map2d.svg")).unwrap()), 2);
}

#[test]
fn invalid_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"users": [], "fleet": []}"#).unwrap();
    let out = lumen(&["plan", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    let out = lumen(&["plan", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn plan_and_compile_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let s = sparse(dir.path());
    let s = s.to_str().unwrap();
    for d in ["a", "b"] {
        ok(&lumen(&["plan", s, "-o", d, "--seed", "7"], dir.path()));
        ok(&lumen(&["compile", &format!("{d}/plan.json"), "--sn", "X1,X2", "-o", &format!("{d}/flight.txt")], dir.path()));
    }
    for f in ["plan.json", "flight.txt", "trace_1.csv", "map2d.svg"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    let text = fs::read_to_string(dir.path().join("a/flight.txt")).unwrap();
    assert_eq!(lumen_core::flight_text::parse(&text).unwrap().render(), text);
}

#[test]
fn compile_rejects_wrong_sn_count() {
    let dir = tempfile::tempdir().unwrap();
    let s = dense(dir.path());
    ok(&lumen(&["plan", s.to_str().unwrap()], dir.path()));
    let out = lumen(&["compile", "plan.json", "--sn", "A,B"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fly_and_report_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let s = sparse(dir.path());
    ok(&lumen(&["plan", s.to_str().unwrap()], dir.path()));
    ok(&lumen(&["compile", "plan.json", "--sn", "A1,A2"], dir.path()));
    let out = lumen(&["fly", "flight.txt", "--mock", "2", "--plan", "plan.json", "--time-scale", "0.02"], dir.path());
    ok(&out);
    let log: lumen_core::flight_log::FlightLog = fs::read_to_string(dir.path().join("flight.log")).unwrap().parse().unwrap();
    for d in [1, 2] {
        assert_eq!(log.acknowledged(d).last().map(String::as_str), Some("land"));
    }
    ok(&lumen(&["report", "flight.log", "plan.json", "-o", "rep"], dir.path()));
    let rep = dir.path().join("rep");
    assert!(fs::read_to_string(rep.join("battery.csv")).unwrap().starts_with("drone,t_s,battery_pct"));
    roxmltree::Document::parse(&fs::read_to_string(rep.join("battery.svg")).unwrap()).unwrap();
    assert!(fs::read_to_string(rep.join("summary.txt")).unwrap().contains("drone 2"));
}

#[test]
fn retry_exhaustion_exits_3_and_keeps_log() {
    let dir = tempfile::tempdir().unwrap();
    let s = dense(dir.path());
    ok(&lumen(&["plan", s.to_str().unwrap()], dir.path()));
    ok(&lumen(&["compile", "plan.json", "--sn", "Z"], dir.path()));
    fs::write(dir.path().join("faults.json"), r#"{"drop_first": {"forward": 100}}"#).unwrap();
    let out = lumen(&["fly", "flight.txt", "--mock", "1", "--faults", "faults.json", "--time-scale", "0.01"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(fs::read_to_string(dir.path().join("flight.log")).unwrap().contains("retry forward"));
}

#[test]
fn fly_input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = lumen(&["fly", "nope.txt", "--mock", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    fs::write(dir.path().join("t.txt"), "scan 1\ncorrect_ip\n1=A\n*>battery?\n*>takeoff\n").unwrap();
    let out = lumen(&["fly", "t.txt", "--mock", "3"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_of_empty_log_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let s = dense(dir.path());
    ok(&lumen(&["plan", s.to_str().unwrap()], dir.path()));
    fs::write(dir.path().join("empty.log"), "").unwrap();
    let out = lumen(&["report", "empty.log", "plan.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn external_server_flag() {
    let dir = tempfile::tempdir().unwrap();
    let rt = tokio::runtime::Runtime::new().unwrap();
    let svc = rt.block_on(lumen_service::spawn("127.0.0.1:0".parse().unwrap())).unwrap();
    let s = dense(dir.path());
    ok(&lumen(&["--server", &svc.url(), "plan", s.to_str().unwrap()], dir.path()));
    assert!(dir.path().join("plan.json").exists());
    let out = lumen(&["--server", "http://127.0.0.1:9", "plan", s.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
}
