use std::path::Path;
use std::process::{Command, Output};

fn magloop(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magloop"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn code(args: &[&str], out: &Path) -> i32 {
    magloop(args, out).status.code().unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(code(&["audit", "--system", "sphere_cap"], out), 0);
    assert_eq!(code(&["audit", "--system", "no_such_system"], out), 2);
    assert_eq!(code(&["audit"], out), 2);
    assert_eq!(code(&["descend", "--system", "flat_larmor", "--samples", "4"], out), 2);
    assert_eq!(code(&["shoot", "--system", "flat_larmor", "--x0", "1,zz"], out), 2);
    assert_eq!(code(&["frobnicate"], out), 2);
    // the open patch: the flow leaves the chart before closing up
    assert_eq!(code(&["shoot", "--system", "hyperbolic_patch"], out), 1);
    assert_eq!(
        code(&["descend", "--system", "flat_larmor", "--critical", "--budget", "1", "--samples", "32"], out),
        1
    );
}

#[test]
fn help_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_magloop")).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("continue"));
    drop(dir);
}

#[test]
fn shoot_writes_loop_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let o = magloop(&["shoot", "--system", "flat_larmor"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("shoot.json")).unwrap()).unwrap();
    assert_eq!(report["command"], "shoot");
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    assert!(report["result"]["residual"].as_f64().unwrap() < 1e-8);
    let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,x1,x2,v1,v2\n"));
    let lp = std::fs::read_to_string(dir.path().join("loop.csv")).unwrap();
    assert!(lp.starts_with("t,x1,x2\n"));
    assert_eq!(code(&["plot", "--input", dir.path().join("loop.csv").to_str().unwrap()], dir.path()), 0);
    let svg = std::fs::read_to_string(dir.path().join("plot.svg")).unwrap();
    assert!(svg.contains("<polygon"));
}

#[test]
fn config_file_and_flags_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"system": "flat_larmor", "epsilon": 0.3, "tau": 0.3}"#).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&["descend", "--critical", "--config", cfg.to_str().unwrap()], &a), 0);
    assert_eq!(code(&["descend", "--critical", "--system", "flat_larmor", "--eps", "0.3", "--tau", "0.3"], &b), 0);
    let ra = std::fs::read(a.join("descend.json")).unwrap();
    assert_eq!(ra, std::fs::read(b.join("descend.json")).unwrap());
    std::fs::write(&cfg, r#"{"system": "flat_larmor", "epsilom": 0.3}"#).unwrap();
    assert_eq!(code(&["audit", "--config", cfg.to_str().unwrap()], dir.path()), 2);
}

#[test]
fn inline_system_definition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"system": {"name": "plane", "dim": 2, "metric": [["1","0"],["0","1"]], "potential": ["0","3*x1"],
            "periods": [null, null], "domain_box": [[-4,4],[-4,4]]}}"#,
    )
    .unwrap();
    let o = magloop(&["audit", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}
