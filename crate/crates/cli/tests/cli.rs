use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_porodelay"))
}

fn small() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/small.toml")
}

fn invoke(sub: &str, out: &Path, overrides: &[&str]) -> Output {
    let mut cmd = bin();
    cmd.arg(sub).arg("--scenario").arg(small()).arg("--out").arg(out);
    for o in overrides {
        cmd.arg("--override").arg(o);
    }
    cmd.output().expect("spawn porodelay")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = invoke("run", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["complete"], true);
    assert!(summary["E0"].as_f64().unwrap() > 0.0);
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("# scenario_hash: "));
    let snap = std::fs::read(dir.path().join("final.bin")).unwrap();
    // 4 fields of N = 30 plus z of 30 x 11, after a 64-byte header.
    assert_eq!(snap.len(), 64 + 8 * (4 * 30 + 30 * 11));
}

#[test]
fn inadmissible_coupling_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = invoke("run", dir.path(), &["params.b=1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("b² ≤ μξ"), "{}", stderr(&o));
}

#[test]
fn unstable_cfl_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = invoke("run", dir.path(), &["time.cfl=5"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let summary = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    assert!(summary.contains("\"complete\": false"));
}

#[test]
fn spectrum_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = invoke("spectrum", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("spectrum.json")).unwrap()).unwrap();
    assert!(v["abscissa"].as_f64().unwrap() < 0.0);
    assert_eq!(v["dim"], 4 * 30 + 30 * 10);

    let o = invoke("spectrum", dir.path(), &["params.b=1.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = invoke("spectrum", dir.path(), &["grid.n=200", "grid.m=41"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("resource cap"));
}

#[test]
fn verify_rejects_growth_regime() {
    let dir = tempfile::tempdir().unwrap();
    let o = invoke("verify", dir.path(), &["params.mu2=0.6"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = invoke("run", dir.path(), &["params.gamma=1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn repeated_runs_are_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(invoke("run", a.path(), &[]).status.code(), Some(0));
    assert_eq!(invoke("run", b.path(), &[]).status.code(), Some(0));
    for f in ["trajectory.csv", "summary.json", "final.bin"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
}

#[test]
fn seed_changes_hash() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    invoke("run", a.path(), &[]);
    let o = bin()
        .args(["run", "--seed", "7", "--scenario"])
        .arg(small())
        .arg("--out")
        .arg(b.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let ha = std::fs::read_to_string(a.path().join("trajectory.csv")).unwrap();
    let hb = std::fs::read_to_string(b.path().join("trajectory.csv")).unwrap();
    assert_ne!(ha.lines().next(), hb.lines().next());
}

#[cfg(unix)]
#[test]
fn interrupt_writes_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let child = bin()
        .args(["run", "--scenario"])
        .arg(small())
        .arg("--out")
        .arg(dir.path())
        .args(["--override", "time.t_end=1000"])
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    std::thread::sleep(std::time::Duration::from_millis(300));
    let kill = Command::new("kill").arg("-INT").arg(child.id().to_string()).status().unwrap();
    assert!(kill.success());
    let o = child.wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(130), "{}", stderr(&o));
    let summary = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    assert!(summary.contains("\"complete\": false"));
    assert!(summary.contains("interrupted"));
}
