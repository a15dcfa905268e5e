use std::path::PathBuf;
use std::process::Command;

fn avl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_avl"))
}

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn validate_reports_ok_and_errors() {
    let out = avl().arg("validate").arg(scenarios().join("quickstart.toml")).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "name = \"bad\"\nduration_s = -1\nseed = 1\nnetwork = \"missing.json\"\n[vehicle]\nmode = \"lane-follow\"\nlane = 1\n").unwrap();
    let out = avl().arg("validate").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("duration_s"), "{text}");
    assert!(text.contains("network"), "{text}");
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = avl()
        .args(["run", "--seed", "3", "--out"])
        .arg(dir.path())
        .arg(scenarios().join("quickstart.toml"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["epochs.csv", "summary.json", "geometry.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 3);
    assert_eq!(summary["aggregates"]["epochs"], 120);
}

#[test]
fn gen_network_and_codes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("net.toml");
    let net = dir.path().join("net.json");
    std::fs::copy(scenarios().join("highway-network.toml"), &spec).unwrap();
    let out = avl().arg("gen-network").arg(&spec).arg(&net).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(&net).unwrap(), std::fs::read(scenarios().join("highway.json")).unwrap());

    let out = avl().args(["codes", "--prn", "1"]).output().unwrap();
    let chips = String::from_utf8(out.stdout).unwrap();
    assert_eq!(chips.trim().len(), 1023);
    assert!(chips.starts_with("1100100000"));
    assert_eq!(avl().args(["codes", "--prn", "33"]).output().unwrap().status.code(), Some(2));
}
