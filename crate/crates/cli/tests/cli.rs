use std::path::Path;
use std::process::{Command, Output};

fn invitesim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_invitesim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let out = invitesim(&["preset", "fig2b", "--export"]);
    assert!(out.status.success());
    let mut cfg: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    cfg["params"]["r"] = 50.0.into();
    cfg["initial"] = serde_json::json!([{ "y": 50, "x": 0 }]);
    cfg["horizon"] = 5.0.into();
    let path = dir.join("small.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn lists_and_exports_presets() {
    let out = invitesim(&["preset", "--list"]);
    assert!(out.status.success());
    let names = String::from_utf8(out.stdout).unwrap();
    for name in ["fig2a", "fig2d", "fig3", "fig4a", "fig4b"] {
        assert!(names.lines().any(|l| l == name), "{name} missing");
    }
    let out = invitesim(&["preset", "fig2d", "--export"]);
    let cfg: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg["initial"][0]["y"], -1000);
    assert_eq!(cfg["initial"][0]["x"], 2000);
}

#[test]
fn compare_writes_manifest_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let run = |sub: &str, workers: &str| {
        let out = dir.path().join(format!("{sub}-{workers}"));
        let o = invitesim(&[sub, "--config", &cfg, "--seed", "7", "--workers", workers, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let m: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
        m
    };
    let a = run("compare", "1");
    let b = run("compare", "3");
    assert_eq!(a["config"]["seed"], 7);
    assert_eq!(a["files"], b["files"]);
    let paths: Vec<&str> = a["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert!(paths.contains(&"plot_0.csv"), "{paths:?}");
    let fluid_only = run("fluid", "1");
    let paths: Vec<&str> = fluid_only["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert!(paths.iter().all(|p| p.starts_with("fluid_")), "{paths:?}");
}

#[test]
fn errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ \"scheme\": \"B\" }").unwrap();
    assert_eq!(invitesim(&["simulate", "--config", bad.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(invitesim(&["preset", "fig9"]).status.code(), Some(1));
    assert_eq!(invitesim(&["acceptance", "nope"]).status.code(), Some(1));
    assert_eq!(invitesim(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn passing_acceptance_suite_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = invitesim(&["acceptance", "closed-form", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let c = &summary["suites"][0]["criteria"][0];
    assert_eq!(c["criterion"], "closed-form");
    assert_eq!(c["pass"], true);
    assert!(c["measured"].is_object() && c["threshold"].is_object());
    assert!(dir.path().join("acceptance_closed-form.json").exists());
}
