use std::process::Command;

fn lab(root: &std::path::Path) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lab"));
    c.env("FBLAB_OUTPUT_ROOT", root);
    c
}

#[test]
fn unknown_config_key_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "kind = \"solve\"\nseed = 1\n[grid]\ncellz = 8\n").unwrap();
    let out = lab(dir.path()).args(["solve", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("cellz") && err.contains("line 4"), "{err}");
}

#[test]
fn kind_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "kind = \"solve\"\nseed = 1\n").unwrap();
    let out = lab(dir.path()).args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_writes_artifacts_under_the_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "kind = \"solve\"\nseed = 1\n[grid]\ncells = 24\nsteps = 20\nsave_every = 10\n[solve]\nplot = true\n",
    )
    .unwrap();
    let out = lab(dir.path()).args(["solve", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_string_lossy().starts_with("solve-"))
        .expect("run directory");
    for f in ["norms.csv", "norms.svg", "oracle.csv", "config.toml", "manifest.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
}

#[test]
fn formbound_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(dir.path())
        .args(["formbound", "--field", "hardy", "--delta", "0.04", "--budget", "4", "--out"])
        .arg(dir.path().join("fb"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("fb/formbound.csv")).unwrap();
    assert!(csv.starts_with("field_id,family,budget,seed,delta_certified,estimate"), "{csv}");
}

#[test]
fn verify_single_criterion_and_unknown_name() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(dir.path()).args(["verify", "--criterion", "heat-oracle"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("PASS  1 heat-oracle"), "{text}");
    assert!(dir.path().join("verify-quick/criteria.csv").exists());
    let bad = lab(dir.path()).args(["verify", "--criterion", "nope"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
