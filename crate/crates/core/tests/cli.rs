use std::fs;
use std::process::Command;

fn srlab() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_srlab"));
    c.env_clear();
    c
}

#[test]
fn design_prints_conservative_alpha() {
    let out = srlab().arg("design").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("conservative alpha = 0.065359"), "{text}");
    assert!(text.contains("certificate A-BK: pass"));
    assert!(text.contains("certificate A-LC: pass"));
}

#[test]
fn run_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = srlab()
            .args(["run", "--policy", "baseline", "--seed", "7", "--out-dir"])
            .arg(dir.path().join(sub))
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run("a");
    run("b");
    for f in ["trace.csv", "cycles.csv"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(!a.is_empty());
        assert!(a == b, "{f} differs");
    }
    // The summary echoes the config, whose out_dir differs between the runs.
    let summary = |sub: &str| {
        let s = fs::read_to_string(dir.path().join(sub).join("summary.toml")).unwrap();
        s.lines().filter(|l| !l.starts_with("out_dir")).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(summary("a"), summary("b"));
    let trace = fs::read_to_string(dir.path().join("a/trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap().split(',').count(), 35);
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = srlab().args(["design", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "rho_s = 0.05\n").unwrap();
    let out = srlab().arg("--config").arg(&bad).arg("design").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());

    let unknown = dir.path().join("unknown.toml");
    fs::write(&unknown, "no_such_key = 1\n").unwrap();
    let out = srlab().arg("--config").arg(&unknown).arg("design").output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = srlab().args(["run", "--policy", "rl"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = srlab().args(["eval", "--model"]).arg(dir.path().join("missing.sac")).output().unwrap();
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn env_override_reaches_design() {
    let out = srlab().env("SRLAB_ALPHA_MAX", "0.15").arg("design").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("alpha_max = 0.150000 (configured)"), "{text}");
}

#[test]
fn failed_mission_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = srlab()
        .env("SRLAB_CYCLE_CAP", "2")
        .args(["run", "--policy", "conservative", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(dir.path().join("trace.csv").exists());
}

#[test]
fn short_train_then_run_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.sac");
    let out = srlab()
        .env("SRLAB_HIDDEN", "[16, 16]")
        .env("SRLAB_WARMUP_STEPS", "20")
        .env("SRLAB_BATCH_SIZE", "16")
        .args(["train", "--steps", "40", "--seed", "3", "--out"])
        .arg(&model)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(model.exists());
    assert!(dir.path().join("m.sac.log.csv").exists());

    let out = srlab()
        .env("SRLAB_CYCLE_CAP", "300")
        .args(["run", "--policy", "rl", "--model"])
        .arg(&model)
        .arg("--out-dir")
        .arg(dir.path().join("run"))
        .output()
        .unwrap();
    assert!(matches!(out.status.code(), Some(0) | Some(2)));
    assert!(dir.path().join("run/trace.csv").exists());

    let out = srlab()
        .args(["eval", "--episodes", "1", "--model"])
        .arg(&model)
        .arg("--out-dir")
        .arg(dir.path().join("eval"))
        .output()
        .unwrap();
    assert!(matches!(out.status.code(), Some(0) | Some(2)));
    assert!(dir.path().join("eval/eval_summary.toml").exists());
}
