use std::path::Path;
use std::process::{Command, Output};

fn bnoise(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bnoise")).args(args).env("BNOISE_OUT_DIR", out_dir).output().expect("spawn bnoise")
}

#[test]
fn list_experiments_prints_registry() {
    let dir = tempfile::tempdir().unwrap();
    let out = bnoise(&["list-experiments"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("parabolic-rate\tinterval\twhite noise H=1/2")));
    assert!(text.lines().any(|l| l.starts_with("young-bound\tinterval")));
    assert!(text.lines().count() > 10);
}

#[test]
fn elliptic_rate_on_disk_writes_nine_rows_and_slope_near_minus_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = bnoise(&["run", "elliptic-rate", "--domain", "ball2", "--noise", "white"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("elliptic-rate-ball2-white.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "experiment,domain,dist,t,value,stderr,bound_rhs,ratio,N,seed");
    assert_eq!(lines.count(), 9);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("elliptic-rate-ball2-white.json")).unwrap())
            .unwrap();
    let slope = json["detail"]["report"]["slope"].as_f64().unwrap();
    assert!((slope + 1.0).abs() < 0.1, "slope {slope}");
    assert_eq!(json["passed"], true);
}

#[test]
fn kernel_selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = bnoise(&["kernel-selftest", "--out-dir", dir.path().to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("kernel-selftest.csv").exists());
}

#[test]
fn missing_spectral_source_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "[experiment]\nname = \"elliptic-rate\"\n[domain]\nkind = \"halfspace\"\nm = 1\n[noise]\nfamily = \"homogeneous\"\nspectral_file = \"missing.csv\"\n[kernel]\nlambda = 1.0\n",
    )
    .unwrap();
    let out = bnoise(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("noise.spectral_file"));
}

#[test]
fn unknown_key_and_ambiguous_run_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[experiment]\nname = \"kernel-selftest\"\nsurprise = true\n").unwrap();
    assert_eq!(bnoise(&["run", "--config", cfg.to_str().unwrap()], dir.path()).status.code(), Some(2));
    assert_eq!(bnoise(&["run", "elliptic-rate"], dir.path()).status.code(), Some(2));
}

#[test]
fn failed_check_exits_one_with_details_in_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = bnoise(&["run", "laplacian-identities"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("laplacian-identities.json")).unwrap()).unwrap();
    assert_eq!(json["passed"], false);
    assert!(json["checks"].as_array().unwrap().iter().any(|c| c["passed"] == false));
}

#[test]
fn same_seed_gives_identical_csv() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, workers) in [(&a, "1"), (&b, "3")] {
        let out = bnoise(&["run", "fbm-covariance", "--seed", "5", "--workers", workers], dir.path());
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("fbm-covariance.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}
