use std::path::{Path, PathBuf};
use std::process::Command;

fn fogfl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fogfl"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fogfl-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn run_prints_latency_breakdown() {
    let dir = scratch("run");
    let cfg = write_config(&dir, "n_ids = 2\nn_aps = 2\nseed = 4\n");
    let out = fogfl()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--scheme", "edge_only"])
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(matches!(out.status.code(), Some(0) | Some(2)), "{out:?}");
    for key in ["tau_total", "tau_c", "tau_w", "tau_f", "eta_l", "n_g"] {
        assert!(text.lines().any(|l| l.starts_with(key)), "{key} missing:\n{text}");
    }
    assert!(text.contains("edge_only"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn sweep_writes_csv_and_summary() {
    let dir = scratch("sweep");
    let cfg = write_config(&dir, "n_ids = 2\nn_aps = 2\nt_max = 5\n");
    let csv = dir.join("rows.csv");
    let out = fogfl()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .args(["--key", "fronthaul_bps", "--values", "1e8,2e8", "--trials", "2", "--warm-start", "--out"])
        .arg(&csv)
        .output()
        .unwrap();
    assert!(matches!(out.status.code(), Some(0) | Some(2)), "{out:?}");
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert!(rows.starts_with("seed,"));
    assert_eq!(rows.lines().count(), 1 + 2 * 3 * 2);
    assert!(dir.join("rows_summary.csv").exists());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn bad_config_is_an_error() {
    let dir = scratch("bad");
    let cfg = write_config(&dir, "n_ids = 2\nwarp_factor = 9\n");
    let out = fogfl().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warp_factor"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn unknown_sweep_key_is_rejected() {
    let dir = scratch("key");
    let cfg = write_config(&dir, "n_ids = 2\n");
    let out = fogfl()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .args(["--key", "n_ids", "--values", "1,2", "--out"])
        .arg(dir.join("x.csv"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn oracle_writes_both_methods() {
    let dir = scratch("oracle");
    let cfg = write_config(&dir, "n_ids = 1\nn_aps = 1\nm_i = 1\nm_a = 1\nseed = 2\n");
    let csv = dir.join("oracle.csv");
    let out = fogfl().args(["oracle", "--config"]).arg(&cfg).arg("--out").arg(&csv).output().unwrap();
    assert!(matches!(out.status.code(), Some(0) | Some(2)), "{out:?}");
    let text = std::fs::read_to_string(&csv).unwrap();
    let methods: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, ["oracle", "sca"]);
    std::fs::remove_dir_all(&dir).unwrap();
}
