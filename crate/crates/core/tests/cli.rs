//! End-to-end runs of the experiment harness and the binary.

use std::path::{Path, PathBuf};
use std::process::Command;

use stripgreen::harness::{run, RunConfig, RunManifest, RunOptions};

fn smoke() -> RunConfig {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/smoke.json");
    RunConfig::load(&p).unwrap()
}

fn opts(out: &Path, workers: usize, only: &[&str]) -> RunOptions {
    RunOptions {
        config: smoke(),
        seed: None,
        workers: Some(workers),
        out: out.to_path_buf(),
        emit_plot: false,
        only: only.iter().map(|s| s.to_string()).collect(),
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stripgreen"))
}

#[test]
fn csvs_do_not_depend_on_worker_count() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run(&opts(a.path(), 1, &[])).unwrap();
    run(&opts(b.path(), 4, &[])).unwrap();
    for e in ra.manifest.experiments.values() {
        for f in &e.files {
            let x = std::fs::read(a.path().join(f)).unwrap();
            let y = std::fs::read(b.path().join(f)).unwrap();
            assert_eq!(x, y, "{f}");
        }
    }
}

#[test]
fn partial_rerun_keeps_other_artifacts() {
    let d = tempfile::tempdir().unwrap();
    run(&opts(d.path(), 2, &[])).unwrap();
    let before = RunManifest::load(d.path()).unwrap();
    let variance = std::fs::read(d.path().join("variance.csv")).unwrap();
    let mtime = |p: PathBuf| std::fs::metadata(p).unwrap().modified().unwrap();
    let t_var = mtime(d.path().join("variance.csv"));

    let s = run(&opts(d.path(), 2, &["msa", "sector"])).unwrap();
    assert_eq!(s.ran, vec!["msa".to_string(), "sector".to_string()]);
    let after = RunManifest::load(d.path()).unwrap();
    assert_eq!(before.experiments.len(), after.experiments.len());
    assert_eq!(
        before.experiments["variance"],
        after.experiments["variance"]
    );
    assert_eq!(
        variance,
        std::fs::read(d.path().join("variance.csv")).unwrap()
    );
    assert_eq!(t_var, mtime(d.path().join("variance.csv")));
    assert!(run(&opts(d.path(), 2, &["nope"])).is_err());
}

#[test]
fn seed_override_changes_results() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&opts(a.path(), 2, &["variance"])).unwrap();
    let mut o = opts(b.path(), 2, &["variance"]);
    o.seed = Some(99);
    let s = run(&o).unwrap();
    assert_eq!(s.manifest.seed, 99);
    assert_ne!(
        std::fs::read(a.path().join("variance.csv")).unwrap(),
        std::fs::read(b.path().join("variance.csv")).unwrap()
    );
}

#[test]
fn manifest_hash_matches_config() {
    let d = tempfile::tempdir().unwrap();
    let s = run(&opts(d.path(), 1, &["msa"])).unwrap();
    assert_eq!(s.manifest.config_hash, smoke().hash());
    assert!(s.passed());
}

#[test]
fn single_column_sigma_config_fails_validation() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("bad.json");
    let text =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/smoke.json"))
            .unwrap()
            .replace("\"lGrid\": [4, 8, 16, 32]", "\"lGrid\": [1, 8]");
    std::fs::write(&p, text).unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(&p)
        .arg("--out")
        .arg(d.path().join("res"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json") && err.contains("b = a"), "{err}");
    assert!(!d.path().join("res").exists());
}

#[test]
fn unknown_config_keys_are_errors() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("typo.json");
    let text =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/smoke.json"))
            .unwrap()
            .replace("\"samples\": 500", "\"sample\": 500");
    std::fs::write(&p, text).unwrap();
    let out = bin().args(["run", "--config"]).arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("typo.json"));
}

#[test]
fn standalone_subcommands_write_csv_and_manifest() {
    let d = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["msa", "--l0", "1e6", "--m0", "0.01", "--target", "1e24"])
        .env("STRIPGREEN_OUT", d.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(d.path().join("msa.csv").exists());
    assert!(RunManifest::load(d.path()).unwrap().passed());

    // a starting rate below the scale threshold is refused: nonzero exit
    let out = bin()
        .args([
            "msa", "--l0", "1e6", "--m0", "1e-9", "--W", "3", "--target", "1e24", "--out",
        ])
        .arg(d.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = bin()
        .args([
            "decay",
            "--W",
            "1",
            "--L",
            "40",
            "--E",
            "3",
            "--dist",
            "free",
            "--samples",
            "50",
            "--emit-plot",
            "--out",
        ])
        .arg(d.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(d.path().join("decay.gp").exists());
    let out = bin()
        .args(["decay", "--W", "1", "--L", "4", "--dist", "gauss:1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn plots_for_each_csv_and_missing_listed() {
    let d = tempfile::tempdir().unwrap();
    run(&opts(d.path(), 2, &["variance", "lyapunov"])).unwrap();
    std::fs::remove_file(d.path().join("lyapunov.csv")).unwrap();
    let out = bin().arg("plots").arg(d.path()).output().unwrap();
    assert!(out.status.success());
    assert!(d.path().join("variance.gp").exists());
    assert!(!d.path().join("lyapunov.gp").exists());
    assert!(String::from_utf8_lossy(&out.stderr).contains("lyapunov.csv"));
    let gp = std::fs::read_to_string(d.path().join("variance.gp")).unwrap();
    assert!(gp.contains("variance.csv"));
}
