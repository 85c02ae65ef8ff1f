//! End-to-end tests of the `cfidd` binary. The name sorts this target
//! ahead of `acceptance` so it also runs when a criterion fails.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cellfree_idd::cli::{parse_config, CSV_HEADER};

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn cfidd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfidd")).current_dir(dir).args(args).output().unwrap()
}

fn small() -> Vec<&'static str> {
    vec!["-q", "--l", "8", "--k", "2", "--realizations", "2", "--snr", "0,10"]
}

#[test]
fn writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = small();
    args.extend(["--detector", "sic,pic", "--out", "r.csv"]);
    let out = cfidd(dir.path(), &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["detect.detectors"], "sic,pic");
    assert_eq!(manifest["sources"]["channel.aps"], "flag");
    assert_eq!(manifest["cells"].as_array().unwrap().len(), 8);
}

#[test]
fn csv_goes_to_stdout_without_out() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = small();
    args.extend(["--detector", "mmse"]);
    let out = cfidd(dir.path(), &args);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with(CSV_HEADER));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn flag_overrides_file_and_manifest_records_both() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "sim.seed = 3\nchannel.aps = 8\nchannel.ues = 2\n").unwrap();
    let out = cfidd(
        dir.path(),
        &["-q", "--config", "run.cfg", "--seed", "4", "--realizations", "1", "--snr", "5", "--detector", "mmse", "--out", "o.csv"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["overrides"][0]["key"], "sim.seed");
    assert_eq!(manifest["overrides"][0]["file_value"], "3");
    assert_eq!(manifest["overrides"][0]["flag_value"], "4");
    assert_eq!(manifest["sources"]["channel.aps"], "file");
}

#[test]
fn printed_config_reparses_to_the_same_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = cfidd(dir.path(), &["--snr", "-5:2.5:5", "--order", "norm", "--set", "detect.threshold=inf", "--print-config"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = parse_config(&text).unwrap();
    assert_eq!(cfg.snr_db, vec![-5.0, -2.5, 0.0, 2.5, 5.0]);
    std::fs::write(dir.path().join("echo.cfg"), &text).unwrap();
    let again = cfidd(dir.path(), &["--config", "echo.cfg", "--print-config"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "channel.bogus = 1\nsim.realizations = -3\n").unwrap();
    let out = cfidd(dir.path(), &["--config", "bad.cfg", "--detector", "zf"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("channel.bogus") && err.contains("sim.realizations") && err.contains("zf"), "{err}");

    assert_eq!(cfidd(dir.path(), &["--config", "missing.cfg"]).status.code(), Some(2));
    assert_eq!(cfidd(dir.path(), &["--detector", "ml"]).status.code(), Some(2));
    assert_eq!(cfidd(dir.path(), &["--snr", "0:0:5"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = small();
    args.extend(["--detector", "mmse", "--out", "no/such/dir/out.csv"]);
    let out = cfidd(dir.path(), &args);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no/such/dir/out.csv"));
}

#[test]
fn progress_goes_to_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let out = cfidd(dir.path(), &["--l", "8", "--k", "2", "--realizations", "3", "--snr", "0", "--detector", "mmse"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("3/3 realizations"));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with(CSV_HEADER));
}

#[test]
fn shipped_configs_parse() {
    for entry in std::fs::read_dir(repo_root().join("configs")).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(parse_config(&text).is_ok(), "{}", path.display());
    }
}

/// Runs every `cfidd` command of the README at reduced scale.
#[test]
fn readme_examples_run() {
    let readme = std::fs::read_to_string(repo_root().join("README.md")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("configs")).unwrap();
    for entry in std::fs::read_dir(repo_root().join("configs")).unwrap() {
        let path = entry.unwrap().path();
        std::fs::copy(&path, dir.path().join("configs").join(path.file_name().unwrap())).unwrap();
    }
    let mut in_block = false;
    let mut ran = 0;
    for line in readme.lines() {
        if let Some(lang) = line.strip_prefix("```") {
            in_block = !in_block && lang == "sh";
            continue;
        }
        let Some(rest) = line.trim().strip_prefix("cfidd ") else { continue };
        if !in_block {
            continue;
        }
        let mut args: Vec<&str> = rest.split_whitespace().map(|a| a.trim_matches('"')).collect();
        let prints_only = args.contains(&"--print-config") || args.contains(&"--help") || args.contains(&"--version");
        if !prints_only {
            args.extend(["-q", "--realizations", "1", "--set", "sim.frames_per_realization=1"]);
        }
        let out = cfidd(dir.path(), &args);
        assert!(out.status.success(), "`{line}` failed: {}", String::from_utf8_lossy(&out.stderr));
        ran += 1;
    }
    assert!(ran >= 4, "only {ran} README examples found");
}
