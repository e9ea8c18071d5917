//! End-to-end checks of the command-line tool: reruns are byte-identical,
//! outputs are stamped, and error classes map to distinct exit codes.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cluster-ic"))
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn identical_runs_produce_identical_bytes() {
    let tmp = std::env::temp_dir().join("cluster-ic-cli-det");
    let (a, b) = (tmp.join("a"), tmp.join("b"));
    for dir in [&a, &b] {
        let status = bin()
            .args(["ic-1d", "--n-half", "3", "--channel", "z_dephase"])
            .args(["--p-a", "0.1", "--p-b", "0.1", "--seed", "9"])
            .arg("--out")
            .arg(dir)
            .status()
            .expect("binary runs");
        assert!(status.success());
    }
    assert_eq!(read(&a, "ic1d.csv"), read(&b, "ic1d.csv"));
    assert_eq!(read(&a, "summary.json"), read(&b, "summary.json"));
    // Stamp columns present on every row.
    let csv = read(&a, "ic1d.csv");
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().ends_with("version,seed,config_hash"));
    for line in lines {
        assert!(line.contains(",9,"), "row lacks the seed stamp: {line}");
    }
}

#[test]
fn config_file_drives_a_run_and_flags_override_it() {
    let tmp = std::env::temp_dir().join("cluster-ic-cli-cfg");
    std::fs::create_dir_all(&tmp).unwrap();
    let cfg = tmp.join("run.json");
    std::fs::write(
        &cfg,
        r#"{"experiment":"phase-diagram","p_grid":[0.0,0.2],"seed":5}"#,
    )
    .unwrap();
    let out = tmp.join("out");
    let status = bin()
        .arg("phase-diagram")
        .arg("--config")
        .arg(&cfg)
        .args(["--seed", "7"])
        .arg("--out")
        .arg(&out)
        .status()
        .expect("binary runs");
    assert!(status.success());
    let summary = read(&out, "summary.json");
    assert!(summary.contains("\"seed\": 7"), "flag did not override the file seed");
    // 2x2 grid of (p_a, p_b) rows plus the header.
    assert_eq!(read(&out, "phase_diagram.csv").lines().count(), 5);
}

#[test]
fn bad_configuration_exits_with_code_two() {
    let out = std::env::temp_dir().join("cluster-ic-cli-bad");
    // Missing required field.
    let status = bin().arg("ic-1d").arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(2));
    // Out-of-range grid.
    let status = bin()
        .args(["phase-diagram", "--p", "0.7"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    // Config kind that does not match the subcommand.
    let cfg = out.join("mismatch.json");
    std::fs::create_dir_all(&out).unwrap();
    std::fs::write(&cfg, r#"{"experiment":"selftest"}"#).unwrap();
    let status = bin()
        .args(["phase-diagram", "--p", "0.1"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn selftest_subcommand_reports_every_check() {
    let out = std::env::temp_dir().join("cluster-ic-cli-selftest");
    let output = bin().arg("selftest").arg("--out").arg(&out).output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    let passes = stdout.lines().filter(|l| l.starts_with("pass")).count();
    assert_eq!(passes, 9, "expected nine passing checks:\n{stdout}");
    assert!(read(&out, "selftest.csv").lines().count() >= 10);
}
