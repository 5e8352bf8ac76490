//! Black-box tests of the `pcdc` binary: exit codes, output formats, and
//! the pinned command-line examples.

use std::path::Path;
use std::process::{Command, Output};

use pcdc::io::sweep_to_csv;
use pcdc::loads::tradeoff_sweep;

fn pcdc_cmd(args: &[&str], envs: &[(&str, &str)], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcdc"))
        .args(args)
        .envs(envs.iter().copied())
        .env_remove("PCDC_SEED")
        .envs(envs.iter().copied())
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    pcdc_cmd(args, &[], dir)
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is UTF-8")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

#[test]
fn build_matches_the_shipped_grids_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["pda", "build", "--construction", "c1", "--K", "3", "--Q", "3", "--r1", "2", "-o", "a.pda"],
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let first = std::fs::read_to_string(dir.path().join("a.pda")).unwrap();
    assert_eq!(first, include_str!("../../pcdc/tests/fixtures/construction1_3_3_2.pda"));

    // Same command again: byte-identical, and no temp files left behind.
    let out = run_in(
        dir.path(),
        &["pda", "build", "--construction", "c1", "--K", "3", "--Q", "3", "--r1", "2", "-o", "a.pda"],
    );
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read_to_string(dir.path().join("a.pda")).unwrap(), first);
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, vec!["a.pda".to_string()]);

    // The subset-size spelling of the knob drives the plain builder.
    let out = run_in(dir.path(), &["pda", "build", "--construction", "algo2", "--K", "5", "--t", "3"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), include_str!("../../pcdc/tests/fixtures/regular_5_3.pda"));
}

#[test]
fn validate_prints_parameters_or_violations() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.pda");
    std::fs::write(&good, include_str!("../../pcdc/tests/fixtures/golden_5_4_2_4.pda")).unwrap();
    let out = run_in(dir.path(), &["pda", "validate", good.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "(5,4,2,4)\n");

    // A directive is cross-checked against the grid.
    let extended = dir.path().join("ext.pda");
    std::fs::write(&extended, include_str!("../../pcdc/tests/fixtures/construction2_3_3_2_2.pda"))
        .unwrap();
    let out = run_in(dir.path(), &["pda", "validate", extended.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "(9,9,8,1)\nblocks 3 3 3 3: consistent\n");

    let bad = dir.path().join("bad.pda");
    std::fs::write(&bad, "1 2\n1 2\n").unwrap();
    let out = run_in(dir.path(), &["pda", "validate", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("invalid: A3"), "got: {}", stdout(&out));
}

#[test]
fn sim_run_reproduces_the_worked_replay() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["pda", "build", "--construction", "c2", "--K", "3", "--Q", "3", "--r1", "2", "--r2", "2", "-o", "p3.pda"],
    );
    assert_eq!(code(&out), 0);
    std::fs::write(dir.path().join("y.txt"), "2 1 3\n1 3 2\n1 3 2\n").unwrap();

    let out = run_in(
        dir.path(),
        &[
            "sim", "run", "--pda", "p3.pda", "--demands", "1,2,3", "--inject-a", "2,3,2",
            "--inject-y", "y.txt", "-o", "report.json",
        ],
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["params"], "(9,9,8,1)");
    assert_eq!(report["decode_success"], serde_json::json!([true, true, true]));
    assert_eq!(report["loads"]["measured_l"]["exact"], "1/18");
    assert_eq!(report["loads"]["measured_r"]["exact"], "8/3");
    assert_eq!(report["loads"]["matches"], true);
    assert_eq!(report["queries"], serde_json::json!([[2, 1, 3], [1, 3, 2], [1, 3, 2]]));

    // Identical inputs give a byte-identical report.
    let out = run_in(
        dir.path(),
        &[
            "sim", "run", "--pda", "p3.pda", "--demands", "1,2,3", "--inject-a", "2,3,2",
            "--inject-y", "y.txt", "-o", "again.json",
        ],
    );
    assert_eq!(code(&out), 0);
    assert_eq!(
        std::fs::read(dir.path().join("report.json")).unwrap(),
        std::fs::read(dir.path().join("again.json")).unwrap()
    );
}

#[test]
fn sim_run_needs_a_block_directive() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["pda", "build", "--construction", "algo2", "--K", "3", "--t", "1", "-o", "flat.pda"]);
    assert_eq!(code(&out), 0);
    let out = run_in(dir.path(), &["sim", "run", "--pda", "flat.pda", "--demands", "1,1,1"]);
    assert_eq!(code(&out), 1);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("# blocks"),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn sweep_emits_the_library_csv_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["sweep", "--K", "3", "--Q", "3", "-o", "sweep.csv"]);
    assert_eq!(code(&out), 0);
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv, sweep_to_csv(&tradeoff_sweep(3, 3).unwrap()));
    assert!(csv.contains("theorem2,2,,2,1,1,2,3"), "csv: {csv}");
    assert!(csv.contains("theorem3,2,2,8,3,1,18,9"), "csv: {csv}");
}

#[test]
fn audits_report_and_respect_the_seed_sources() {
    let dir = tempfile::tempdir().unwrap();
    let out = pcdc_cmd(
        &["audit", "uniformity", "--K", "3", "--Q", "3", "--r1", "2", "--trials", "6000", "-o", "u.json"],
        &[("PCDC_SEED", "99")],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("u.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 99);
    assert_eq!(report["audit"]["passed"], true);
    assert_eq!(report["audit"]["uniformity"]["per_node"].as_array().unwrap().len(), 2);

    // An explicit flag beats the environment override.
    let out = pcdc_cmd(
        &["audit", "independence", "--K", "3", "--Q", "3", "--trials", "4000", "--seed", "7", "-o", "i.json"],
        &[("PCDC_SEED", "99")],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("i.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 7);
    assert_eq!(report["audit"]["independence"]["scenarios"].as_array().unwrap().len(), 3);
    assert_eq!(report["audit"]["passed"], true);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &[] as &[&str],
        &["bogus"],
        &["pda", "build", "--construction", "c2", "--K", "3", "--Q", "3", "--r1", "1"],
        &["pda", "build", "--construction", "c1", "--K", "3", "--r1", "1"],
        &["pda", "build", "--construction", "algo2", "--K", "3", "--t", "1", "--Q", "4"],
        &["sim", "run", "--pda", "x.pda"],
    ] {
        let out = run_in(dir.path(), args);
        assert_eq!(code(&out), 2, "args {args:?} gave {}", code(&out));
    }
}

#[test]
fn domain_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // Two-factor construction requires Q >= K.
    let out = run_in(
        dir.path(),
        &["pda", "build", "--construction", "c2", "--K", "4", "--Q", "3", "--r1", "1", "--r2", "1"],
    );
    assert_eq!(code(&out), 1);
    // Failed audit thresholds exit 1: an absurdly tight information bound
    // cannot be met at this trial count.
    let out = run_in(
        dir.path(),
        &["audit", "uniformity", "--K", "3", "--Q", "3", "--trials", "10"],
    );
    assert_eq!(code(&out), 1, "too few trials must be rejected");
}
