//! End-to-end exercises of the command-line interface: output determinism,
//! exit codes and the complexity evaluator.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_psma-sim")
}

fn run(args: &[&str]) -> Output {
    Command::new(binary())
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_scenario(dir: &Path, name: &str, users: usize, codebooks: usize) -> PathBuf {
    let path = dir.join(name);
    let text = format!(
        r#"{{
  "num_bs": 2,
  "num_users": {users},
  "num_subcarriers": 4,
  "num_codebooks": {codebooks},
  "codebook_size": 2,
  "macro_radius": 600.0,
  "small_radius": 40.0,
  "path_loss_exponent": -2.0,
  "p_max": [10.0, 2.0],
  "noise_power": 1e-10,
  "l_t": 2,
  "k": 4,
  "scheme": "psma",
  "seed": 9
}}"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("psma-sim-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn simulate_prints_summary_and_succeeds() {
    let dir = temp_dir("simulate");
    let scenario = write_scenario(&dir, "s.json", 4, 3);
    let out = run(&[
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "--seed",
        "4",
        "--scheme",
        "pdnoma",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("scheme: pdnoma"));
    assert!(text.contains("sum_rate_nats:"));
    assert!(text.contains("converged: true"));
}

#[test]
fn sweep_outputs_are_byte_identical_across_runs() {
    let dir = temp_dir("sweep");
    let scenario = write_scenario(&dir, "s.json", 4, 3);
    let mut outputs = Vec::new();
    for tag in ["a", "b"] {
        let out_dir = dir.join(tag);
        let out = run(&[
            "sweep",
            "--scenario",
            scenario.to_str().unwrap(),
            "--axis",
            "users",
            "--values",
            "2,4",
            "--trials",
            "2",
            "--schemes",
            "psma,scma",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        outputs.push((
            std::fs::read(out_dir.join("rows.csv")).unwrap(),
            std::fs::read(out_dir.join("summary.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0].0, outputs[1].0, "rows.csv differs between runs");
    assert_eq!(
        outputs[0].1, outputs[1].1,
        "summary.csv differs between runs"
    );
    let rows = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert!(rows.starts_with(
        "scheme,sweep_axis,sweep_value,seed,sum_rate_nats,outer_iters,converged,budget_residual,sic_violations\n"
    ));
    // 2 schemes x 2 values x 2 trials = 8 rows + header.
    assert_eq!(rows.lines().count(), 9);
}

#[test]
fn compare_emits_paired_ratios() {
    let dir = temp_dir("compare");
    let scenario = write_scenario(&dir, "s.json", 4, 3);
    let out_dir = dir.join("cmp");
    let out = run(&[
        "compare",
        "--scenario",
        scenario.to_str().unwrap(),
        "--seeds",
        "1..3,7",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let per_seed = std::fs::read_to_string(out_dir.join("per_seed.csv")).unwrap();
    assert_eq!(per_seed.lines().count(), 5, "{per_seed}"); // header + seeds 1,2,3,7
    let totals = std::fs::read_to_string(out_dir.join("comparison.csv")).unwrap();
    assert!(totals.contains("ratio_psma_over_scma"));
    assert!(totals.contains("ratio_psma_over_pdnoma"));
}

#[test]
fn complexity_prints_reference_point() {
    let out = run(&[
        "complexity",
        "--it",
        "3",
        "--pi",
        "8",
        "--d",
        "3",
        "--g",
        "4",
        "--lt",
        "3",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("scma: 1536"));
    assert!(text.contains("psma: 18432"));
    assert!(text.contains("pdnoma: 252"));
}

#[test]
fn validation_errors_exit_with_code_1() {
    let dir = temp_dir("badcfg");
    let path = dir.join("bad.json");
    std::fs::write(&path, r#"{ "num_bs": 0 }"#).unwrap();
    let out = run(&["simulate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    // Invariant violation (codebook larger than the carrier count).
    let path = dir.join("bad2.json");
    std::fs::write(
        &path,
        r#"{
  "num_bs": 1, "num_users": 2, "num_subcarriers": 4, "num_codebooks": 1,
  "codebook_size": 9, "macro_radius": 100.0, "small_radius": 10.0,
  "path_loss_exponent": -2.0, "p_max": [1.0], "l_t": 1, "k": 1,
  "scheme": "psma", "seed": 1
}"#,
    )
    .unwrap();
    let out = run(&["simulate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("codebook_size"));
}

#[test]
fn io_errors_exit_with_code_2() {
    let out = run(&["simulate", "--scenario", "/nonexistent/psma.json"]);
    assert_eq!(out.status.code(), Some(2));
}
