//! End-to-end behavior of the binary: exit codes, file layout,
//! determinism of artifacts, and report rendering.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mlrem::datagen::{sample_dataset, Dataset};
use mlrem::model::MixtureParams;
use mlrem_cli::summary::{Summary, SweepSummary};

fn mlrem_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mlrem"))
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn small_scenario(id: &str, estimator: &str, extra: &str) -> String {
    format!(
        r#"{{
          "id": "{id}",
          "truth": {{"k": 2, "d": 2, "betas": {{"orthogonal-scaled": 6.0}}, "weights": "balanced", "sigma": 0.1}},
          "init": {{"kind": "perturbed-oracle", "beta_radius": 0.5}},
          "estimator": "{estimator}",
          "n": 400,
          "T": 2,
          "trials": 3,
          "base_seed": 21{extra}
        }}"#
    )
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn gen_writes_a_roundtrippable_dataset_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        "s.json",
        r#"{
          "id": "single",
          "truth": {"betas": [[2.0, -1.0]], "weights": [1.0], "sigma": 0.3},
          "init": {"kind": "perturbed-oracle"},
          "estimator": "em-pooled",
          "n": 50,
          "trials": 1,
          "base_seed": 5
        }"#,
    );
    let out = run_ok(
        mlrem_bin()
            .arg("gen")
            .arg(&scenario)
            .arg("--out")
            .arg(dir.path()),
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.trim(), "n=50 d=2 k=1 seed=5");
    let file = dir.path().join("single.dataset.json");
    let parsed = Dataset::<f64>::from_json_reader(fs::File::open(&file).unwrap()).unwrap();
    let truth = MixtureParams::new(vec![vec![2.0, -1.0]], vec![1.0], 0.3).unwrap();
    let direct = sample_dataset(&truth, 50, 5).unwrap();
    assert_eq!(parsed, direct);
    let first_bytes = fs::read(&file).unwrap();
    run_ok(
        mlrem_bin()
            .arg("gen")
            .arg(&scenario)
            .arg("--out")
            .arg(dir.path()),
    );
    assert_eq!(fs::read(&file).unwrap(), first_bytes);
}

#[test]
fn gen_csv_flag_adds_a_csv_copy() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.json", &small_scenario("csvcase", "em-split", ""));
    run_ok(
        mlrem_bin()
            .arg("gen")
            .arg(&scenario)
            .arg("--csv")
            .arg("--out")
            .arg(dir.path()),
    );
    let csv = fs::read_to_string(dir.path().join("csvcase.dataset.csv")).unwrap();
    let parsed = Dataset::<f64>::read_csv(csv.as_bytes()).unwrap();
    assert_eq!(parsed.len(), 400);
    assert!(csv.starts_with("x0,x1,y,label\n"));
}

#[test]
fn malformed_weights_exit_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        "bad.json",
        r#"{
          "id": "bad",
          "truth": {"betas": [[1.0], [2.0]], "weights": [0.9, 0.3], "sigma": 0.1},
          "init": {"kind": "perturbed-oracle"},
          "estimator": "em-pooled",
          "n": 100,
          "trials": 1,
          "base_seed": 1
        }"#,
    );
    let out = mlrem_bin()
        .arg("gen")
        .arg(&scenario)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("weights"), "stderr: {stderr}");
}

#[test]
fn missing_scenario_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = mlrem_bin()
        .arg("run")
        .arg(dir.path().join("absent.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn run_writes_per_trial_traces_and_a_parsable_summary() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.json", &small_scenario("demo", "em-split", ""));
    run_ok(
        mlrem_bin()
            .arg("run")
            .arg(&scenario)
            .arg("--jobs")
            .arg("1")
            .arg("--out")
            .arg(dir.path()),
    );
    let run_dir = dir.path().join("demo");
    for t in 0..3 {
        let csv = fs::read_to_string(run_dir.join(format!("trial_{t:03}.csv"))).unwrap();
        assert!(csv.starts_with(
            "iter,component,beta_0,beta_1,pi,matched_error,degenerate_flag,estimator\n"
        ));
        assert!(csv.contains(",em-split"));
        assert!(!csv.contains('\r'));
    }
    let summary: Summary =
        serde_json::from_str(&fs::read_to_string(run_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.scenario.id, "demo");
    assert_eq!(summary.tool_version, format!("mlrem-cli {}", env!("CARGO_PKG_VERSION")));
    assert_eq!(summary.final_matched_error.per_trial.len(), 3);
    assert!(summary.event_stats.is_some());
    assert!(!summary.per_iteration_dm.is_empty());
}

#[test]
fn zero_iteration_run_reports_the_init_state_only() {
    let dir = tempfile::tempdir().unwrap();
    let body = small_scenario("frozen", "em-pooled", r#", "em": {"max_iters": 0}"#)
        .replace("\"trials\": 3", "\"trials\": 1");
    let scenario = write_scenario(dir.path(), "s.json", &body);
    run_ok(
        mlrem_bin()
            .arg("run")
            .arg(&scenario)
            .arg("--jobs")
            .arg("1")
            .arg("--out")
            .arg(dir.path()),
    );
    let summary: Summary = serde_json::from_str(
        &fs::read_to_string(dir.path().join("frozen").join("summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary.per_iteration_dm.len(), 1);
    assert_eq!(summary.per_iteration_dm[0].iter, 0);
    assert_eq!(summary.iterations_used.max, 0);
    assert_eq!(summary.converged_count, 0);
    // Init radius 0.5 with a frozen run: D_m is exactly the init error.
    assert!((summary.per_iteration_dm[0].median - 0.5).abs() < 1e-9);
}

#[test]
fn am_and_em_summaries_differ_only_in_estimator_and_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let em = write_scenario(dir.path(), "em.json", &small_scenario("pairx", "em-pooled", ""));
    let am = write_scenario(dir.path(), "am.json", &small_scenario("pairx", "am", ""));
    let out_em = dir.path().join("a");
    let out_am = dir.path().join("b");
    run_ok(mlrem_bin().arg("run").arg(&em).arg("--jobs").arg("1").arg("--out").arg(&out_em));
    run_ok(mlrem_bin().arg("run").arg(&am).arg("--jobs").arg("1").arg("--out").arg(&out_am));
    let se: Summary = serde_json::from_str(
        &fs::read_to_string(out_em.join("pairx").join("summary.json")).unwrap(),
    )
    .unwrap();
    let sa: Summary = serde_json::from_str(
        &fs::read_to_string(out_am.join("pairx").join("summary.json")).unwrap(),
    )
    .unwrap();
    assert_ne!(se.scenario.estimator, sa.scenario.estimator);
    let mut em_scenario = se.scenario.clone();
    em_scenario.estimator = sa.scenario.estimator;
    assert_eq!(em_scenario, sa.scenario);
    // Same seeds, same init: identical condition reports and events.
    assert_eq!(se.condition_report, sa.condition_report);
    assert_eq!(se.event_stats, sa.event_stats);
}

#[test]
fn sweep_writes_long_format_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let body = small_scenario(
        "swp",
        "em-split",
        r#", "sweep": {"axis": "init_radius", "values": [0.25, 0.5]}"#,
    )
    .replace("\"trials\": 3", "\"trials\": 2");
    let scenario = write_scenario(dir.path(), "s.json", &body);
    run_ok(
        mlrem_bin()
            .arg("sweep")
            .arg(&scenario)
            .arg("--jobs")
            .arg("1")
            .arg("--out")
            .arg(dir.path()),
    );
    let sweep_dir = dir.path().join("swp_sweep");
    let csv = fs::read_to_string(sweep_dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "value,trial,final_matched_error,iterations,degenerate_count");
    assert_eq!(lines.len(), 1 + 2 * 2);
    assert!(lines[1].starts_with("0.25,0,"));
    assert!(lines[3].starts_with("0.5,0,"));
    let summary: SweepSummary =
        serde_json::from_str(&fs::read_to_string(sweep_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary.values, vec![0.25, 0.5]);
    assert_eq!(summary.per_value.len(), 2);
    assert!(summary.median_ratio_max_min.is_finite());
    // No per-trial trace files in sweep mode.
    assert!(!sweep_dir.join("trial_000.csv").exists());
}

#[test]
fn sweep_without_sweep_section_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.json", &small_scenario("nosweep", "em-split", ""));
    let out = mlrem_bin()
        .arg("sweep")
        .arg(&scenario)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_sorts_dedupes_and_warns() {
    let dir = tempfile::tempdir().unwrap();
    let mk = |id: &str, est: &str, file: &str| {
        let s = write_scenario(dir.path(), file, &small_scenario(id, est, ""));
        run_ok(
            mlrem_bin()
                .arg("run")
                .arg(&s)
                .arg("--jobs")
                .arg("1")
                .arg("--out")
                .arg(dir.path().join(format!("{id}-{est}"))),
        );
        dir.path()
            .join(format!("{id}-{est}"))
            .join(id)
            .join("summary.json")
    };
    let am_b = mk("bravo", "am", "s1.json");
    let em_b = mk("bravo", "em-pooled", "s2.json");
    let em_a = mk("alpha", "em-split", "s3.json");
    let out = run_ok(
        mlrem_bin()
            .arg("report")
            .arg(&am_b)
            .arg(&em_b)
            .arg(&em_a)
            .arg(&am_b),
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "| scenario | estimator | median_final_dm | iterations | conditions |");
    assert_eq!(lines.len(), 2 + 3, "table: {stdout}");
    assert!(lines[2].starts_with("| alpha | em-split |"));
    assert!(lines[3].starts_with("| bravo | em-pooled |"));
    assert!(lines[4].starts_with("| bravo | am |"));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(
        stderr.contains("duplicate summary for scenario 'bravo' (am)"),
        "stderr: {stderr}"
    );
}

#[test]
fn report_rejects_files_that_are_not_run_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let not_summary = dir.path().join("x.json");
    fs::write(&not_summary, r#"{"hello": 1}"#).unwrap();
    let out = mlrem_bin().arg("report").arg(&not_summary).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
