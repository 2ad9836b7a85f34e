//! Subcommand bodies, shared between the binary and tests. Each takes a
//! resolved scenario so callers can also drive them programmatically.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mlrem::datagen::sample_dataset;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::runner::execute_all;
use crate::scenario::{apply_sweep_value, ResolvedScenario};
use crate::summary::{
    build_sweep_summary, summarize, sweep_point, Summary, SweepSummary,
};

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Samples one dataset (seed = base_seed, i.e. trial 0's data) and
/// writes `<out>/<id>.dataset.json`, optionally with a CSV copy.
pub fn cmd_gen(
    rs: &ResolvedScenario,
    out_dir: &Path,
    also_csv: bool,
    log: &mut impl Write,
) -> Result<PathBuf> {
    let data = sample_dataset(&rs.truth, rs.n, rs.base_seed)
        .map_err(|e| CliError::Numerical(format!("datagen: {e}")))?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let json_path = out_dir.join(format!("{}.dataset.json", rs.id));
    let mut w = create(&json_path)?;
    data.to_json_writer(&mut w)
        .map_err(|e| CliError::Io(format!("{}: {e}", json_path.display())))?;
    w.flush()?;
    if also_csv {
        let csv_path = out_dir.join(format!("{}.dataset.csv", rs.id));
        let mut w = create(&csv_path)?;
        data.write_csv(&mut w)
            .map_err(|e| CliError::Io(format!("{}: {e}", csv_path.display())))?;
        w.flush()?;
    }
    writeln!(
        log,
        "n={} d={} k={} seed={}",
        rs.n,
        rs.truth.dim(),
        rs.truth.k(),
        rs.base_seed
    )?;
    Ok(json_path)
}

/// Runs every trial, writes `<out>/<id>/trial_NNN.csv` per trial plus
/// `summary.json`, and returns the summary.
pub fn cmd_run(rs: &ResolvedScenario, out_dir: &Path, jobs: usize) -> Result<Summary> {
    let outcomes = execute_all(rs, jobs)?;
    let dir = out_dir.join(&rs.id);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    for o in &outcomes {
        let path = dir.join(format!("trial_{:03}.csv", o.trial));
        let mut w = create(&path)?;
        o.trace
            .write_csv(Some(&rs.truth), Some(rs.estimator.as_str()), &mut w)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        w.flush()?;
    }
    let summary = summarize(rs, &outcomes)?;
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Reruns the scenario once per sweep value with shared trial seeds;
/// writes `<out>/<id>_sweep/sweep.csv` (long format) and `summary.json`.
/// Per-trial traces are not written; the sweep CSV is the record.
pub fn cmd_sweep(rs: &ResolvedScenario, out_dir: &Path, jobs: usize) -> Result<SweepSummary> {
    let sweep = rs
        .sweep
        .clone()
        .ok_or_else(|| CliError::config("sweep: scenario has no sweep section"))?;
    let dir = out_dir.join(format!("{}_sweep", rs.id));
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let csv_path = dir.join("sweep.csv");
    let mut csv = create(&csv_path)?;
    writeln!(csv, "value,trial,final_matched_error,iterations,degenerate_count")?;
    let mut points = Vec::with_capacity(sweep.values.len());
    for &value in &sweep.values {
        let rs_v = apply_sweep_value(rs, sweep.axis, value)?;
        let outcomes = execute_all(&rs_v, jobs)?;
        for o in &outcomes {
            writeln!(
                csv,
                "{value},{},{},{},{}",
                o.trial,
                o.final_matched.max_beta_err,
                o.trace.iterations_used(),
                o.degenerate_count
            )?;
        }
        points.push(sweep_point(value, &outcomes));
    }
    csv.flush()?;
    let summary = build_sweep_summary(rs, sweep.axis, points);
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}
