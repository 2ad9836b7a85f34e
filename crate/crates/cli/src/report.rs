//! Markdown comparison table over run summaries.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;

use crate::error::{CliError, Result};
use crate::summary::Summary;

struct Row {
    id: String,
    estimator_label: &'static str,
    rank: u8,
    median_dm: f64,
    iterations: f64,
    satisfied: bool,
}

/// Renders one row per distinct (scenario id, estimator) pair, sorted by
/// id and then EM before AM; later duplicates are dropped with a warning
/// on `warn`.
pub fn render_report(
    paths: &[PathBuf],
    out: &mut impl Write,
    warn: &mut impl Write,
) -> Result<()> {
    let mut rows: Vec<Row> = Vec::new();
    for path in paths {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        let summary: Summary = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| CliError::config(format!("{}: not a run summary: {e}", path.display())))?;
        let id = summary.scenario.id.clone();
        let estimator = summary.scenario.estimator;
        if rows
            .iter()
            .any(|r| r.id == id && r.estimator_label == estimator.as_str())
        {
            writeln!(
                warn,
                "warning: duplicate summary for scenario '{id}' ({}); ignoring {}",
                estimator.as_str(),
                path.display()
            )?;
            continue;
        }
        rows.push(Row {
            id,
            estimator_label: estimator.as_str(),
            rank: estimator.rank(),
            median_dm: summary.final_matched_error.median,
            iterations: summary.iterations_used.median,
            satisfied: summary.condition_report.satisfied,
        });
    }
    rows.sort_by(|a, b| a.id.cmp(&b.id).then(a.rank.cmp(&b.rank)));
    writeln!(out, "| scenario | estimator | median_final_dm | iterations | conditions |")?;
    writeln!(out, "|---|---|---|---|---|")?;
    for r in rows {
        writeln!(
            out,
            "| {} | {} | {:.6e} | {} | {} |",
            r.id,
            r.estimator_label,
            r.median_dm,
            r.iterations,
            if r.satisfied { "satisfied" } else { "violated" }
        )?;
    }
    Ok(())
}
