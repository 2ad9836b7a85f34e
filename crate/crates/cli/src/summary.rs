//! Summary documents written next to the raw trace CSVs. Field order is
//! fixed by the struct definitions, so equal runs serialize to equal
//! bytes.

use mlrem::metrics::{default_tau, event_diagnostics};
use mlrem::model::{check_local_conditions, ConditionConstants};
use mlrem::{ConditionReport64, EventStats64};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::runner::TrialOutcome;
use crate::scenario::{ResolvedScenario, SweepAxis};
use crate::stats::{log_log_slope, median, quantile};

/// Monte Carlo sample count for the embedded event diagnostics.
const EVENT_N_MC: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuartileSummary {
    pub per_trial: Vec<f64>,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

impl QuartileSummary {
    pub fn of(per_trial: Vec<f64>) -> Self {
        let q25 = quantile(&per_trial, 0.25);
        let med = median(&per_trial);
        let q75 = quantile(&per_trial, 0.75);
        QuartileSummary {
            per_trial,
            q25,
            median: med,
            q75,
        }
    }
}

/// Distribution of D_m across trials at one iteration; `trials` counts
/// how many runs were still active (shorter traces mean earlier
/// convergence).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmRow {
    pub iter: usize,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationsSummary {
    pub min: usize,
    pub median: f64,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub tool_version: String,
    pub scenario: ResolvedScenario,
    pub condition_report: ConditionReport64,
    /// Present when σ > 0; the events are undefined without noise.
    pub event_stats: Option<EventStats64>,
    pub per_iteration_dm: Vec<DmRow>,
    pub final_matched_error: QuartileSummary,
    pub final_rel_weight_error: QuartileSummary,
    pub iterations_used: IterationsSummary,
    pub converged_count: usize,
    pub degenerate_count: usize,
}

pub fn tool_version() -> String {
    format!("mlrem-cli {}", env!("CARGO_PKG_VERSION"))
}

/// Aggregates trial outcomes into the run summary. The condition report
/// and event diagnostics describe trial 0's initialization against the
/// truth; events reuse `base_seed` for their sample streams.
pub fn summarize(rs: &ResolvedScenario, outcomes: &[TrialOutcome]) -> Result<Summary> {
    assert!(!outcomes.is_empty(), "summarize: no outcomes");
    let init0 = &outcomes[0].trace.states()[0];
    let condition_report =
        check_local_conditions(&rs.truth, init0, &ConditionConstants::default())
            .map_err(|e| CliError::Numerical(format!("condition report: {e}")))?;
    let event_stats = if rs.truth.noise_sigma() > 0.0 {
        let tau = default_tau(&rs.truth)
            .map_err(|e| CliError::Numerical(format!("event tau: {e}")))?;
        Some(
            event_diagnostics(&rs.truth, init0, &tau, EVENT_N_MC, rs.base_seed)
                .map_err(|e| CliError::Numerical(format!("event diagnostics: {e}")))?,
        )
    } else {
        None
    };
    let max_len = outcomes.iter().map(|o| o.dm.len()).max().unwrap();
    let mut per_iteration_dm = Vec::with_capacity(max_len);
    for iter in 0..max_len {
        let at_iter: Vec<f64> = outcomes
            .iter()
            .filter_map(|o| o.dm.get(iter).copied())
            .collect();
        per_iteration_dm.push(DmRow {
            iter,
            q25: quantile(&at_iter, 0.25),
            median: median(&at_iter),
            q75: quantile(&at_iter, 0.75),
            trials: at_iter.len(),
        });
    }
    let iters: Vec<usize> = outcomes
        .iter()
        .map(|o| o.trace.iterations_used())
        .collect();
    let iters_f: Vec<f64> = iters.iter().map(|&v| v as f64).collect();
    Ok(Summary {
        tool_version: tool_version(),
        scenario: rs.clone(),
        condition_report,
        event_stats,
        per_iteration_dm,
        final_matched_error: QuartileSummary::of(
            outcomes.iter().map(|o| o.final_matched.max_beta_err).collect(),
        ),
        final_rel_weight_error: QuartileSummary::of(
            outcomes
                .iter()
                .map(|o| o.final_matched.max_rel_weight_err)
                .collect(),
        ),
        iterations_used: IterationsSummary {
            min: *iters.iter().min().unwrap(),
            median: median(&iters_f),
            max: *iters.iter().max().unwrap(),
        },
        converged_count: outcomes.iter().filter(|o| o.trace.converged()).count(),
        degenerate_count: outcomes.iter().map(|o| o.degenerate_count).sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub final_matched_error: QuartileSummary,
    pub converged_count: usize,
    pub degenerate_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub tool_version: String,
    /// The base scenario; each point reruns it with the axis value
    /// substituted.
    pub scenario: ResolvedScenario,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub per_value: Vec<SweepPoint>,
    /// Fitted slope of ln(median final error) vs ln(axis value); NaN
    /// when a median is zero (exact recovery) or otherwise unfittable.
    #[serde(with = "mlrem::real_json")]
    pub log_log_slope: f64,
    #[serde(with = "mlrem::real_json")]
    pub median_ratio_max_min: f64,
}

pub fn sweep_point(value: f64, outcomes: &[TrialOutcome]) -> SweepPoint {
    SweepPoint {
        value,
        final_matched_error: QuartileSummary::of(
            outcomes.iter().map(|o| o.final_matched.max_beta_err).collect(),
        ),
        converged_count: outcomes.iter().filter(|o| o.trace.converged()).count(),
        degenerate_count: outcomes.iter().map(|o| o.degenerate_count).sum(),
    }
}

pub fn build_sweep_summary(
    base: &ResolvedScenario,
    axis: SweepAxis,
    per_value: Vec<SweepPoint>,
) -> SweepSummary {
    let values: Vec<f64> = per_value.iter().map(|p| p.value).collect();
    let medians: Vec<f64> = per_value
        .iter()
        .map(|p| p.final_matched_error.median)
        .collect();
    let slope = log_log_slope(&values, &medians);
    let mx = medians.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mn = medians.iter().cloned().fold(f64::INFINITY, f64::min);
    SweepSummary {
        tool_version: tool_version(),
        scenario: base.clone(),
        axis,
        values,
        per_value,
        log_log_slope: slope,
        median_ratio_max_min: mx / mn,
    }
}
