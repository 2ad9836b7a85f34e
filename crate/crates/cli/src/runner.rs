//! Trial execution: one fully seeded replication per trial index, run
//! sequentially or on a rayon pool. Aggregation order never depends on
//! completion order.

use mlrem::baseline::run_alternating_minimization;
use mlrem::datagen::{derive_stream_seed, sample_dataset};
use mlrem::em_core::{run_pooled_em, run_sample_splitting_em, EMState};
use mlrem::init::{perturbed_init, random_init, InitKind};
use mlrem::metrics::{contraction_trace, matched_error};
use mlrem::{MatchedError64, RunTrace64};
use rayon::prelude::*;

use crate::error::{CliError, Result};
use crate::scenario::{Estimator, ResolvedScenario};

pub struct TrialOutcome {
    pub trial: usize,
    pub trace: RunTrace64,
    /// Frozen-permutation D_m per recorded state.
    pub dm: Vec<f64>,
    /// Fresh matching of the final state.
    pub final_matched: MatchedError64,
    pub degenerate_count: usize,
}

pub fn execute_trial(rs: &ResolvedScenario, trial: usize) -> Result<TrialOutcome> {
    let data_seed = rs.base_seed.wrapping_add(trial as u64);
    let data = sample_dataset(&rs.truth, rs.n, data_seed)
        .map_err(|e| CliError::Numerical(format!("trial {trial}: datagen: {e}")))?;
    let trial_seed = derive_stream_seed(rs.init.seed, trial as u64);
    let init: EMState<f64> = match rs.init.kind {
        InitKind::PerturbedOracle => {
            let mut spec = rs.init;
            spec.seed = trial_seed;
            perturbed_init(&rs.truth, &spec)
                .map_err(|e| CliError::Numerical(format!("trial {trial}: init: {e}")))?
        }
        InitKind::Random => random_init(&data, rs.truth.k(), rs.em.sigma, trial_seed)
            .map_err(|e| CliError::Numerical(format!("trial {trial}: init: {e}")))?,
    };
    let trace = match rs.estimator {
        Estimator::EmSplit => run_sample_splitting_em(&init, &data, rs.t, &rs.em),
        Estimator::EmPooled => run_pooled_em(&init, &data, &rs.em),
        Estimator::Am => run_alternating_minimization(&init, &data, &rs.em),
    }
    .map_err(|e| CliError::Numerical(format!("trial {trial}: estimator: {e}")))?;
    let dm: Vec<f64> = contraction_trace(&trace, &rs.truth)
        .map_err(|e| CliError::Numerical(format!("trial {trial}: contraction: {e}")))?
        .iter()
        .map(|p| p.d_m)
        .collect();
    let final_matched = matched_error(trace.final_state(), &rs.truth)
        .map_err(|e| CliError::Numerical(format!("trial {trial}: matching: {e}")))?;
    let degenerate_count = trace.degenerate_count();
    Ok(TrialOutcome {
        trial,
        trace,
        dm,
        final_matched,
        degenerate_count,
    })
}

/// Runs all trials of the scenario. `jobs` = 0 uses every core, 1 stays
/// on the calling thread, anything else uses a dedicated pool of that
/// size. Results come back sorted by trial index in every mode.
pub fn execute_all(rs: &ResolvedScenario, jobs: usize) -> Result<Vec<TrialOutcome>> {
    let mut outcomes = match jobs {
        1 => (0..rs.trials)
            .map(|t| execute_trial(rs, t))
            .collect::<Result<Vec<_>>>()?,
        0 => (0..rs.trials)
            .into_par_iter()
            .map(|t| execute_trial(rs, t))
            .collect::<Result<Vec<_>>>()?,
        workers => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| CliError::Numerical(format!("thread pool: {e}")))?;
            pool.install(|| {
                (0..rs.trials)
                    .into_par_iter()
                    .map(|t| execute_trial(rs, t))
                    .collect::<Result<Vec<_>>>()
            })?
        }
    };
    outcomes.sort_by_key(|o| o.trial);
    Ok(outcomes)
}
