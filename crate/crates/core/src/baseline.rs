//! Alternating minimization baseline: hard assignment of each sample to
//! the component with the smallest absolute residual, followed by
//! per-component least squares. This is the σ → 0 limit of the E-step,
//! minus the mixing-weight gating, so it serves as the comparison point
//! for soft EM at positive noise.

use std::time::Instant;

use crate::datagen::Dataset;
use crate::em_core::{
    floored_weights, max_component_movement, EMConfig, EMState, RunTrace, WeightMode,
    MAX_CONDITION,
};
use crate::error::{Error, Result};
use crate::linalg::{dot, ols_on_rows};
use crate::scalar::Scalar;

/// Runs alternating minimization from `init` on the full dataset every
/// iteration, reusing the EM configuration for ridge, iteration cap, tol
/// and weight handling. σ in the config is ignored; assignments compare
/// raw residuals. Components that receive no samples, or whose Gram
/// matrix is effectively singular, keep their previous β and are flagged
/// degenerate for that iteration.
pub fn run_alternating_minimization<F: Scalar>(
    init: &EMState<F>,
    data: &Dataset<F>,
    config: &EMConfig<F>,
) -> Result<RunTrace<F>> {
    config.validate(init.k())?;
    if data.dim() != init.dim() {
        return Err(Error::DimensionMismatch {
            context: "dataset dimension vs state dimension",
            expected: init.dim(),
            got: data.dim(),
        });
    }
    let k = init.k();
    let n = data.len();
    let ridge = config.effective_ridge(n);
    let max_cond = F::real(MAX_CONDITION);
    let mut states = vec![init.clone()];
    let mut batch_sizes = Vec::new();
    let mut degenerate = Vec::new();
    let mut timings = Vec::new();
    let mut converged = false;
    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); k];
    for _ in 0..config.max_iters {
        let start = Instant::now();
        let prev = states.last().unwrap().clone();
        for rows in assigned.iter_mut() {
            rows.clear();
        }
        for i in 0..n {
            let x = data.row(i);
            let y = data.response()[i];
            let mut best = 0usize;
            let mut best_res = (y - dot(x, prev.beta(0))).abs();
            for j in 1..k {
                let res = (y - dot(x, prev.beta(j))).abs();
                if res < best_res {
                    best_res = res;
                    best = j;
                }
            }
            assigned[best].push(i);
        }
        let mut betas: Vec<Vec<F>> = Vec::with_capacity(k);
        let mut flags = vec![false; k];
        for j in 0..k {
            if assigned[j].is_empty() {
                flags[j] = true;
                betas.push(prev.beta(j).to_vec());
                continue;
            }
            match ols_on_rows(data.design(), data.dim(), data.response(), &assigned[j], ridge) {
                Some(sol) if sol.condition <= max_cond => betas.push(sol.solution),
                _ => {
                    flags[j] = true;
                    betas.push(prev.beta(j).to_vec());
                }
            }
        }
        let weights = match config.weight_mode {
            WeightMode::FixedAtTruth => prev.weights().to_vec(),
            WeightMode::Estimated => {
                let mass: Vec<F> = assigned
                    .iter()
                    .map(|rows| F::from_usize(rows.len()).unwrap())
                    .collect();
                floored_weights(&mass, n, config.min_weight_floor)
            }
        };
        let next = EMState::new(betas, weights)?;
        let movement = max_component_movement(&prev, &next);
        timings.push(start.elapsed());
        batch_sizes.push(n);
        degenerate.push(flags);
        states.push(next);
        if movement <= config.tol {
            converged = true;
            break;
        }
    }
    Ok(RunTrace::from_parts(
        states,
        batch_sizes,
        degenerate,
        timings,
        converged,
    ))
}
