//! The E-step, the weighted-least-squares M-step, one full EM iteration,
//! and the two iteration schedules: sample-splitting (a fresh batch per
//! iteration) and pooled (every iteration sees all data).
//!
//! Responsibilities are computed in the log domain with max-subtraction, so
//! residual gaps up to 1e6·σ cannot overflow. σ = 0 takes the hard
//! assignment limit with lowest-index tie-break.

use std::io::Write;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::datagen::{split_batches, Dataset};
use crate::error::{Error, Result};
use crate::linalg::{dist, dot, mirror_upper_to_lower, solve_spd_with_ridge};
use crate::metrics::matched_error;
use crate::model::{validate_simplex, MixtureParams};
use crate::scalar::Scalar;

/// Components whose regularized weighted Gram matrix has a condition
/// estimate above this are frozen (degenerate) instead of solved.
pub(crate) const MAX_CONDITION: f64 = 1e14;

/// Current iterate: (β_j, π_j) for every component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EMState<F: Scalar> {
    betas: Vec<Vec<F>>,
    weights: Vec<F>,
}

impl<F: Scalar> EMState<F> {
    pub fn new(betas: Vec<Vec<F>>, weights: Vec<F>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::invalid("state: at least one component required"));
        }
        let d = betas[0].len();
        if d == 0 {
            return Err(Error::invalid("state: dimension must be ≥ 1"));
        }
        for b in &betas {
            if b.len() != d {
                return Err(Error::DimensionMismatch {
                    context: "state betas: rows must share one dimension",
                    expected: d,
                    got: b.len(),
                });
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("state betas: entries must be finite"));
            }
        }
        validate_simplex(&weights, betas.len(), F::real(1e-10), "state weights")?;
        Ok(EMState { betas, weights })
    }

    pub fn from_params(params: &MixtureParams<F>) -> Self {
        EMState {
            betas: params.betas().to_vec(),
            weights: params.weights().to_vec(),
        }
    }

    pub fn k(&self) -> usize {
        self.betas.len()
    }

    pub fn dim(&self) -> usize {
        self.betas[0].len()
    }

    pub fn betas(&self) -> &[Vec<F>] {
        &self.betas
    }

    pub fn beta(&self, j: usize) -> &[F] {
        &self.betas[j]
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn weight(&self, j: usize) -> F {
        self.weights[j]
    }

    /// Relabeled copy: component j of the result is component `perm[j]` of
    /// `self`. `perm` must be a bijection on [0, k).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.k() {
            return Err(Error::DimensionMismatch {
                context: "permutation length vs component count",
                expected: self.k(),
                got: perm.len(),
            });
        }
        let mut seen = vec![false; self.k()];
        for &p in perm {
            if p >= self.k() || seen[p] {
                return Err(Error::invalid("permuted: not a bijection"));
            }
            seen[p] = true;
        }
        Ok(EMState {
            betas: perm.iter().map(|&p| self.betas[p].clone()).collect(),
            weights: perm.iter().map(|&p| self.weights[p]).collect(),
        })
    }
}

/// Whether the M-step re-estimates mixing weights or holds them fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    FixedAtTruth,
    Estimated,
}

/// Knobs of one EM run. `sigma` is the known noise level (exact zero is the
/// noiseless hard-assignment regime, not a tiny epsilon).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EMConfig<F: Scalar> {
    pub sigma: F,
    pub weight_mode: WeightMode,
    /// Absolute Tikhonov term added to each weighted Gram matrix. `None`
    /// selects the scale-aware default 1e-10·n at solve time.
    pub ridge: Option<F>,
    pub max_iters: usize,
    /// Stop once max_j ‖β_j⁺ − β_j‖ ≤ tol.
    pub tol: F,
    /// Lower clamp applied to estimated weights before renormalizing.
    pub min_weight_floor: F,
}

impl<F: Scalar> EMConfig<F> {
    /// Defaults: estimated weights, scale-aware ridge, 30 iterations, and a
    /// tol of 1e-12 — tight enough that only exact-recovery fixed points
    /// (noiseless data, solver-rounding movement) trigger early stopping.
    pub fn new(sigma: F) -> Self {
        EMConfig {
            sigma,
            weight_mode: WeightMode::Estimated,
            ridge: None,
            max_iters: 30,
            tol: F::real(1e-12),
            min_weight_floor: F::real(1e-8),
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if !self.sigma.is_finite() || self.sigma < F::zero() {
            return Err(Error::invalid(format!(
                "sigma: must be finite and ≥ 0, got {}",
                self.sigma
            )));
        }
        if let Some(r) = self.ridge {
            if !r.is_finite() || r < F::zero() {
                return Err(Error::invalid(format!(
                    "ridge: must be finite and ≥ 0, got {r}"
                )));
            }
        }
        if self.tol < F::zero() || self.tol.is_nan() {
            return Err(Error::invalid(format!("tol: must be ≥ 0, got {}", self.tol)));
        }
        let floor_cap = F::one() / F::from_usize(k.max(1)).unwrap();
        if !(self.min_weight_floor >= F::zero()) || self.min_weight_floor >= floor_cap {
            return Err(Error::invalid(format!(
                "min_weight_floor: must lie in [0, 1/k), got {}",
                self.min_weight_floor
            )));
        }
        Ok(())
    }

    pub(crate) fn effective_ridge(&self, n: usize) -> F {
        self.ridge
            .unwrap_or_else(|| F::real(1e-10) * F::from_usize(n).unwrap())
    }
}

/// M-step (or full-iteration) result: the new state plus one degeneracy
/// flag per component. A degenerate component kept its previous β.
#[derive(Debug, Clone)]
pub struct StepOutcome<F: Scalar> {
    pub state: EMState<F>,
    pub degenerate: Vec<bool>,
}

/// Posterior responsibilities of one sample: w_j ∝ π_j·exp(−r_j²/(2σ²))
/// with r_j = y − ⟨x, β_j⟩. For σ = 0 (or when every log-term underflows)
/// this is the hard assignment to the smallest |r_j| among components with
/// π_j > 0, ties to the lowest index. Zero-weight components get weight 0.
pub fn posterior_weights<F: Scalar>(state: &EMState<F>, x: &[F], y: F, sigma: F) -> Vec<F> {
    let mut out = vec![F::zero(); state.k()];
    posterior_weights_into(state, x, y, sigma, &mut out);
    out
}

pub(crate) fn posterior_weights_into<F: Scalar>(
    state: &EMState<F>,
    x: &[F],
    y: F,
    sigma: F,
    out: &mut [F],
) {
    let k = state.k();
    assert_eq!(x.len(), state.dim(), "posterior_weights: x dimension");
    assert_eq!(out.len(), k, "posterior_weights: output length");
    assert!(sigma >= F::zero(), "posterior_weights: sigma must be ≥ 0");
    if sigma > F::zero() {
        let scale = F::one() / (F::real(2.0) * sigma * sigma);
        let mut m = F::neg_infinity();
        for j in 0..k {
            let pi = state.weight(j);
            let ll = if pi > F::zero() {
                let r = y - dot(x, state.beta(j));
                pi.ln() - r * r * scale
            } else {
                F::neg_infinity()
            };
            out[j] = ll;
            if ll > m {
                m = ll;
            }
        }
        if m.is_finite() {
            let mut sum = F::zero();
            for v in out.iter_mut() {
                *v = (*v - m).exp();
                sum += *v;
            }
            for v in out.iter_mut() {
                *v /= sum;
            }
            return;
        }
        // Every term underflowed (astronomical residuals): fall through to
        // the hard assignment, which is the correct limit and NaN-free.
    }
    let mut best = 0usize;
    let mut best_r = F::infinity();
    for j in 0..k {
        if state.weight(j) > F::zero() {
            let r = (y - dot(x, state.beta(j))).abs();
            if r < best_r {
                best_r = r;
                best = j;
            }
        }
    }
    for v in out.iter_mut() {
        *v = F::zero();
    }
    out[best] = F::one();
}

/// Weighted-least-squares M-step. For each component, solves
/// (Σ_i w_ij·X_i X_iᵀ + ridge·I)·β = Σ_i w_ij·y_i·X_i in fixed sample
/// order. A component with exactly zero responsibility mass, a failed
/// factorization, or a condition estimate above 1e14 freezes (keeps its β)
/// and is flagged degenerate.
pub fn m_step<F: Scalar>(
    batch: &Dataset<F>,
    responsibilities: &[F],
    state: &EMState<F>,
    config: &EMConfig<F>,
) -> Result<StepOutcome<F>> {
    let n = batch.len();
    let k = state.k();
    let d = state.dim();
    if batch.dim() != d {
        return Err(Error::DimensionMismatch {
            context: "design columns vs state dimension",
            expected: d,
            got: batch.dim(),
        });
    }
    if responsibilities.len() != n * k {
        return Err(Error::DimensionMismatch {
            context: "responsibility matrix size",
            expected: n * k,
            got: responsibilities.len(),
        });
    }
    config.validate(k)?;
    let mut grams = vec![F::zero(); k * d * d];
    let mut rhs = vec![F::zero(); k * d];
    let mut mass = vec![F::zero(); k];
    for i in 0..n {
        let x = batch.row(i);
        let y = batch.response()[i];
        for j in 0..k {
            let w = responsibilities[i * k + j];
            mass[j] += w;
            let wy = w * y;
            let gram = &mut grams[j * d * d..(j + 1) * d * d];
            let rhs_j = &mut rhs[j * d..(j + 1) * d];
            for r in 0..d {
                let xr = x[r];
                rhs_j[r] += xr * wy;
                let wxr = w * xr;
                let row = &mut gram[r * d..(r + 1) * d];
                for c in r..d {
                    row[c] += wxr * x[c];
                }
            }
        }
    }
    let ridge = config.effective_ridge(n);
    let max_cond = F::real(MAX_CONDITION);
    let mut betas = Vec::with_capacity(k);
    let mut degenerate = vec![false; k];
    for j in 0..k {
        if mass[j] == F::zero() {
            degenerate[j] = true;
            betas.push(state.beta(j).to_vec());
            continue;
        }
        let gram = &mut grams[j * d * d..(j + 1) * d * d];
        mirror_upper_to_lower(gram, d);
        match solve_spd_with_ridge(gram, d, &rhs[j * d..(j + 1) * d], ridge) {
            Some(out) if out.condition <= max_cond => betas.push(out.solution),
            _ => {
                degenerate[j] = true;
                betas.push(state.beta(j).to_vec());
            }
        }
    }
    let weights = match config.weight_mode {
        WeightMode::FixedAtTruth => state.weights().to_vec(),
        WeightMode::Estimated => {
            floored_weights(&mass, n, config.min_weight_floor)
        }
    };
    Ok(StepOutcome {
        state: EMState::new(betas, weights)?,
        degenerate,
    })
}

/// π_j = mass_j/n, clamped below at `floor`, then renormalized.
pub(crate) fn floored_weights<F: Scalar>(mass: &[F], n: usize, floor: F) -> Vec<F> {
    let nf = F::from_usize(n).unwrap();
    let mut w: Vec<F> = mass.iter().map(|m| *m / nf).collect();
    for v in w.iter_mut() {
        if *v < floor {
            *v = floor;
        }
    }
    let sum: F = w.iter().copied().sum();
    for v in w.iter_mut() {
        *v /= sum;
    }
    w
}

/// One full EM alternation: responsibilities row-by-row, then the M-step.
pub fn em_iterate<F: Scalar>(
    state: &EMState<F>,
    batch: &Dataset<F>,
    config: &EMConfig<F>,
) -> Result<StepOutcome<F>> {
    if batch.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            context: "design columns vs state dimension",
            expected: state.dim(),
            got: batch.dim(),
        });
    }
    let n = batch.len();
    let k = state.k();
    let mut resp = vec![F::zero(); n * k];
    for i in 0..n {
        posterior_weights_into(
            state,
            batch.row(i),
            batch.response()[i],
            config.sigma,
            &mut resp[i * k..(i + 1) * k],
        );
    }
    m_step(batch, &resp, state, config)
}

/// Per-iteration history of one run: every state (the initial one
/// included), batch sizes, degeneracy flags, and wall-clock timings.
/// Timings are for inspection only and are never serialized, keeping all
/// run artifacts byte-deterministic.
#[derive(Debug, Clone)]
pub struct RunTrace<F: Scalar> {
    states: Vec<EMState<F>>,
    batch_sizes: Vec<usize>,
    degenerate: Vec<Vec<bool>>,
    timings: Vec<Duration>,
    converged: bool,
}

impl<F: Scalar> RunTrace<F> {
    pub(crate) fn from_parts(
        states: Vec<EMState<F>>,
        batch_sizes: Vec<usize>,
        degenerate: Vec<Vec<bool>>,
        timings: Vec<Duration>,
        converged: bool,
    ) -> Self {
        debug_assert_eq!(states.len(), batch_sizes.len() + 1);
        debug_assert_eq!(batch_sizes.len(), degenerate.len());
        RunTrace {
            states,
            batch_sizes,
            degenerate,
            timings,
            converged,
        }
    }

    /// All iterates, index 0 being the initial state.
    pub fn states(&self) -> &[EMState<F>] {
        &self.states
    }

    pub fn final_state(&self) -> &EMState<F> {
        self.states.last().unwrap()
    }

    pub fn iterations_used(&self) -> usize {
        self.states.len() - 1
    }

    pub fn batch_sizes(&self) -> &[usize] {
        &self.batch_sizes
    }

    /// Per-iteration degeneracy flags, one vector of k booleans per step.
    pub fn degenerate(&self) -> &[Vec<bool>] {
        &self.degenerate
    }

    pub fn degenerate_count(&self) -> usize {
        self.degenerate
            .iter()
            .map(|v| v.iter().filter(|&&b| b).count())
            .sum()
    }

    pub fn timings(&self) -> &[Duration] {
        &self.timings
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// CSV export. Columns: iter, component, beta_0..beta_{d-1}, pi, then
    /// matched_error when `truth` is given, then degenerate_flag, then an
    /// estimator tag when given. One row per (iteration, component).
    pub fn write_csv<W: Write>(
        &self,
        truth: Option<&MixtureParams<F>>,
        estimator: Option<&str>,
        out: &mut W,
    ) -> Result<()> {
        let d = self.states[0].dim();
        let k = self.states[0].k();
        let mut header = String::from("iter,component");
        for c in 0..d {
            header.push_str(&format!(",beta_{c}"));
        }
        header.push_str(",pi");
        if truth.is_some() {
            header.push_str(",matched_error");
        }
        header.push_str(",degenerate_flag");
        if estimator.is_some() {
            header.push_str(",estimator");
        }
        writeln!(out, "{header}")?;
        for (t, state) in self.states.iter().enumerate() {
            // Component c of the estimate is matched to the truth component
            // that the per-state matching assigns it to.
            let matched_by_component = match truth {
                Some(truth) => {
                    let me = matched_error(state, truth)?;
                    let mut per_estimate = vec![F::zero(); k];
                    for j in 0..k {
                        per_estimate[me.permutation[j]] = me.per_component_beta_err[j];
                    }
                    Some(per_estimate)
                }
                None => None,
            };
            for c in 0..k {
                write!(out, "{t},{c}")?;
                for v in state.beta(c) {
                    write!(out, ",{v}")?;
                }
                write!(out, ",{}", state.weight(c))?;
                if let Some(errs) = &matched_by_component {
                    write!(out, ",{}", errs[c])?;
                }
                let flag = if t == 0 {
                    false
                } else {
                    self.degenerate[t - 1][c]
                };
                write!(out, ",{}", flag as u8)?;
                if let Some(tag) = estimator {
                    write!(out, ",{tag}")?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

/// Shared driver: applies `em_iterate` over the given batch sequence,
/// recording states and stopping early on the tol criterion.
fn run_schedule<'a, F: Scalar>(
    init: &EMState<F>,
    config: &EMConfig<F>,
    batches: impl Iterator<Item = &'a Dataset<F>>,
) -> Result<RunTrace<F>> {
    let mut states = vec![init.clone()];
    let mut batch_sizes = Vec::new();
    let mut degenerate = Vec::new();
    let mut timings = Vec::new();
    let mut converged = false;
    for batch in batches {
        let start = Instant::now();
        let prev = states.last().unwrap();
        let out = em_iterate(prev, batch, config)?;
        let movement = max_component_movement(prev, &out.state);
        timings.push(start.elapsed());
        batch_sizes.push(batch.len());
        degenerate.push(out.degenerate);
        states.push(out.state);
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

pub(crate) fn max_component_movement<F: Scalar>(a: &EMState<F>, b: &EMState<F>) -> F {
    let mut m = F::zero();
    for j in 0..a.k() {
        m = m.max(dist(a.beta(j), b.beta(j)));
    }
    m
}

/// Sample-splitting schedule: partitions `data` into `t_batches` disjoint
/// batches and consumes a fresh one per iteration. T caps the iteration
/// count together with `config.max_iters`.
pub fn run_sample_splitting_em<F: Scalar>(
    init: &EMState<F>,
    data: &Dataset<F>,
    t_batches: usize,
    config: &EMConfig<F>,
) -> Result<RunTrace<F>> {
    config.validate(init.k())?;
    let batches = split_batches(data, t_batches)?;
    let limit = t_batches.min(config.max_iters);
    run_schedule(init, config, batches.iter().take(limit))
}

/// Pooled schedule: every iteration reuses the full dataset.
pub fn run_pooled_em<F: Scalar>(
    init: &EMState<F>,
    data: &Dataset<F>,
    config: &EMConfig<F>,
) -> Result<RunTrace<F>> {
    config.validate(init.k())?;
    run_schedule(init, config, std::iter::repeat(data).take(config.max_iters))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::sample_dataset;

    fn simple_state(betas: Vec<Vec<f64>>, weights: Vec<f64>) -> EMState<f64> {
        EMState::new(betas, weights).unwrap()
    }

    #[test]
    fn single_component_posterior_is_one() {
        let s = simple_state(vec![vec![2.0, -1.0]], vec![1.0]);
        assert_eq!(posterior_weights(&s, &[0.3, 0.4], 5.0, 1.0), vec![1.0]);
        assert_eq!(posterior_weights(&s, &[0.3, 0.4], 5.0, 0.0), vec![1.0]);
    }

    #[test]
    fn symmetric_residuals_split_evenly() {
        let s = simple_state(vec![vec![1.0], vec![-1.0]], vec![0.5, 0.5]);
        // x = 1, y = 0: residuals are -1 and +1, equal magnitude.
        let w = posterior_weights(&s, &[1.0], 0.0, 1.0);
        assert!((w[0] - 0.5).abs() < 1e-15);
        assert!((w[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hand_evaluated_two_component_posterior() {
        // β = (1, -1), π = (1/2, 1/2), σ = 1, x = 1, y = 1:
        // residuals 0 and 2, so w₁ = 1/(1 + e^{-2}).
        let s = simple_state(vec![vec![1.0], vec![-1.0]], vec![0.5, 0.5]);
        let w = posterior_weights(&s, &[1.0], 1.0, 1.0);
        let expect = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((w[0] - expect).abs() < 1e-12, "w0 = {}", w[0]);
        assert!((w[0] - 0.880797).abs() < 1e-6);
        assert!((w[1] - 0.119203).abs() < 1e-6);
    }

    #[test]
    fn zero_sigma_ties_break_to_lowest_index() {
        // Residuals ±0.3: equal magnitude, component 0 wins.
        let s = simple_state(vec![vec![0.7], vec![1.3]], vec![0.5, 0.5]);
        let w = posterior_weights(&s, &[1.0], 1.0, 0.0);
        assert_eq!(w, vec![1.0, 0.0]);
    }

    #[test]
    fn zero_weight_component_gets_zero_responsibility() {
        let s = EMState::<f64> {
            betas: vec![vec![1.0], vec![5.0]],
            weights: vec![1.0, 0.0],
        };
        // y best explained by component 1, but its weight is 0.
        let soft = posterior_weights(&s, &[1.0], 5.0, 1.0);
        assert_eq!(soft[1], 0.0);
        assert!((soft[0] - 1.0).abs() < 1e-15);
        let hard = posterior_weights(&s, &[1.0], 5.0, 0.0);
        assert_eq!(hard, vec![1.0, 0.0]);
    }

    #[test]
    fn one_component_m_step_is_ols_d1() {
        // d = 1 closed form: β = Σxy/Σx².
        let params = crate::model::MixtureParams::new(vec![vec![2.0]], vec![1.0], 0.5).unwrap();
        let data = sample_dataset(&params, 40, 9).unwrap();
        let state = simple_state(vec![vec![0.0]], vec![1.0]);
        let mut cfg = EMConfig::new(0.5);
        cfg.ridge = Some(0.0);
        let resp = vec![1.0; 40];
        let out = m_step(&data, &resp, &state, &cfg).unwrap();
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for i in 0..40 {
            sxy += data.row(i)[0] * data.response()[i];
            sxx += data.row(i)[0] * data.row(i)[0];
        }
        assert!((out.state.beta(0)[0] - sxy / sxx).abs() < 1e-12);
        assert!(!out.degenerate[0]);
    }

    #[test]
    fn zero_mass_component_freezes_with_floor_weight() {
        let params = crate::model::MixtureParams::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.5, 0.5],
            0.1,
        )
        .unwrap();
        let data = sample_dataset(&params, 30, 3).unwrap();
        let state = EMState::from_params(&params);
        let cfg = EMConfig::new(0.1);
        // All responsibility on component 0.
        let mut resp = vec![0.0; 30 * 2];
        for i in 0..30 {
            resp[i * 2] = 1.0;
        }
        let out = m_step(&data, &resp, &state, &cfg).unwrap();
        assert!(out.degenerate[1]);
        assert!(!out.degenerate[0]);
        assert_eq!(out.state.beta(1), state.beta(1));
        let floor: f64 = cfg.min_weight_floor;
        assert!((out.state.weight(1) - floor / (1.0 + floor)).abs() < 1e-18);
    }

    #[test]
    fn truth_is_fixed_point_of_noiseless_iteration() {
        let params = crate::model::MixtureParams::<f64>::new(
            vec![vec![3.0, 0.0, 1.0], vec![0.0, -2.0, 0.5]],
            vec![0.6, 0.4],
            0.0,
        )
        .unwrap();
        let data = sample_dataset(&params, 60, 11).unwrap();
        let truth_state = EMState::from_params(&params);
        let mut cfg = EMConfig::new(0.0);
        cfg.ridge = Some(0.0);
        let out = em_iterate(&truth_state, &data, &cfg).unwrap();
        for j in 0..2 {
            for c in 0..3 {
                assert!(
                    (out.state.beta(j)[c] - truth_state.beta(j)[c]).abs() <= 1e-12,
                    "moved: {} vs {}",
                    out.state.beta(j)[c],
                    truth_state.beta(j)[c]
                );
            }
        }
    }

    #[test]
    fn splitting_with_one_batch_equals_single_iteration() {
        let params = crate::model::MixtureParams::new(
            vec![vec![1.0, 2.0], vec![-2.0, 0.0]],
            vec![0.5, 0.5],
            0.2,
        )
        .unwrap();
        let data = sample_dataset(&params, 80, 21).unwrap();
        let init = simple_state(vec![vec![0.9, 2.1], vec![-1.8, 0.1]], vec![0.5, 0.5]);
        let mut cfg = EMConfig::new(0.2);
        cfg.max_iters = 1;
        let trace = run_sample_splitting_em(&init, &data, 1, &cfg).unwrap();
        let single = em_iterate(&init, &data, &cfg).unwrap();
        assert_eq!(trace.iterations_used(), 1);
        assert_eq!(trace.final_state(), &single.state);
    }

    #[test]
    fn infinite_tol_converges_after_first_iteration() {
        let params =
            crate::model::MixtureParams::new(vec![vec![1.0]], vec![1.0], 0.1).unwrap();
        let data = sample_dataset(&params, 50, 5).unwrap();
        let init = simple_state(vec![vec![0.0]], vec![1.0]);
        let mut cfg = EMConfig::new(0.1);
        cfg.tol = f64::INFINITY;
        cfg.max_iters = 10;
        let trace = run_pooled_em(&init, &data, &cfg).unwrap();
        assert!(trace.converged());
        assert_eq!(trace.iterations_used(), 1);
    }

    #[test]
    fn zero_max_iters_keeps_only_init() {
        let params =
            crate::model::MixtureParams::new(vec![vec![1.0]], vec![1.0], 0.1).unwrap();
        let data = sample_dataset(&params, 50, 5).unwrap();
        let init = simple_state(vec![vec![0.4]], vec![1.0]);
        let mut cfg = EMConfig::new(0.1);
        cfg.max_iters = 0;
        let trace = run_pooled_em(&init, &data, &cfg).unwrap();
        assert_eq!(trace.states().len(), 1);
        assert!(!trace.converged());
        assert_eq!(trace.iterations_used(), 0);
    }

    #[test]
    fn noiseless_truth_init_converges_immediately() {
        let params = crate::model::MixtureParams::new(
            vec![vec![2.0, 1.0], vec![-1.0, 3.0]],
            vec![0.5, 0.5],
            0.0,
        )
        .unwrap();
        let data = sample_dataset(&params, 100, 17).unwrap();
        let init = EMState::from_params(&params);
        let mut cfg = EMConfig::new(0.0);
        cfg.ridge = Some(0.0);
        cfg.max_iters = 10;
        let trace = run_pooled_em(&init, &data, &cfg).unwrap();
        assert!(trace.converged());
        assert_eq!(trace.iterations_used(), 1);
    }

    #[test]
    fn estimated_weights_stay_on_simplex() {
        let params = crate::model::MixtureParams::new(
            vec![vec![4.0, 0.0], vec![0.0, 4.0]],
            vec![0.7, 0.3],
            0.3,
        )
        .unwrap();
        let data = sample_dataset(&params, 500, 31).unwrap();
        let init = simple_state(vec![vec![3.5, 0.2], vec![0.3, 3.6]], vec![0.5, 0.5]);
        let cfg = EMConfig::new(0.3);
        let trace = run_pooled_em(&init, &data, &cfg).unwrap();
        for state in trace.states() {
            let sum: f64 = state.weights().iter().sum();
            assert!((sum - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn csv_trace_has_pinned_columns() {
        let params = crate::model::MixtureParams::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.5, 0.5],
            0.1,
        )
        .unwrap();
        let data = sample_dataset(&params, 40, 7).unwrap();
        let init = EMState::from_params(&params);
        let mut cfg = EMConfig::new(0.1);
        cfg.max_iters = 2;
        let trace = run_pooled_em(&init, &data, &cfg).unwrap();
        let mut plain = Vec::new();
        trace.write_csv(None, None, &mut plain).unwrap();
        let text = String::from_utf8(plain).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "iter,component,beta_0,beta_1,pi,degenerate_flag");
        assert_eq!(text.lines().count(), 1 + 2 * trace.states().len());
        let mut tagged = Vec::new();
        trace.write_csv(Some(&params), Some("em-pooled"), &mut tagged).unwrap();
        let tagged = String::from_utf8(tagged).unwrap();
        assert_eq!(
            tagged.lines().next().unwrap(),
            "iter,component,beta_0,beta_1,pi,matched_error,degenerate_flag,estimator"
        );
        assert!(tagged.lines().nth(1).unwrap().ends_with(",em-pooled"));
        assert!(!tagged.contains('\r'));
    }

    #[test]
    fn permuting_init_permutes_whole_trace() {
        let params = crate::model::MixtureParams::new(
            vec![vec![5.0, 0.0], vec![0.0, 5.0]],
            vec![0.5, 0.5],
            0.2,
        )
        .unwrap();
        let data = sample_dataset(&params, 200, 13).unwrap();
        let init = simple_state(vec![vec![4.5, 0.3], vec![0.2, 5.4]], vec![0.6, 0.4]);
        let perm = [1usize, 0];
        let cfg = EMConfig::new(0.2);
        let a = run_pooled_em(&init, &data, &cfg).unwrap();
        let b = run_pooled_em(&init.permuted(&perm).unwrap(), &data, &cfg).unwrap();
        assert_eq!(a.states().len(), b.states().len());
        for (sa, sb) in a.states().iter().zip(b.states()) {
            assert_eq!(&sa.permuted(&perm).unwrap(), sb);
        }
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let mut cfg = EMConfig::new(-0.1);
        assert!(cfg.validate(2).is_err());
        cfg.sigma = 0.1;
        cfg.ridge = Some(-1.0);
        assert!(cfg.validate(2).is_err());
        cfg.ridge = None;
        cfg.min_weight_floor = 0.5;
        assert!(cfg.validate(2).is_err());
        cfg.min_weight_floor = 1e-8;
        cfg.validate(2).unwrap();
    }
}
