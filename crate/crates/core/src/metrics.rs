//! Permutation-matched error, contraction traces, and Monte Carlo
//! diagnostics of the good-event constructions behind the convergence
//! analysis.
//!
//! Mixture labels are unidentifiable, so every error metric first matches
//! estimate components to truth components. The objective is bottleneck
//! (minimize the largest per-component distance) because the analyzed
//! quantity is D_m = max_j ‖β_j − β_j*‖; ties go to the smaller distance
//! sum, then the lexicographically smallest permutation.

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::{derive_stream_seed, draw_sample};
use crate::em_core::{posterior_weights_into, EMState, RunTrace};
use crate::error::{Error, Result};
use crate::linalg::{dist, dot};
use crate::model::{separation_stats, MixtureParams};
use crate::scalar::Scalar;

/// Error of an estimate against the truth under the best component
/// matching. `permutation[j]` is the estimate component matched to truth
/// component j; all per-component entries are indexed by truth component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MatchedError<F: Scalar> {
    pub permutation: Vec<usize>,
    pub max_beta_err: F,
    pub per_component_beta_err: Vec<F>,
    /// max_j |π_{perm(j)} − π_j*| / π_j*.
    pub max_rel_weight_err: F,
}

/// Finds the bijection minimizing the maximum per-component β distance:
/// exhaustively for k ≤ 8, by threshold search plus assignment for larger
/// k (where the lexicographic tie-break among equal-cost optima is not
/// guaranteed).
pub fn matched_error<F: Scalar>(
    estimate: &EMState<F>,
    truth: &MixtureParams<F>,
) -> Result<MatchedError<F>> {
    let k = truth.k();
    if estimate.k() != k {
        return Err(Error::DimensionMismatch {
            context: "component count, estimate vs truth",
            expected: k,
            got: estimate.k(),
        });
    }
    if estimate.dim() != truth.dim() {
        return Err(Error::DimensionMismatch {
            context: "beta dimension, estimate vs truth",
            expected: truth.dim(),
            got: estimate.dim(),
        });
    }
    let mut cost = vec![F::zero(); k * k];
    for t in 0..k {
        for e in 0..k {
            cost[t * k + e] = dist(truth.beta(t), estimate.beta(e));
        }
    }
    let permutation = if k <= 8 {
        exhaustive_assignment(&cost, k)
    } else {
        bottleneck_assignment(&cost, k)
    };
    let per_component_beta_err: Vec<F> = (0..k).map(|t| cost[t * k + permutation[t]]).collect();
    let max_beta_err = per_component_beta_err
        .iter()
        .fold(F::zero(), |a, &b| a.max(b));
    let mut max_rel_weight_err = F::zero();
    for t in 0..k {
        let rel = (estimate.weight(permutation[t]) - truth.weight(t)).abs() / truth.weight(t);
        max_rel_weight_err = max_rel_weight_err.max(rel);
    }
    Ok(MatchedError {
        permutation,
        max_beta_err,
        per_component_beta_err,
        max_rel_weight_err,
    })
}

/// Scans all k! bijections in lexicographic order, keeping the first one
/// that strictly improves (max distance, then distance sum).
fn exhaustive_assignment<F: Scalar>(cost: &[F], k: usize) -> Vec<usize> {
    let mut best: Option<(F, F, Vec<usize>)> = None;
    for perm in (0..k).permutations(k) {
        let mut mx = F::zero();
        let mut sum = F::zero();
        for (t, &e) in perm.iter().enumerate() {
            let c = cost[t * k + e];
            sum += c;
            if c > mx {
                mx = c;
            }
        }
        let improves = match &best {
            None => true,
            Some((bm, bs, _)) => mx < *bm || (mx == *bm && sum < *bs),
        };
        if improves {
            best = Some((mx, sum, perm));
        }
    }
    best.unwrap().2
}

/// Bottleneck assignment for larger k: binary-search the smallest
/// threshold admitting a perfect matching on edges ≤ threshold, then take
/// the minimum-sum assignment restricted to those edges.
fn bottleneck_assignment<F: Scalar>(cost: &[F], k: usize) -> Vec<usize> {
    let mut thresholds = cost.to_vec();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();
    let mut lo = 0usize;
    let mut hi = thresholds.len() - 1;
    while lo < hi {
        let mid = (lo + hi) / 2;
        if perfect_matching_exists(cost, k, thresholds[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let bottleneck = thresholds[lo];
    // Any matching through a blocked edge must cost more than every
    // feasible one, so a finite penalty above the total mass suffices and
    // keeps the potentials arithmetic NaN-free.
    let big = cost.iter().fold(F::one(), |a, &c| a + c);
    let masked: Vec<F> = cost
        .iter()
        .map(|&c| if c <= bottleneck { c } else { big })
        .collect();
    hungarian_min_sum(&masked, k)
}

/// Kuhn's augmenting-path bipartite matching over edges with cost ≤ b.
fn perfect_matching_exists<F: Scalar>(cost: &[F], k: usize, b: F) -> bool {
    fn augment<F: Scalar>(
        t: usize,
        cost: &[F],
        k: usize,
        b: F,
        visited: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for e in 0..k {
            if cost[t * k + e] <= b && !visited[e] {
                visited[e] = true;
                let free = match owner[e] {
                    None => true,
                    Some(prev) => augment(prev, cost, k, b, visited, owner),
                };
                if free {
                    owner[e] = Some(t);
                    return true;
                }
            }
        }
        false
    }
    let mut owner = vec![None; k];
    for t in 0..k {
        let mut visited = vec![false; k];
        if !augment(t, cost, k, b, &mut visited, &mut owner) {
            return false;
        }
    }
    true
}

/// O(k³) assignment via the standard potentials formulation; returns
/// perm[t] = matched column for row t.
fn hungarian_min_sum<F: Scalar>(cost: &[F], k: usize) -> Vec<usize> {
    let inf = F::infinity();
    let mut u = vec![F::zero(); k + 1];
    let mut v = vec![F::zero(); k + 1];
    let mut matched_row = vec![0usize; k + 1]; // column -> row, 1-indexed, 0 = free
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=k {
                if !used[j] {
                    let cur = cost[(i0 - 1) * k + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; k];
    for j in 1..=k {
        if matched_row[j] > 0 {
            perm[matched_row[j] - 1] = j - 1;
        }
    }
    perm
}

/// One entry of a contraction trace: the matched error D_m at an
/// iteration and the ratio D_m(iter+1)/D_m(iter) (None on the last entry,
/// +inf sentinel instead of NaN when D_m(iter) = 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionPoint<F> {
    pub iter: usize,
    pub d_m: F,
    pub ratio: Option<F>,
}

/// D_m per state of a run under the permutation frozen from iteration 0's
/// matching. Freezing is deliberate: re-matching every iteration could
/// mask label swapping mid-run, which should read as non-contraction.
pub fn contraction_trace<F: Scalar>(
    trace: &RunTrace<F>,
    truth: &MixtureParams<F>,
) -> Result<Vec<ContractionPoint<F>>> {
    let states = trace.states();
    let perm = matched_error(&states[0], truth)?.permutation;
    let k = truth.k();
    let d_m: Vec<F> = states
        .iter()
        .map(|s| {
            (0..k)
                .map(|j| dist(s.beta(perm[j]), truth.beta(j)))
                .fold(F::zero(), |a, b| a.max(b))
        })
        .collect();
    Ok(d_m
        .iter()
        .enumerate()
        .map(|(t, &dm)| ContractionPoint {
            iter: t,
            d_m: dm,
            ratio: if t + 1 < d_m.len() {
                Some(if dm == F::zero() {
                    F::infinity()
                } else {
                    d_m[t + 1] / dm
                })
            } else {
                None
            },
        })
        .collect())
}

/// Monte Carlo estimates of the good-event probabilities and the deviation
/// of the reference-component responsibility. All per-component vectors
/// are indexed by the origin component; entry 0 (the reference itself) is
/// vacuous: probabilities 1, deviation 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EventStats<F: Scalar> {
    pub tau: Vec<F>,
    /// P(|e| ≤ τ_j | origin j): bounded noise.
    pub p_e1: Vec<F>,
    /// P(4(|⟨X,Δ_0⟩| ∨ |⟨X,Δ_j⟩|) ≤ |⟨X,β_j*−β_0*⟩| | origin j):
    /// cross-component projection dominated by the separation.
    pub p_e2: Vec<F>,
    /// P(|⟨X,β_j*−β_0*⟩| ≥ 4√2·τ_j·σ | origin j): sufficient separation.
    pub p_e3: Vec<F>,
    pub p_good: Vec<F>,
    /// Largest observed |w_0(state) − w_0(truth)| on good-event samples.
    pub max_dw_good: Vec<F>,
    /// Analytic bound 3·ρ_{j0}·exp(−τ_j²) with ρ_{j0} = π_0*/π_j*.
    pub bound_dw: Vec<F>,
}

/// Estimates the three event probabilities conditional on the origin
/// component and the worst responsibility deviation on their intersection.
/// Residual-based quantities are evaluated in the unit-variance rescaled
/// frame, so τ is expressed in σ units. Requires σ > 0 (the events are
/// indexed by the noise variable).
pub fn event_diagnostics<F: Scalar>(
    truth: &MixtureParams<F>,
    state: &EMState<F>,
    tau: &[F],
    n_mc: usize,
    seed: u64,
) -> Result<EventStats<F>> {
    let k = truth.k();
    let d = truth.dim();
    let sigma = truth.noise_sigma();
    if !(sigma > F::zero()) {
        return Err(Error::invalid(
            "event_diagnostics: requires sigma > 0 (events are noise-indexed)",
        ));
    }
    if state.k() != k || state.dim() != d {
        return Err(Error::DimensionMismatch {
            context: "state shape, event diagnostics",
            expected: k * d,
            got: state.k() * state.dim(),
        });
    }
    if tau.len() != k {
        return Err(Error::DimensionMismatch {
            context: "tau length vs component count",
            expected: k,
            got: tau.len(),
        });
    }
    if tau.iter().any(|t| !t.is_finite() || *t < F::zero()) {
        return Err(Error::invalid("tau: entries must be finite and ≥ 0"));
    }
    if n_mc == 0 {
        return Err(Error::invalid("n_mc must be ≥ 1"));
    }
    let truth_state = EMState::from_params(truth);
    // Δ_j = β_j(state) − β_j*, and the separation directions β_j* − β_0*.
    let deltas: Vec<Vec<F>> = (0..k)
        .map(|j| {
            state
                .beta(j)
                .iter()
                .zip(truth.beta(j))
                .map(|(a, b)| *a - *b)
                .collect()
        })
        .collect();
    let separations: Vec<Vec<F>> = (0..k)
        .map(|j| {
            truth
                .beta(j)
                .iter()
                .zip(truth.beta(0))
                .map(|(a, b)| *a - *b)
                .collect()
        })
        .collect();
    let four = F::real(4.0);
    let sep_floor: Vec<F> = (0..k)
        .map(|j| four * F::real(2.0).sqrt() * tau[j] * sigma)
        .collect();
    let mut count = vec![0usize; k];
    let mut c1 = vec![0usize; k];
    let mut c2 = vec![0usize; k];
    let mut c3 = vec![0usize; k];
    let mut cg = vec![0usize; k];
    let mut max_dw = vec![F::zero(); k];
    let mut w_state = vec![F::zero(); k];
    let mut w_truth = vec![F::zero(); k];
    for i in 0..n_mc {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_stream_seed(seed, i as u64));
        let s = draw_sample(truth, &mut rng);
        let j = s.label;
        count[j] += 1;
        if j == 0 {
            continue;
        }
        let e1 = s.noise.abs() <= tau[j];
        let proj_ref = dot(&s.x, &deltas[0]).abs();
        let proj_own = dot(&s.x, &deltas[j]).abs();
        let sep = dot(&s.x, &separations[j]).abs();
        let e2 = four * proj_ref.max(proj_own) <= sep;
        let e3 = sep >= sep_floor[j];
        c1[j] += usize::from(e1);
        c2[j] += usize::from(e2);
        c3[j] += usize::from(e3);
        if e1 && e2 && e3 {
            cg[j] += 1;
            let y = dot(&s.x, truth.beta(j)) + sigma * s.noise;
            posterior_weights_into(state, &s.x, y, sigma, &mut w_state);
            posterior_weights_into(&truth_state, &s.x, y, sigma, &mut w_truth);
            let dw = (w_state[0] - w_truth[0]).abs();
            max_dw[j] = max_dw[j].max(dw);
        }
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            F::one()
        } else {
            F::from_usize(num).unwrap() / F::from_usize(den).unwrap()
        }
    };
    let mut stats = EventStats {
        tau: tau.to_vec(),
        p_e1: Vec::with_capacity(k),
        p_e2: Vec::with_capacity(k),
        p_e3: Vec::with_capacity(k),
        p_good: Vec::with_capacity(k),
        max_dw_good: max_dw,
        bound_dw: Vec::with_capacity(k),
    };
    for j in 0..k {
        if j == 0 {
            stats.p_e1.push(F::one());
            stats.p_e2.push(F::one());
            stats.p_e3.push(F::one());
            stats.p_good.push(F::one());
        } else {
            stats.p_e1.push(ratio(c1[j], count[j]));
            stats.p_e2.push(ratio(c2[j], count[j]));
            stats.p_e3.push(ratio(c3[j], count[j]));
            stats.p_good.push(ratio(cg[j], count[j]));
        }
        let rho = truth.weight(0) / truth.weight(j);
        stats
            .bound_dw
            .push(F::real(3.0) * rho * (-tau[j] * tau[j]).exp());
    }
    Ok(stats)
}

/// The default thresholds τ_j = √(log(R_{j0}·k·ρ_π)) with R_{j0} in σ
/// units and the analysis constant set to 1; entry 0 is 0 and arguments
/// below 1 clamp to τ = 0. Requires σ > 0.
pub fn default_tau<F: Scalar>(truth: &MixtureParams<F>) -> Result<Vec<F>> {
    let sigma = truth.noise_sigma();
    if !(sigma > F::zero()) {
        return Err(Error::invalid("default_tau: requires sigma > 0"));
    }
    let stats = separation_stats(truth)?;
    let kf = F::from_usize(truth.k()).unwrap();
    Ok((0..truth.k())
        .map(|j| {
            if j == 0 {
                F::zero()
            } else {
                let r = dist(truth.beta(j), truth.beta(0)) / sigma;
                (r * kf * stats.rho_pi).ln().max(F::zero()).sqrt()
            }
        })
        .collect())
}
