//! Parameter containers for the mixture of linear regressions, separation
//! statistics, and the local-convergence condition checks.
//!
//! The model: a hidden component index j is drawn with probability π_j, the
//! design vector X is standard Gaussian, and y = ⟨X, β_j⟩ + σ·e with unit
//! Gaussian noise e. Convergence guarantees for EM on this model are local
//! statements parameterized by the component separation R_min, the weight
//! imbalance ρ_π, and the noise level; `check_local_conditions` evaluates
//! those hypotheses for a concrete (truth, initialization) pair.

use serde::{Deserialize, Serialize};

use crate::em_core::EMState;
use crate::error::{Error, Result};
use crate::linalg::dist;
use crate::metrics::matched_error;
use crate::scalar::Scalar;

/// Ground-truth or estimated mixture: k regression vectors β_j in R^d, a
/// mixing weight vector π on the simplex, and the noise standard deviation.
///
/// Construction and deserialization-followed-by-[`validate`](Self::validate)
/// are the only supported ways to obtain a valid instance; fields are
/// immutable afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MixtureParams<F: Scalar> {
    betas: Vec<Vec<F>>,
    weights: Vec<F>,
    #[serde(rename = "sigma")]
    noise_sigma: F,
}

/// Pairwise separation geometry of a mixture: R_min, R_max, the weight
/// ratio ρ_π, the smallest weight, and the full distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationStats<F> {
    /// Minimum pairwise distance between regression vectors; +inf for k = 1.
    pub r_min: F,
    /// Maximum pairwise distance; +inf for k = 1.
    pub r_max: F,
    /// max weight / min weight, always ≥ 1.
    pub rho_pi: F,
    /// Smallest mixing weight.
    pub pi_min: F,
    /// k×k symmetric distance matrix with zero diagonal.
    pub pairwise: Vec<Vec<F>>,
}

/// The two unspecified universal constants of the local-convergence
/// statement. `C` scales the SNR threshold, `c` scales the initialization
/// radius bound; defaults are C = 1, c = 0.5 and the report always records
/// what was used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ConditionConstants<F: Scalar> {
    #[serde(rename = "C")]
    pub c_snr: F,
    #[serde(rename = "c")]
    pub c_radius: F,
}

impl<F: Scalar> Default for ConditionConstants<F> {
    fn default() -> Self {
        ConditionConstants {
            c_snr: F::one(),
            c_radius: F::real(0.5),
        }
    }
}

/// Outcome of the three local-convergence clauses. All distance quantities
/// are reported in the unit-variance rescaled frame (divided by σ) when
/// σ > 0; for σ = 0 the SNR is +inf, the radius is reported in raw units,
/// and the radius bound is +inf, so the comparisons below stay meaningful.
///
/// `satisfied` is true iff `snr ≥ snr_threshold`, `init_beta_radius ≤
/// init_beta_bound`, and `init_weight_ok` all hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ConditionReport<F: Scalar> {
    #[serde(with = "crate::real_json")]
    pub snr: F,
    #[serde(with = "crate::real_json")]
    pub snr_threshold: F,
    #[serde(with = "crate::real_json")]
    pub init_beta_radius: F,
    #[serde(with = "crate::real_json")]
    pub init_beta_bound: F,
    pub init_weight_ok: bool,
    pub satisfied: bool,
    pub constants_used: ConditionConstants<F>,
}

impl<F: Scalar> MixtureParams<F> {
    pub fn new(betas: Vec<Vec<F>>, weights: Vec<F>, noise_sigma: F) -> Result<Self> {
        let p = MixtureParams {
            betas,
            weights,
            noise_sigma,
        };
        p.validate()?;
        Ok(p)
    }

    /// β_j = scale·e_j on the first k canonical directions. Gives
    /// R_min = R_max = scale·√2, which makes SNR sweeps one-knob affairs.
    pub fn orthogonal_scaled(
        k: usize,
        d: usize,
        scale: F,
        weights: Vec<F>,
        noise_sigma: F,
    ) -> Result<Self> {
        if k > d {
            return Err(Error::invalid(format!(
                "orthogonal construction needs k ≤ d, got k = {k}, d = {d}"
            )));
        }
        let mut betas = vec![vec![F::zero(); d]; k];
        for (j, b) in betas.iter_mut().enumerate() {
            b[j] = scale;
        }
        Self::new(betas, weights, noise_sigma)
    }

    pub fn balanced_weights(k: usize) -> Vec<F> {
        vec![F::one() / F::from_usize(k.max(1)).unwrap(); k]
    }

    /// Re-validates the invariants; required after deserializing, which
    /// cannot enforce them.
    pub fn validate(&self) -> Result<()> {
        if self.betas.is_empty() {
            return Err(Error::invalid("betas: at least one component required"));
        }
        let d = self.betas[0].len();
        if d == 0 {
            return Err(Error::invalid("betas: dimension must be ≥ 1"));
        }
        for (j, b) in self.betas.iter().enumerate() {
            if b.len() != d {
                return Err(Error::DimensionMismatch {
                    context: "betas: rows must share one dimension",
                    expected: d,
                    got: b.len(),
                });
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("betas: component {j} not finite")));
            }
        }
        validate_simplex(&self.weights, self.betas.len(), F::real(1e-12), "weights")?;
        if !(self.noise_sigma >= F::zero()) || !self.noise_sigma.is_finite() {
            return Err(Error::invalid(format!(
                "sigma: must be finite and ≥ 0, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
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

    pub fn noise_sigma(&self) -> F {
        self.noise_sigma
    }

    /// Copy with every β_j multiplied by λ > 0 (sweeps over R_max).
    pub fn with_scaled_betas(&self, lambda: F) -> Result<Self> {
        if !(lambda > F::zero()) || !lambda.is_finite() {
            return Err(Error::invalid(format!("beta scale must be > 0, got {lambda}")));
        }
        let betas = self
            .betas
            .iter()
            .map(|b| b.iter().map(|v| *v * lambda).collect())
            .collect();
        Self::new(betas, self.weights.clone(), self.noise_sigma)
    }

    /// Copy with a different noise level (sweeps over σ).
    pub fn with_sigma(&self, noise_sigma: F) -> Result<Self> {
        Self::new(self.betas.clone(), self.weights.clone(), noise_sigma)
    }
}

/// Checks a weight vector: right length, finite, nonnegative, sums to 1
/// within `tol` (widened for f32, where 1e-12 is below representable
/// rounding of a simplex sum).
pub(crate) fn validate_simplex<F: Scalar>(
    weights: &[F],
    k: usize,
    tol: F,
    field: &str,
) -> Result<()> {
    if weights.len() != k {
        return Err(Error::DimensionMismatch {
            context: "weights length vs component count",
            expected: k,
            got: weights.len(),
        });
    }
    for (j, w) in weights.iter().enumerate() {
        if !w.is_finite() || *w < F::zero() {
            return Err(Error::invalid(format!(
                "{field}: entry {j} must be finite and ≥ 0, got {w}"
            )));
        }
    }
    let sum: F = weights.iter().copied().sum();
    let tol = tol.max(F::epsilon() * F::real(16.0) * F::from_usize(k).unwrap());
    if (sum - F::one()).abs() > tol {
        return Err(Error::invalid(format!("{field}: must sum to 1, got {sum}")));
    }
    Ok(())
}

/// Pairwise distances R_ij and the weight-imbalance quantities.
///
/// k = 1 yields the +inf separation sentinel (single-component runs are
/// legitimate OLS sanity cases). Zero weights are rejected because ρ_π is
/// then undefined.
pub fn separation_stats<F: Scalar>(params: &MixtureParams<F>) -> Result<SeparationStats<F>> {
    let k = params.k();
    for (j, w) in params.weights().iter().enumerate() {
        if !(*w > F::zero()) {
            return Err(Error::invalid(format!(
                "weights: entry {j} is 0, rho_pi undefined"
            )));
        }
    }
    let mut pairwise = vec![vec![F::zero(); k]; k];
    let mut r_min = F::infinity();
    let mut r_max = F::infinity();
    if k > 1 {
        r_max = F::zero();
        for i in 0..k {
            for j in i + 1..k {
                let r = dist(params.beta(i), params.beta(j));
                pairwise[i][j] = r;
                pairwise[j][i] = r;
                if r < r_min {
                    r_min = r;
                }
                if r > r_max {
                    r_max = r;
                }
            }
        }
    }
    let mut w_min = params.weight(0);
    let mut w_max = params.weight(0);
    for w in params.weights() {
        w_min = w_min.min(*w);
        w_max = w_max.max(*w);
    }
    Ok(SeparationStats {
        r_min,
        r_max,
        rho_pi: w_max / w_min,
        pi_min: w_min,
        pairwise,
    })
}

/// Evaluates the three local-convergence hypotheses for a concrete pair:
/// SNR above C·kρ_π·log²(kρ_π), matched initialization radius within
/// c·SNR/(kρ_π·log k), and every initial weight within half its target.
/// Logs are natural. The β clauses use the permutation found by
/// [`matched_error`], since component labels are not identifiable.
pub fn check_local_conditions<F: Scalar>(
    truth: &MixtureParams<F>,
    init: &EMState<F>,
    constants: &ConditionConstants<F>,
) -> Result<ConditionReport<F>> {
    if init.k() != truth.k() {
        return Err(Error::DimensionMismatch {
            context: "component count, init vs truth",
            expected: truth.k(),
            got: init.k(),
        });
    }
    if init.dim() != truth.dim() {
        return Err(Error::DimensionMismatch {
            context: "beta dimension, init vs truth",
            expected: truth.dim(),
            got: init.dim(),
        });
    }
    let stats = separation_stats(truth)?;
    let sigma = truth.noise_sigma();
    let kf = F::from_usize(truth.k()).unwrap();
    let krho = kf * stats.rho_pi;
    let log_krho = krho.ln();
    let snr_threshold = constants.c_snr * krho * log_krho * log_krho;
    let matched = matched_error(init, truth)?;
    let (snr, init_beta_radius, init_beta_bound) = if sigma > F::zero() {
        let snr = stats.r_min / sigma;
        let bound = constants.c_radius * snr / (krho * kf.ln());
        (snr, matched.max_beta_err / sigma, bound)
    } else {
        (F::infinity(), matched.max_beta_err, F::infinity())
    };
    let mut init_weight_ok = true;
    for j in 0..truth.k() {
        let target = truth.weight(j);
        let got = init.weight(matched.permutation[j]);
        if (got - target).abs() > target / F::real(2.0) {
            init_weight_ok = false;
        }
    }
    let satisfied = snr >= snr_threshold && init_beta_radius <= init_beta_bound && init_weight_ok;
    Ok(ConditionReport {
        snr,
        snr_threshold,
        init_beta_radius,
        init_beta_bound,
        init_weight_ok,
        satisfied,
        constants_used: *constants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(betas: Vec<Vec<f64>>, weights: Vec<f64>, sigma: f64) -> MixtureParams<f64> {
        MixtureParams::new(betas, weights, sigma).unwrap()
    }

    #[test]
    fn orthonormal_pair_separation() {
        let p = params(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.5, 0.5],
            0.1,
        );
        let s = separation_stats(&p).unwrap();
        assert!((s.r_min - 2f64.sqrt()).abs() < 1e-15);
        assert!((s.r_max - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.rho_pi, 1.0);
        assert_eq!(s.pi_min, 0.5);
    }

    #[test]
    fn identical_betas_report_zero_not_error() {
        let v = vec![0.3, -0.7];
        let p = params(vec![v.clone(), v], vec![0.5, 0.5], 0.0);
        let s = separation_stats(&p).unwrap();
        assert_eq!(s.r_min, 0.0);
    }

    #[test]
    fn hand_computed_three_component_distances() {
        let p = params(
            vec![vec![3.0, 0.0], vec![0.0, 4.0], vec![0.0, 0.0]],
            vec![0.5, 0.3, 0.2],
            1.0,
        );
        let s = separation_stats(&p).unwrap();
        assert_eq!(s.pairwise[0][1], 5.0);
        assert_eq!(s.pairwise[0][2], 3.0);
        assert_eq!(s.pairwise[1][2], 4.0);
        assert_eq!(s.r_min, 3.0);
        assert_eq!(s.r_max, 5.0);
        assert!((s.rho_pi - 2.5).abs() < 1e-15);
        for i in 0..3 {
            assert_eq!(s.pairwise[i][i], 0.0);
            for j in 0..3 {
                assert_eq!(s.pairwise[i][j], s.pairwise[j][i]);
            }
        }
    }

    #[test]
    fn zero_weight_rejected_by_separation() {
        let p = MixtureParams {
            betas: vec![vec![1.0], vec![2.0]],
            weights: vec![1.0, 0.0],
            noise_sigma: 0.1,
        };
        assert!(separation_stats(&p).is_err());
    }

    #[test]
    fn single_component_sentinels() {
        let p = params(vec![vec![2.0, 2.0]], vec![1.0], 0.5);
        let s = separation_stats(&p).unwrap();
        assert!(s.r_min.is_infinite() && s.r_max.is_infinite());
        assert_eq!(s.rho_pi, 1.0);
        assert_eq!(s.pairwise, vec![vec![0.0]]);
    }

    #[test]
    fn scaling_betas_scales_separation_linearly() {
        let p = params(
            vec![vec![3.0, 0.0], vec![0.0, 4.0], vec![0.0, 0.0]],
            vec![0.5, 0.3, 0.2],
            1.0,
        );
        let scaled = p.with_scaled_betas(7.0).unwrap();
        let a = separation_stats(&p).unwrap();
        let b = separation_stats(&scaled).unwrap();
        assert!((b.r_min - 7.0 * a.r_min).abs() < 1e-12);
        assert!((b.r_max - 7.0 * a.r_max).abs() < 1e-12);
        assert_eq!(a.rho_pi, b.rho_pi);
    }

    #[test]
    fn exact_init_with_zero_noise_satisfies_conditions() {
        let p = params(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.5, 0.5],
            0.0,
        );
        let init = EMState::from_params(&p);
        let r = check_local_conditions(&p, &init, &ConditionConstants::default()).unwrap();
        assert!(r.snr.is_infinite());
        assert_eq!(r.init_beta_radius, 0.0);
        assert!(r.init_beta_bound.is_infinite());
        assert!(r.init_weight_ok);
        assert!(r.satisfied);
    }

    #[test]
    fn low_snr_fails_threshold_clause() {
        // k = 3 balanced with R_min/σ = 1: threshold C·3·ln²3 ≈ 3.62 > 1.
        let p = MixtureParams::orthogonal_scaled(
            3,
            3,
            1.0 / 2f64.sqrt(),
            MixtureParams::balanced_weights(3),
            1.0,
        )
        .unwrap();
        let init = EMState::from_params(&p);
        let r = check_local_conditions(&p, &init, &ConditionConstants::default()).unwrap();
        assert!((r.snr - 1.0).abs() < 1e-12);
        assert!((r.snr_threshold - 3.0 * 3f64.ln().powi(2)).abs() < 1e-12);
        assert!(!r.satisfied);
    }

    #[test]
    fn hand_evaluated_threshold_and_bound() {
        // R_min = 10, σ = 0.1, k = 3 balanced, C = 1, c = 0.5, radius 0.2.
        let scale = 10.0 / 2f64.sqrt();
        let p = MixtureParams::orthogonal_scaled(
            3,
            3,
            scale,
            MixtureParams::balanced_weights(3),
            0.1,
        )
        .unwrap();
        let mut betas: Vec<Vec<f64>> = p.betas().to_vec();
        betas[0][2] += 0.2; // exact orthogonal offset of norm 0.2
        let init = EMState::new(betas, p.weights().to_vec()).unwrap();
        let r = check_local_conditions(&p, &init, &ConditionConstants::default()).unwrap();
        assert!((r.snr - 100.0).abs() < 1e-9);
        assert!((r.snr_threshold - 3.6208).abs() < 1e-3);
        assert!((r.init_beta_bound - 15.1707).abs() < 1e-3);
        assert!((r.init_beta_radius - 2.0).abs() < 1e-9); // 0.2/σ
        assert!(r.init_weight_ok);
        assert!(r.satisfied);
    }

    #[test]
    fn satisfied_is_monotone_in_sigma() {
        let scale = 10.0 / 2f64.sqrt();
        let weights = MixtureParams::balanced_weights(3);
        let mut prev_satisfied = false;
        // Decreasing σ never flips satisfied from true back to false.
        for sigma in [2.0, 1.0, 0.5, 0.1, 0.01] {
            let p =
                MixtureParams::orthogonal_scaled(3, 3, scale, weights.clone(), sigma).unwrap();
            let init = EMState::from_params(&p);
            let r = check_local_conditions(&p, &init, &ConditionConstants::default()).unwrap();
            if prev_satisfied {
                assert!(r.satisfied, "satisfied flipped back at sigma {sigma}");
            }
            prev_satisfied = r.satisfied;
        }
        assert!(prev_satisfied);
    }

    #[test]
    fn json_schema_uses_pinned_keys() {
        let p = params(vec![vec![1.0, 2.0]], vec![1.0], 0.25);
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(v["betas"][0][1], 2.0);
        assert_eq!(v["weights"][0], 1.0);
        assert_eq!(v["sigma"], 0.25);
        let back: MixtureParams<f64> = serde_json::from_value(v).unwrap();
        back.validate().unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn invalid_weights_rejected() {
        assert!(MixtureParams::new(vec![vec![1.0]], vec![0.9], 0.1).is_err());
        assert!(MixtureParams::new(vec![vec![1.0]], vec![-1.0, 2.0], 0.1).is_err());
        assert!(MixtureParams::new(vec![vec![1.0], vec![1.0, 2.0]], vec![0.5, 0.5], 0.1).is_err());
        assert!(MixtureParams::new(vec![vec![1.0]], vec![1.0], -0.1).is_err());
        assert!(MixtureParams::new(vec![vec![f64::NAN]], vec![1.0], 0.1).is_err());
    }

    #[test]
    fn condition_report_serializes_infinities() {
        let p = params(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.5, 0.5], 0.0);
        let init = EMState::from_params(&p);
        let r = check_local_conditions(&p, &init, &ConditionConstants::default()).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"snr\":\"inf\""));
        let back: ConditionReport<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn f32_balanced_weights_pass_validation() {
        let w = MixtureParams::<f32>::balanced_weights(3);
        MixtureParams::<f32>::orthogonal_scaled(3, 4, 1.0, w, 0.5).unwrap();
    }
}
