//! Initialization strategies. The convergence theory assumes a warm start
//! inside a basin around the truth; `perturbed_init` realizes exactly that
//! hypothesis, while `random_init` is the unassisted baseline.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::{derive_stream_seed, Dataset};
use crate::em_core::EMState;
use crate::error::{Error, Result};
use crate::linalg::ols_on_rows;
use crate::model::MixtureParams;
use crate::scalar::Scalar;

/// Index offset separating the per-component β streams from the weight
/// streams within one init seed.
const WEIGHT_STREAM_OFFSET: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    PerturbedOracle,
    Random,
}

/// How to build the starting state. `beta_radius` and `weight_rel_radius`
/// apply to the perturbed-oracle kind only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct InitSpec<F: Scalar> {
    pub kind: InitKind,
    pub beta_radius: F,
    pub weight_rel_radius: F,
    pub seed: u64,
}

impl<F: Scalar> InitSpec<F> {
    pub fn perturbed_oracle(beta_radius: F, weight_rel_radius: F, seed: u64) -> Self {
        InitSpec {
            kind: InitKind::PerturbedOracle,
            beta_radius,
            weight_rel_radius,
            seed,
        }
    }

    pub fn random(seed: u64) -> Self {
        InitSpec {
            kind: InitKind::Random,
            beta_radius: F::zero(),
            weight_rel_radius: F::zero(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.beta_radius.is_finite() || self.beta_radius < F::zero() {
            return Err(Error::invalid(format!(
                "beta_radius: must be finite and ≥ 0, got {}",
                self.beta_radius
            )));
        }
        if !self.weight_rel_radius.is_finite()
            || self.weight_rel_radius < F::zero()
            || self.weight_rel_radius > F::real(0.5)
        {
            return Err(Error::invalid(format!(
                "weight_rel_radius: must lie in [0, 0.5], got {}",
                self.weight_rel_radius
            )));
        }
        Ok(())
    }
}

/// β_j⁰ = β_j* + radius·u_j with u_j uniform on the unit sphere, so every
/// component starts at exactly the requested distance; π_j⁰ multiplies
/// π_j* by (1 + ε_j), ε_j uniform in ±weight_rel_radius, then renormalizes
/// (which can stretch the relative error to at most 0.6·π_j* at the 0.5
/// cap). Zero radii reproduce the truth bit-for-bit.
pub fn perturbed_init<F: Scalar>(
    truth: &MixtureParams<F>,
    spec: &InitSpec<F>,
) -> Result<EMState<F>> {
    if spec.kind != InitKind::PerturbedOracle {
        return Err(Error::invalid(
            "perturbed_init requires kind = perturbed-oracle",
        ));
    }
    spec.validate()?;
    let k = truth.k();
    let d = truth.dim();
    let mut betas = Vec::with_capacity(k);
    for j in 0..k {
        let mut b = truth.beta(j).to_vec();
        if spec.beta_radius > F::zero() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_stream_seed(spec.seed, j as u64));
            let dir = loop {
                let g: Vec<F> = (0..d).map(|_| F::standard_normal(&mut rng)).collect();
                let norm = crate::linalg::norm(&g);
                if norm > F::zero() {
                    break g.into_iter().map(|v| v / norm).collect::<Vec<F>>();
                }
            };
            for (bv, u) in b.iter_mut().zip(&dir) {
                *bv += spec.beta_radius * *u;
            }
        }
        betas.push(b);
    }
    let mut weights = truth.weights().to_vec();
    if spec.weight_rel_radius > F::zero() {
        for (j, w) in weights.iter_mut().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_stream_seed(
                spec.seed,
                WEIGHT_STREAM_OFFSET + j as u64,
            ));
            let u = F::unit_uniform(&mut rng);
            let eps = (F::real(2.0) * u - F::one()) * spec.weight_rel_radius;
            *w = *w * (F::one() + eps);
        }
        let sum: F = weights.iter().copied().sum();
        for w in weights.iter_mut() {
            *w /= sum;
        }
    }
    EMState::new(betas, weights)
}

/// Unassisted start: shuffle the samples into k groups (first n mod k
/// groups one larger), fit ridge OLS (ridge 1e-8) per group, set π uniform.
/// The noise level is accepted for interface parity with warm-start
/// strategies and does not influence the current construction.
pub fn random_init<F: Scalar>(
    data: &Dataset<F>,
    k: usize,
    sigma: F,
    seed: u64,
) -> Result<EMState<F>> {
    let _ = sigma;
    if k == 0 {
        return Err(Error::invalid("random_init: k must be ≥ 1"));
    }
    let n = data.len();
    let d = data.dim();
    if n < k * d {
        return Err(Error::invalid(format!(
            "random_init: needs n ≥ k·d, got n = {n}, k·d = {}",
            k * d
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let base = n / k;
    let extra = n % k;
    let ridge = F::real(1e-8);
    let mut betas = Vec::with_capacity(k);
    let mut start = 0usize;
    for g in 0..k {
        let size = base + usize::from(g < extra);
        let rows = &idx[start..start + size];
        start += size;
        let fit = ols_on_rows(data.design(), d, data.response(), rows, ridge)
            .ok_or_else(|| Error::invalid("random_init: singular group fit"))?;
        betas.push(fit.solution);
    }
    EMState::new(betas, MixtureParams::<F>::balanced_weights(k))
}
