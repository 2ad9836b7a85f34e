//! Scenario documents: the single declarative JSON input every
//! subcommand consumes. Parsing is strict (unknown fields are rejected)
//! and resolution expands all defaults so summaries can embed the exact
//! configuration that ran.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use mlrem::em_core::WeightMode;
use mlrem::init::InitKind;
use mlrem::model::MixtureParams;
use mlrem::{EMConfig64, InitSpec64, MixtureParams64};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    EmSplit,
    EmPooled,
    Am,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::EmSplit => "em-split",
            Estimator::EmPooled => "em-pooled",
            Estimator::Am => "am",
        }
    }

    /// Report ordering: EM variants before the baseline.
    pub fn rank(self) -> u8 {
        match self {
            Estimator::EmSplit => 0,
            Estimator::EmPooled => 1,
            Estimator::Am => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    N,
    Sigma,
    BetaScale,
    InitRadius,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::N => "n",
            SweepAxis::Sigma => "sigma",
            SweepAxis::BetaScale => "beta_scale",
            SweepAxis::InitRadius => "init_radius",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// Truth block: either a full explicit mixture or a generator spec.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum TruthSpec {
    Explicit(MixtureParams64),
    Generated(GeneratedTruth),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratedTruth {
    pub k: usize,
    pub d: usize,
    pub betas: BetaGen,
    pub weights: WeightGen,
    pub sigma: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub enum BetaGen {
    /// β_j = r·e_j on the first k canonical directions.
    #[serde(rename = "orthogonal-scaled")]
    OrthogonalScaled(f64),
    #[serde(rename = "explicit")]
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum WeightGen {
    Named(String),
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    pub kind: InitKind,
    #[serde(default)]
    pub beta_radius: f64,
    #[serde(default)]
    pub weight_rel_radius: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Per-field EM overrides; anything absent keeps the library default.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmSection {
    pub sigma: Option<f64>,
    pub weight_mode: Option<WeightMode>,
    pub ridge: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub min_weight_floor: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub id: String,
    pub truth: TruthSpec,
    pub init: InitSection,
    pub estimator: Estimator,
    pub n: usize,
    #[serde(rename = "T", default)]
    pub t: Option<usize>,
    pub trials: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub em: EmSection,
}

/// Scenario after defaults expansion; embedded verbatim in every
/// summary so outputs are auditable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedScenario {
    pub id: String,
    pub truth: MixtureParams64,
    pub init: InitSpec64,
    pub estimator: Estimator,
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub sweep: Option<SweepSection>,
    pub em: EMConfig64,
}

pub fn load_scenario(path: &Path, seed_override: Option<u64>) -> Result<ResolvedScenario> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let parsed: ScenarioFile = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    resolve(parsed, seed_override)
}

pub fn resolve(file: ScenarioFile, seed_override: Option<u64>) -> Result<ResolvedScenario> {
    if file.id.is_empty() {
        return Err(CliError::config("id: must be nonempty"));
    }
    if file
        .id
        .chars()
        .any(|c| !(c.is_ascii_alphanumeric() || c == '-' || c == '_'))
    {
        return Err(CliError::config(
            "id: only ASCII alphanumerics, '-' and '_' are allowed (used as a directory name)",
        ));
    }
    let base_seed = seed_override.unwrap_or(file.base_seed);
    let truth = resolve_truth(file.truth)?;
    let k = truth.k();
    if file.n == 0 {
        return Err(CliError::config("n: must be ≥ 1"));
    }
    if file.trials == 0 {
        return Err(CliError::config("trials: must be ≥ 1"));
    }
    let t = match (file.estimator, file.t) {
        (Estimator::EmSplit, None) => {
            return Err(CliError::config("T: required when estimator is em-split"))
        }
        (_, Some(0)) => return Err(CliError::config("T: must be ≥ 1")),
        (_, Some(t)) => t,
        (_, None) => 1,
    };
    if file.estimator == Estimator::EmSplit && t > file.n {
        return Err(CliError::config(format!(
            "T: {t} exceeds n = {} (need at least one sample per batch)",
            file.n
        )));
    }
    let init = resolve_init(&file.init, base_seed)?;
    if init.kind == InitKind::Random && file.n < k * truth.dim() {
        return Err(CliError::config(format!(
            "n: random init needs n ≥ k·d = {}, got {}",
            k * truth.dim(),
            file.n
        )));
    }
    if let Some(sweep) = &file.sweep {
        validate_sweep(sweep, t)?;
    }
    let em = resolve_em(&file.em, &truth, k)?;
    Ok(ResolvedScenario {
        id: file.id,
        truth,
        init,
        estimator: file.estimator,
        n: file.n,
        t,
        trials: file.trials,
        base_seed,
        sweep: file.sweep,
        em,
    })
}

fn resolve_truth(spec: TruthSpec) -> Result<MixtureParams64> {
    match spec {
        TruthSpec::Explicit(p) => {
            p.validate()
                .map_err(|e| CliError::config(format!("truth: {e}")))?;
            Ok(p)
        }
        TruthSpec::Generated(g) => {
            let weights = match g.weights {
                WeightGen::Named(name) if name == "balanced" => {
                    MixtureParams::balanced_weights(g.k)
                }
                WeightGen::Named(name) => {
                    return Err(CliError::config(format!(
                        "truth.weights: unknown generator {name:?} (expected \"balanced\" or a list)"
                    )))
                }
                WeightGen::Explicit(w) => w,
            };
            match g.betas {
                BetaGen::OrthogonalScaled(r) => {
                    MixtureParams::orthogonal_scaled(g.k, g.d, r, weights, g.sigma)
                        .map_err(|e| CliError::config(format!("truth: {e}")))
                }
                BetaGen::Explicit(betas) => {
                    if betas.len() != g.k || betas.iter().any(|b| b.len() != g.d) {
                        return Err(CliError::config(format!(
                            "truth.betas: expected {} rows of length {}",
                            g.k, g.d
                        )));
                    }
                    MixtureParams::new(betas, weights, g.sigma)
                        .map_err(|e| CliError::config(format!("truth: {e}")))
                }
            }
        }
    }
}

fn resolve_init(section: &InitSection, base_seed: u64) -> Result<InitSpec64> {
    let seed = section.seed.unwrap_or(base_seed);
    let spec = match section.kind {
        InitKind::PerturbedOracle => {
            InitSpec64::perturbed_oracle(section.beta_radius, section.weight_rel_radius, seed)
        }
        InitKind::Random => {
            if section.beta_radius != 0.0 || section.weight_rel_radius != 0.0 {
                return Err(CliError::config(
                    "init.beta_radius / init.weight_rel_radius: only valid with kind perturbed-oracle",
                ));
            }
            InitSpec64::random(seed)
        }
    };
    spec.validate()
        .map_err(|e| CliError::config(format!("init: {e}")))?;
    Ok(spec)
}

fn validate_sweep(sweep: &SweepSection, t: usize) -> Result<()> {
    if sweep.values.is_empty() {
        return Err(CliError::config("sweep.values: must be nonempty"));
    }
    for v in &sweep.values {
        if !v.is_finite() || *v <= 0.0 {
            return Err(CliError::config(format!(
                "sweep.values: entries must be finite and strictly positive, got {v}"
            )));
        }
    }
    if sweep.values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::config(
            "sweep.values: must be sorted strictly ascending",
        ));
    }
    if sweep.axis == SweepAxis::N {
        for v in &sweep.values {
            if v.fract() != 0.0 || *v < t as f64 {
                return Err(CliError::config(format!(
                    "sweep.values: n values must be integers ≥ T = {t}, got {v}"
                )));
            }
        }
    }
    Ok(())
}

fn resolve_em(section: &EmSection, truth: &MixtureParams64, k: usize) -> Result<EMConfig64> {
    let mut config = EMConfig64::new(section.sigma.unwrap_or(truth.noise_sigma()));
    if let Some(m) = section.weight_mode {
        config.weight_mode = m;
    }
    if let Some(r) = section.ridge {
        config.ridge = Some(r);
    }
    if let Some(m) = section.max_iters {
        config.max_iters = m;
    }
    if let Some(t) = section.tol {
        config.tol = t;
    }
    if let Some(f) = section.min_weight_floor {
        config.min_weight_floor = f;
    }
    config
        .validate(k)
        .map_err(|e| CliError::config(format!("em: {e}")))?;
    Ok(config)
}

/// The scenario actually executed for one sweep value: the axis value is
/// substituted into truth, init, or n, and the sigma axis also retargets
/// the EM noise scale.
pub fn apply_sweep_value(base: &ResolvedScenario, axis: SweepAxis, value: f64) -> Result<ResolvedScenario> {
    let mut rs = base.clone();
    rs.sweep = None;
    match axis {
        SweepAxis::N => {
            rs.n = value as usize;
        }
        SweepAxis::Sigma => {
            rs.truth = rs
                .truth
                .with_sigma(value)
                .map_err(|e| CliError::config(format!("sweep sigma: {e}")))?;
            rs.em.sigma = value;
        }
        SweepAxis::BetaScale => {
            rs.truth = rs
                .truth
                .with_scaled_betas(value)
                .map_err(|e| CliError::config(format!("sweep beta_scale: {e}")))?;
            rs.init.beta_radius = base.init.beta_radius * value;
        }
        SweepAxis::InitRadius => {
            rs.init.beta_radius = value;
        }
    }
    Ok(rs)
}
