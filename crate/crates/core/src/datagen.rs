//! Seeded synthetic data from the mixture model, batch splitting for the
//! sample-splitting schedule, and container I/O (JSON and CSV).
//!
//! Reproducibility contract: every record gets its own ChaCha8 stream
//! derived from (seed, record index), and within a record the draw order is
//! fixed — one uniform for the label, d Gaussians for the design row, one
//! Gaussian for the noise (drawn even when σ = 0). Identical inputs give
//! bit-identical datasets on any platform or thread count.

use std::io::{BufRead, BufReader, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::model::MixtureParams;
use crate::scalar::Scalar;

/// SplitMix64-style mix of a base seed with a record index. Record i sees
/// the same stream no matter how the surrounding loop is chunked, which is
/// what keeps parallel Monte Carlo deterministic.
pub fn derive_stream_seed(seed: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(seed ^ mix(index))
}

pub(crate) struct DrawnSample<F> {
    pub label: usize,
    pub x: Vec<F>,
    /// Unit-variance noise draw; the caller applies σ.
    pub noise: F,
}

/// One record in the pinned draw order. Shared by `sample_dataset` and the
/// event diagnostics so both see the same distribution per (seed, index).
pub(crate) fn draw_sample<F: Scalar, R: Rng + ?Sized>(
    params: &MixtureParams<F>,
    rng: &mut R,
) -> DrawnSample<F> {
    let u = F::unit_uniform(rng);
    let mut label = params.k() - 1;
    let mut acc = F::zero();
    for (j, w) in params.weights().iter().enumerate() {
        acc += *w;
        if u < acc {
            label = j;
            break;
        }
    }
    let x = (0..params.dim()).map(|_| F::standard_normal(rng)).collect();
    let noise = F::standard_normal(rng);
    DrawnSample { label, x, noise }
}

/// n design rows, n responses, the hidden labels (kept for diagnostics
/// only; estimators never see them), and the generating seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<F: Scalar> {
    dim: usize,
    design: Vec<F>,
    response: Vec<F>,
    labels: Option<Vec<u32>>,
    seed: u64,
}

impl<F: Scalar> Dataset<F> {
    pub fn from_parts(
        dim: usize,
        design: Vec<F>,
        response: Vec<F>,
        labels: Option<Vec<u32>>,
        seed: u64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dataset: dimension must be ≥ 1"));
        }
        if response.is_empty() {
            return Err(Error::invalid("dataset: must contain at least one sample"));
        }
        if design.len() != response.len() * dim {
            return Err(Error::DimensionMismatch {
                context: "design size vs n·d",
                expected: response.len() * dim,
                got: design.len(),
            });
        }
        if let Some(l) = &labels {
            if l.len() != response.len() {
                return Err(Error::DimensionMismatch {
                    context: "labels length vs n",
                    expected: response.len(),
                    got: l.len(),
                });
            }
        }
        Ok(Dataset {
            dim,
            design,
            response,
            labels,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major flat design matrix.
    pub fn design(&self) -> &[F] {
        &self.design
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.design[i * self.dim..(i + 1) * self.dim]
    }

    pub fn response(&self) -> &[F] {
        &self.response
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn to_json_writer<W: Write>(&self, out: W) -> Result<()> {
        let file = DatasetFileRef {
            n: self.len(),
            d: self.dim,
            design: &self.design,
            response: &self.response,
            labels: self.labels.as_deref(),
            seed: self.seed,
        };
        serde_json::to_writer(out, &file).map_err(|e| Error::parse(e.to_string()))
    }

    pub fn from_json_reader<R: Read>(input: R) -> Result<Self> {
        let file: DatasetFileOwned<F> =
            serde_json::from_reader(input).map_err(|e| Error::parse(e.to_string()))?;
        if file.response.len() != file.n {
            return Err(Error::parse(format!(
                "dataset container: n = {} but response holds {} values",
                file.n,
                file.response.len()
            )));
        }
        Self::from_parts(file.d, file.design, file.response, file.labels, file.seed)
    }

    /// CSV with header "x0,...,x{d-1},y" plus a "label" column when labels
    /// are present. '.' decimals, LF line endings.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let mut header = String::new();
        for c in 0..self.dim {
            header.push_str(&format!("x{c},"));
        }
        header.push('y');
        if self.labels.is_some() {
            header.push_str(",label");
        }
        writeln!(out, "{header}")?;
        for i in 0..self.len() {
            for v in self.row(i) {
                write!(out, "{v},")?;
            }
            write!(out, "{}", self.response[i])?;
            if let Some(l) = &self.labels {
                write!(out, ",{}", l[i])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Reads the CSV layout written by [`write_csv`]. CSV carries no seed
    /// provenance; the result records seed 0.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut lines = BufReader::new(input).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse("csv: missing header"))??;
        let cols: Vec<&str> = header.trim_end().split(',').collect();
        let with_label = cols.last() == Some(&"label");
        let dim = cols.len() - 1 - usize::from(with_label);
        if dim == 0 {
            return Err(Error::parse("csv: no design columns"));
        }
        for (c, name) in cols.iter().take(dim).enumerate() {
            if *name != format!("x{c}") {
                return Err(Error::parse(format!(
                    "csv: expected column x{c}, found \"{name}\""
                )));
            }
        }
        if cols[dim] != "y" {
            return Err(Error::parse(format!(
                "csv: expected column y, found \"{}\"",
                cols[dim]
            )));
        }
        let mut design = Vec::new();
        let mut response = Vec::new();
        let mut labels = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim_end().split(',').collect();
            if fields.len() != cols.len() {
                return Err(Error::parse(format!(
                    "csv line {}: expected {} fields, got {}",
                    lineno + 2,
                    cols.len(),
                    fields.len()
                )));
            }
            for f in &fields[..dim] {
                design.push(parse_real::<F>(f, lineno + 2)?);
            }
            response.push(parse_real::<F>(fields[dim], lineno + 2)?);
            if with_label {
                let l: u32 = fields[dim + 1].parse().map_err(|_| {
                    Error::parse(format!("csv line {}: bad label", lineno + 2))
                })?;
                labels.push(l);
            }
        }
        Self::from_parts(dim, design, response, with_label.then_some(labels), 0)
    }
}

fn parse_real<F: Scalar>(s: &str, lineno: usize) -> Result<F> {
    s.parse::<f64>()
        .map(F::real)
        .map_err(|_| Error::parse(format!("csv line {lineno}: bad number \"{s}\"")))
}

#[derive(Serialize)]
#[serde(bound = "")]
struct DatasetFileRef<'a, F: Scalar> {
    n: usize,
    d: usize,
    design: &'a [F],
    response: &'a [F],
    labels: Option<&'a [u32]>,
    seed: u64,
}

#[derive(Deserialize)]
#[serde(bound = "")]
struct DatasetFileOwned<F: Scalar> {
    n: usize,
    d: usize,
    design: Vec<F>,
    response: Vec<F>,
    #[serde(default)]
    labels: Option<Vec<u32>>,
    seed: u64,
}

/// Draws n records: label j ~ Categorical(π), X ~ N(0, I_d),
/// y = ⟨X, β_j⟩ + σ·e. Bit-identical for identical (params, n, seed).
pub fn sample_dataset<F: Scalar>(
    params: &MixtureParams<F>,
    n: usize,
    seed: u64,
) -> Result<Dataset<F>> {
    if n == 0 {
        return Err(Error::invalid("sample_dataset: n must be ≥ 1"));
    }
    let d = params.dim();
    let sigma = params.noise_sigma();
    let mut design = Vec::with_capacity(n * d);
    let mut response = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_stream_seed(seed, i as u64));
        let s = draw_sample(params, &mut rng);
        let y = dot(&s.x, params.beta(s.label)) + sigma * s.noise;
        design.extend_from_slice(&s.x);
        response.push(y);
        labels.push(s.label as u32);
    }
    Dataset::from_parts(d, design, response, Some(labels), seed)
}

/// T disjoint contiguous batches in original order; the first n mod T
/// batches take one extra sample. Labels are sliced along; every batch
/// keeps the parent's seed as provenance.
pub fn split_batches<F: Scalar>(data: &Dataset<F>, t_batches: usize) -> Result<Vec<Dataset<F>>> {
    if t_batches == 0 {
        return Err(Error::invalid("split_batches: T must be ≥ 1"));
    }
    let n = data.len();
    if t_batches > n {
        return Err(Error::invalid(format!(
            "split_batches: T = {t_batches} exceeds n = {n}"
        )));
    }
    let base = n / t_batches;
    let extra = n % t_batches;
    let mut out = Vec::with_capacity(t_batches);
    let mut start = 0usize;
    for b in 0..t_batches {
        let size = base + usize::from(b < extra);
        let end = start + size;
        let d = data.dim;
        out.push(Dataset::from_parts(
            d,
            data.design[start * d..end * d].to_vec(),
            data.response[start..end].to_vec(),
            data.labels.as_ref().map(|l| l[start..end].to_vec()),
            data.seed,
        )?);
        start = end;
    }
    Ok(out)
}
