//! Reproducible sampling from factorized models.
//!
//! Randomness is organized as counter-based streams: a `(base_seed,
//! stream_index)` pair fully determines a sample, so replicate-level
//! parallelism cannot change results and independence between stages is
//! enforced structurally by handing out disjoint stream ranges.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::field_models::{FieldModel, Representation};
use crate::linalg::{dense_cholesky_with_jitter, BandedCholesky};

/// Default cap on the size of models factorized through the dense path.
pub const DEFAULT_DENSE_CAP: usize = 8192;

/// Identifier of one random stream: `(base_seed, stream_index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub base_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(base_seed: u64, stream_index: u64) -> Self {
        RngStream { base_seed, stream_index }
    }

    /// The stream `offset` places further along the same base seed.
    pub fn offset(&self, offset: u64) -> Self {
        RngStream {
            base_seed: self.base_seed,
            stream_index: self.stream_index + offset,
        }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.base_seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// Draw `len` standard normals from the start of the stream.
    pub fn standard_normals(&self, len: usize) -> Vec<f64> {
        let mut rng = self.rng();
        (0..len).map(|_| rng.sample(StandardNormal)).collect()
    }
}

/// One realization of the field, tagged with the stream that produced it.
#[derive(Debug, Clone)]
pub struct FieldSample {
    values: Vec<f64>,
    stream: RngStream,
    model_id: u64,
}

impl FieldSample {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.stream.base_seed
    }

    pub fn stream(&self) -> RngStream {
        self.stream
    }

    pub fn model_id(&self) -> u64 {
        self.model_id
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Supremum over a subset of indices (caller guarantees validity).
    pub fn max_over(&self, subset: &[usize]) -> f64 {
        subset
            .iter()
            .map(|&i| self.values[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Assemble a sample from raw parts (test/oracle use).
    pub fn from_parts(values: Vec<f64>, stream: RngStream, model_id: u64) -> Self {
        FieldSample { values, stream, model_id }
    }
}

#[derive(Debug)]
enum FactorKind {
    /// Lower-triangular Cholesky factor of a dense covariance.
    DenseChol(DMatrix<f64>),
    /// Stored factor A with Σ = A·Aᵀ; white noise has dimension k.
    StoredFactor(Arc<DMatrix<f64>>),
    /// Banded Cholesky of the precision matrix; sampling solves Lᵀx = z.
    PrecisionChol { chol: Arc<BandedCholesky>, scale: f64 },
}

/// Immutable factorized form of a model, ready for repeated sampling.
#[derive(Debug)]
pub struct SamplerKernel {
    model_id: u64,
    size: usize,
    sigma_max_sq: f64,
    factor: FactorKind,
    jitter_used: f64,
}

impl SamplerKernel {
    pub fn model_id(&self) -> u64 {
        self.model_id
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn sigma_max_sq(&self) -> f64 {
        self.sigma_max_sq
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    /// Number of white-noise inputs consumed per sample.
    pub fn noise_dim(&self) -> usize {
        match &self.factor {
            FactorKind::DenseChol(l) => l.nrows(),
            FactorKind::StoredFactor(a) => a.ncols(),
            FactorKind::PrecisionChol { chol, .. } => chol.n(),
        }
    }

    /// Draw one realization. Identical `(kernel, stream)` pairs reproduce
    /// bit-identical samples.
    pub fn sample(&self, stream: RngStream) -> FieldSample {
        let z = stream.standard_normals(self.noise_dim());
        let values = match &self.factor {
            FactorKind::DenseChol(l) => {
                let x = l * DVector::from_vec(z);
                x.data.into()
            }
            FactorKind::StoredFactor(a) => {
                let x = a.as_ref() * DVector::from_vec(z);
                x.data.into()
            }
            FactorKind::PrecisionChol { chol, scale } => {
                let mut x = z;
                chol.solve_upper(&mut x);
                for v in &mut x {
                    *v *= scale;
                }
                x
            }
        };
        FieldSample {
            values,
            stream,
            model_id: self.model_id,
        }
    }
}

/// Factorize a model with the default dense-size cap.
pub fn factorize(model: &FieldModel) -> Result<SamplerKernel> {
    factorize_with(model, DEFAULT_DENSE_CAP)
}

/// Factorize with an explicit dense-size cap. Dense covariances go through
/// Cholesky with the diagonal jitter escalation schedule; factor models pass
/// through; precision models reuse their banded factor.
pub fn factorize_with(model: &FieldModel, dense_cap: usize) -> Result<SamplerKernel> {
    let factor = match &model.rep {
        Representation::Dense(m) => {
            if model.size() > dense_cap {
                return Err(Error::Capacity {
                    what: "dense factorization size".into(),
                    requested: model.size(),
                    cap: dense_cap,
                });
            }
            let (l, jitter) = dense_cholesky_with_jitter(m, model.sigma_max_sq().max(1e-300))?;
            return Ok(SamplerKernel {
                model_id: model.id(),
                size: model.size(),
                sigma_max_sq: model.sigma_max_sq(),
                factor: FactorKind::DenseChol(l),
                jitter_used: jitter,
            });
        }
        Representation::Factor(a) => FactorKind::StoredFactor(Arc::clone(a)),
        Representation::Precision(p) => FactorKind::PrecisionChol {
            chol: Arc::clone(&p.chol),
            scale: p.scale,
        },
    };
    Ok(SamplerKernel {
        model_id: model.id(),
        size: model.size(),
        sigma_max_sq: model.sigma_max_sq(),
        factor,
        jitter_used: 0.0,
    })
}

/// Pointwise two-copy mixture γ·η̄ + √(1−γ²)·η̃, the sampling form of the
/// identity-in-law decomposition. The two inputs must come from the same
/// model and from distinct streams.
pub fn decompose_sample(gamma: f64, bar: &FieldSample, tilde: &FieldSample) -> Result<FieldSample> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma must lie in [0,1], got {gamma}")));
    }
    if bar.model_id != tilde.model_id {
        return Err(Error::invalid(
            "mixture inputs must be samples of the same model",
        ));
    }
    if bar.len() != tilde.len() {
        return Err(Error::invalid("mixture inputs must have equal lengths"));
    }
    if bar.stream == tilde.stream {
        return Err(Error::IndependenceViolation(format!(
            "mixture inputs share stream ({}, {})",
            bar.stream.base_seed, bar.stream.stream_index
        )));
    }
    let comp = (1.0 - gamma * gamma).sqrt();
    let values = bar
        .values
        .iter()
        .zip(tilde.values.iter())
        .map(|(b, t)| gamma * b + comp * t)
        .collect();
    Ok(FieldSample {
        values,
        stream: bar.stream,
        model_id: bar.model_id,
    })
}

/// Unbiased sample covariance (divisor `replicates − 1`).
pub fn empirical_covariance(samples: &[FieldSample]) -> Result<DMatrix<f64>> {
    if samples.len() < 2 {
        return Err(Error::invalid(
            "empirical covariance needs at least 2 samples",
        ));
    }
    let n = samples[0].len();
    if samples.iter().any(|s| s.len() != n) {
        return Err(Error::invalid("samples must have equal lengths"));
    }
    let r = samples.len() as f64;
    let mut mean = vec![0.0; n];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s.values.iter()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= r;
    }
    let mut cov = DMatrix::<f64>::zeros(n, n);
    for s in samples {
        for i in 0..n {
            let di = s.values[i] - mean[i];
            for j in i..n {
                cov[(i, j)] += di * (s.values[j] - mean[j]);
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            let v = cov[(i, j)] / (r - 1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(cov)
}
