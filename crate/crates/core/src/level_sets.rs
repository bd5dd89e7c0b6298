//! Level sets of field samples and the two-stage experiments measuring the
//! expected supremum and the cardinality of the set of α-high points.
//!
//! Stage 0 estimates g(V) once; each outer replicate then draws one field
//! copy, thresholds it at α·ĝ(V), and (for the ratio experiment) estimates
//! g over the extracted set from fresh, independent copies. Stream ranges
//! are allocated so no stage ever reuses another stage's randomness.

use crate::error::{Error, Result};
use crate::estimators::{estimate_g, estimate_g_full, GEstimate};
use crate::field_models::FieldModel;
use crate::sampler::{factorize, FieldSample, RngStream, SamplerKernel};

/// Growth floor ĝ(V)/σ below which the non-degeneracy hypothesis is
/// considered violated at the simulated size.
pub const DEFAULT_NONDEGENERACY_FLOOR: f64 = 2.0;

/// Indices of a sample at or above a threshold, with the threshold kept.
#[derive(Debug, Clone)]
pub struct LevelSet {
    indices: Vec<usize>,
    threshold: f64,
    alpha: f64,
    source: RngStream,
}

impl LevelSet {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn source_seed(&self) -> u64 {
        self.source.base_seed
    }

    pub fn source_stream(&self) -> RngStream {
        self.source
    }
}

/// Extract {v : sample_v ≥ α·g_v}. The comparison is exact; ties at the
/// threshold are included.
pub fn extract_level_set(sample: &FieldSample, alpha: f64, g_v: f64) -> Result<LevelSet> {
    if !(g_v > 0.0) {
        return Err(Error::DegenerateModel(format!(
            "level-set threshold needs g(V) > 0, got {g_v}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    let threshold = alpha * g_v;
    let indices = sample
        .values()
        .iter()
        .enumerate()
        .filter_map(|(i, &v)| (v >= threshold).then_some(i))
        .collect();
    Ok(LevelSet {
        indices,
        threshold,
        alpha,
        source: sample.stream(),
    })
}

/// Estimate g over the level-set indices from fresh, independent copies of
/// the field. The estimation streams must be disjoint from the stream that
/// produced the level set.
pub fn conditional_g_estimate(
    kernel: &SamplerKernel,
    levelset: &LevelSet,
    replicates: usize,
    stream: RngStream,
) -> Result<GEstimate> {
    if levelset.is_empty() {
        return Err(Error::EmptyLevelSet);
    }
    let src = levelset.source;
    if src.base_seed == stream.base_seed
        && src.stream_index >= stream.stream_index
        && src.stream_index < stream.stream_index + replicates as u64
    {
        return Err(Error::IndependenceViolation(format!(
            "estimation streams [{}, {}) overlap the level set's source stream {}",
            stream.stream_index,
            stream.stream_index + replicates as u64,
            src.stream_index
        )));
    }
    estimate_g(kernel, levelset.indices(), replicates, stream)
}

/// Per-replicate outcome of the ratio experiment.
#[derive(Debug, Clone)]
pub struct RatioResult {
    pub alpha: f64,
    pub g_v_hat: GEstimate,
    /// Conditional estimate over the level set; absent when the set is empty.
    pub g_u_hat: Option<GEstimate>,
    /// g_u_hat.mean / g_v_hat.mean; absent when the set is empty.
    pub ratio: Option<f64>,
    pub levelset_size: usize,
    pub replicate_id: usize,
    /// Stream that drew the replicate's field copy.
    pub field_stream: RngStream,
    pub empty: bool,
    /// Set when the model failed the non-degeneracy floor at this size.
    pub degenerate_flag: bool,
}

/// Output of `ratio_experiment`.
#[derive(Debug, Clone)]
pub struct RatioExperiment {
    pub g_v_hat: GEstimate,
    pub degenerate: bool,
    pub results: Vec<RatioResult>,
    /// First stream index not consumed by this experiment.
    pub next_stream: u64,
}

/// Two-stage experiment behind the level-set ratio law: stage 0 estimates
/// ĝ(V); each of `outer_replicates` copies is thresholded at α·ĝ(V) and the
/// extracted set is re-measured with `inner_replicates` fresh copies.
pub fn ratio_experiment(
    model: &FieldModel,
    alpha: f64,
    outer_replicates: usize,
    inner_replicates: usize,
    stream: RngStream,
) -> Result<RatioExperiment> {
    ratio_experiment_with_floor(
        model,
        alpha,
        outer_replicates,
        inner_replicates,
        stream,
        DEFAULT_NONDEGENERACY_FLOOR,
    )
}

pub fn ratio_experiment_with_floor(
    model: &FieldModel,
    alpha: f64,
    outer_replicates: usize,
    inner_replicates: usize,
    stream: RngStream,
    nondegeneracy_floor: f64,
) -> Result<RatioExperiment> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    if outer_replicates == 0 {
        return Err(Error::invalid("outer_replicates must be >= 1"));
    }
    let kernel = factorize(model)?;
    let g_reps = inner_replicates.max(2);
    let g_v_hat = estimate_g_full(&kernel, g_reps, stream)?;
    let sigma = model.sigma_max();
    let degenerate = sigma == 0.0 || g_v_hat.mean / sigma < nondegeneracy_floor;

    let mut results = Vec::with_capacity(outer_replicates);
    let block = 1 + inner_replicates as u64;
    let base = stream.offset(g_reps as u64);
    for j in 0..outer_replicates {
        let field_stream = base.offset(j as u64 * block);
        let sample = kernel.sample(field_stream);
        let levelset = if g_v_hat.mean > 0.0 {
            extract_level_set(&sample, alpha, g_v_hat.mean)?
        } else {
            // degenerate stage 0: record everything as empty
            LevelSet {
                indices: Vec::new(),
                threshold: f64::INFINITY,
                alpha,
                source: field_stream,
            }
        };
        let (g_u_hat, ratio) = if levelset.is_empty() {
            (None, None)
        } else {
            let est = conditional_g_estimate(
                &kernel,
                &levelset,
                inner_replicates,
                field_stream.offset(1),
            )?;
            let ratio = est.mean / g_v_hat.mean;
            (Some(est), Some(ratio))
        };
        results.push(RatioResult {
            alpha,
            g_v_hat: g_v_hat.clone(),
            g_u_hat,
            ratio,
            levelset_size: levelset.len(),
            replicate_id: j,
            field_stream,
            empty: levelset.is_empty(),
            degenerate_flag: degenerate,
        });
    }
    Ok(RatioExperiment {
        g_v_hat,
        degenerate,
        results,
        next_stream: stream.stream_index + g_reps as u64 + outer_replicates as u64 * block,
    })
}

/// Per-replicate outcome of the cardinality experiment.
#[derive(Debug, Clone)]
pub struct CardinalityRow {
    pub alpha: f64,
    pub replicate_id: usize,
    pub field_stream: RngStream,
    pub levelset_size: usize,
    /// log(max(|U|, 1)) / log(|V|); 0 for empty sets.
    pub exponent: f64,
    pub empty: bool,
    pub degenerate_flag: bool,
}

#[derive(Debug, Clone)]
pub struct CardinalityExperiment {
    pub g_v_hat: GEstimate,
    pub degenerate: bool,
    pub rows: Vec<CardinalityRow>,
    pub next_stream: u64,
}

/// Level-set cardinality experiment: per replicate, |U| at threshold α·ĝ(V)
/// and the exponent log|U|/log|V|. `g_replicates` sets the stage-0 depth.
pub fn cardinality_experiment(
    model: &FieldModel,
    alpha: f64,
    replicates: usize,
    g_replicates: usize,
    stream: RngStream,
) -> Result<CardinalityExperiment> {
    cardinality_experiment_with_floor(
        model,
        alpha,
        replicates,
        g_replicates,
        stream,
        DEFAULT_NONDEGENERACY_FLOOR,
    )
}

pub fn cardinality_experiment_with_floor(
    model: &FieldModel,
    alpha: f64,
    replicates: usize,
    g_replicates: usize,
    stream: RngStream,
    nondegeneracy_floor: f64,
) -> Result<CardinalityExperiment> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    if replicates == 0 {
        return Err(Error::invalid("replicates must be >= 1"));
    }
    let kernel = factorize(model)?;
    let g_reps = g_replicates.max(2);
    let g_v_hat = estimate_g_full(&kernel, g_reps, stream)?;
    let sigma = model.sigma_max();
    let degenerate = sigma == 0.0 || g_v_hat.mean / sigma < nondegeneracy_floor;
    let log_size = (model.size() as f64).ln();

    let base = stream.offset(g_reps as u64);
    let mut rows = Vec::with_capacity(replicates);
    for j in 0..replicates {
        let field_stream = base.offset(j as u64);
        let sample = kernel.sample(field_stream);
        let size = if g_v_hat.mean > 0.0 {
            extract_level_set(&sample, alpha, g_v_hat.mean)?.len()
        } else {
            0
        };
        let exponent = if log_size > 0.0 {
            (size.max(1) as f64).ln() / log_size
        } else {
            0.0
        };
        rows.push(CardinalityRow {
            alpha,
            replicate_id: j,
            field_stream,
            levelset_size: size,
            exponent,
            empty: size == 0,
            degenerate_flag: degenerate,
        });
    }
    Ok(CardinalityExperiment {
        g_v_hat,
        degenerate,
        rows,
        next_stream: stream.stream_index + g_reps as u64 + replicates as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_models::model_from_dense;
    use nalgebra::DMatrix;

    fn sample_of(values: Vec<f64>) -> FieldSample {
        FieldSample::from_parts(values, RngStream::new(0, 0), 1)
    }

    #[test]
    fn empty_when_max_below_threshold() {
        let s = sample_of(vec![0.1, 0.2, -0.5]);
        let ls = extract_level_set(&s, 0.5, 10.0).unwrap();
        assert!(ls.is_empty());
    }

    #[test]
    fn ties_at_threshold_are_included() {
        let s = sample_of(vec![2.5, 2.4999999, 2.5000001]);
        let ls = extract_level_set(&s, 0.5, 5.0).unwrap();
        assert_eq!(ls.indices(), &[0, 2]);
        assert_eq!(ls.threshold(), 2.5);
    }

    #[test]
    fn contract_violations() {
        let s = sample_of(vec![0.0]);
        assert!(matches!(
            extract_level_set(&s, 0.5, 0.0),
            Err(Error::DegenerateModel(_))
        ));
        assert!(matches!(
            extract_level_set(&s, 1.0, 1.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            extract_level_set(&s, 0.0, 1.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn constant_shift_grows_the_set() {
        let vals = vec![-0.3, 0.9, 1.4, 0.2];
        let s = sample_of(vals.clone());
        let shifted = sample_of(vals.iter().map(|v| v + 0.7).collect());
        let a = extract_level_set(&s, 0.5, 2.0).unwrap();
        let b = extract_level_set(&shifted, 0.5, 2.0).unwrap();
        for i in a.indices() {
            assert!(b.indices().contains(i));
        }
        assert!(b.len() >= a.len());
    }

    #[test]
    fn nesting_in_alpha_is_exact() {
        let m = FieldModel::iid(256, 1.0).unwrap();
        let k = factorize(&m).unwrap();
        let s = k.sample(RngStream::new(42, 0));
        let g_v = 3.0;
        let lo = extract_level_set(&s, 0.3, g_v).unwrap();
        let hi = extract_level_set(&s, 0.7, g_v).unwrap();
        for i in hi.indices() {
            assert!(lo.indices().contains(i), "U(0.7) must nest inside U(0.3)");
        }
    }

    #[test]
    fn near_zero_alpha_keeps_about_half_the_points() {
        let m = FieldModel::iid(1024, 1.0).unwrap();
        let k = factorize(&m).unwrap();
        let g_v = estimate_g_full(&k, 2000, RngStream::new(7, 0)).unwrap().mean;
        for j in 0..100u64 {
            let s = k.sample(RngStream::new(7, 3000 + j));
            let ls = extract_level_set(&s, 0.001, g_v).unwrap();
            let frac = ls.len() as f64 / 1024.0;
            assert!((0.4..=0.6).contains(&frac), "replicate {j}: fraction {frac}");
        }
    }

    #[test]
    fn conditional_estimate_contracts() {
        let m = FieldModel::iid(64, 1.0).unwrap();
        let k = factorize(&m).unwrap();
        let s = k.sample(RngStream::new(3, 10));
        let ls = extract_level_set(&s, 0.5, 1e9).unwrap();
        assert!(matches!(
            conditional_g_estimate(&k, &ls, 100, RngStream::new(3, 11)),
            Err(Error::EmptyLevelSet)
        ));

        let ls = extract_level_set(&s, 0.001, 1e-6).unwrap();
        assert!(!ls.is_empty());
        // overlapping stream range: [5, 105) contains the source stream 10
        assert!(matches!(
            conditional_g_estimate(&k, &ls, 100, RngStream::new(3, 5)),
            Err(Error::IndependenceViolation(_))
        ));
        // disjoint range or different base seed is fine
        assert!(conditional_g_estimate(&k, &ls, 100, RngStream::new(3, 11)).is_ok());
        assert!(conditional_g_estimate(&k, &ls, 100, RngStream::new(4, 5)).is_ok());
    }

    #[test]
    fn conditional_estimate_oracles() {
        let m = FieldModel::iid(1024, 1.0).unwrap();
        let k = factorize(&m).unwrap();
        let g_v = estimate_g_full(&k, 2000, RngStream::new(15, 0)).unwrap();

        // a singleton level set estimates ~0
        let s = k.sample(RngStream::new(15, 5000));
        let mut one = extract_level_set(&s, 0.001, 1e-6).unwrap();
        one.indices.truncate(1);
        let g1 = conditional_g_estimate(&k, &one, 20_000, RngStream::new(15, 6000)).unwrap();
        assert!(g1.mean.abs() < 4.0 * g1.stderr);

        // the full index set reproduces the unconditional estimate
        let full = LevelSet {
            indices: (0..1024).collect(),
            threshold: f64::NEG_INFINITY,
            alpha: 0.5,
            source: RngStream::new(15, 5001),
        };
        let gf = conditional_g_estimate(&k, &full, 2000, RngStream::new(15, 30_000)).unwrap();
        let joint = (gf.stderr * gf.stderr + g_v.stderr * g_v.stderr).sqrt();
        assert!((gf.mean - g_v.mean).abs() < 4.0 * joint);
    }

    #[test]
    fn ratio_experiment_on_iid_is_sane_and_deterministic() {
        let m = FieldModel::iid(1024, 1.0).unwrap();
        let run1 = ratio_experiment(&m, 0.5, 20, 200, RngStream::new(77, 0)).unwrap();
        let run2 = ratio_experiment(&m, 0.5, 20, 200, RngStream::new(77, 0)).unwrap();
        assert!(!run1.degenerate);
        assert_eq!(run1.results.len(), 20);
        for (a, b) in run1.results.iter().zip(run2.results.iter()) {
            assert_eq!(a.ratio.map(f64::to_bits), b.ratio.map(f64::to_bits));
            assert_eq!(a.levelset_size, b.levelset_size);
        }
        for r in &run1.results {
            assert!(!r.empty, "iid at alpha 0.5 should have nonempty level sets");
            let ratio = r.ratio.unwrap();
            let g_u = r.g_u_hat.as_ref().unwrap();
            // conditional estimate sits strictly below the unconditional one
            assert!(g_u.mean < run1.g_v_hat.mean, "replicate {}", r.replicate_id);
            let combined = (g_u.stderr.powi(2) + run1.g_v_hat.stderr.powi(2)).sqrt();
            assert!(ratio >= 0.0 && ratio <= 1.0 + 4.0 * combined / run1.g_v_hat.mean);
        }
    }

    #[test]
    fn fully_correlated_pair_is_flagged_degenerate() {
        let m = model_from_dense(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])).unwrap();
        let run = ratio_experiment(&m, 0.5, 5, 50, RngStream::new(1, 0)).unwrap();
        assert!(run.degenerate);
        assert!(run.results.iter().all(|r| r.degenerate_flag));
    }

    #[test]
    fn cardinality_rows_and_nesting() {
        let m = FieldModel::iid(1024, 1.0).unwrap();
        // paired seeds: same stream, increasing alpha => exponents decrease
        let a3 = cardinality_experiment(&m, 0.3, 50, 400, RngStream::new(9, 0)).unwrap();
        let a5 = cardinality_experiment(&m, 0.5, 50, 400, RngStream::new(9, 0)).unwrap();
        let a7 = cardinality_experiment(&m, 0.7, 50, 400, RngStream::new(9, 0)).unwrap();
        for i in 0..50 {
            assert!(a3.rows[i].levelset_size >= a5.rows[i].levelset_size);
            assert!(a5.rows[i].levelset_size >= a7.rows[i].levelset_size);
            assert!(a3.rows[i].exponent >= a5.rows[i].exponent);
            assert!(a5.rows[i].exponent >= a7.rows[i].exponent);
        }
        // empty sets report exponent 0 with the flag set
        for rows in [&a3.rows, &a5.rows, &a7.rows] {
            for r in rows.iter().filter(|r| r.empty) {
                assert_eq!(r.exponent, 0.0);
            }
        }
    }
}
