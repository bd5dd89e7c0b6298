//! Simulation laboratory for centered Gaussian fields on finite index sets:
//! model construction and normalization, reproducible factorized sampling,
//! Monte Carlo estimation of expected suprema with the matching closed-form
//! bounds, level-set experiments, and correlation-net valley certificates.
//!
//! The `levelset-lab` binary drives configuration-file experiments on top of
//! these modules and writes CSV rows plus a JSON summary per run.

pub mod error;
pub mod estimators;
pub mod experiments;
pub mod field_models;
pub mod level_sets;
pub mod linalg;
pub mod sampler;
pub mod stats;
pub mod valleys;

pub use error::{Error, Result};
pub use estimators::{
    analytic_g_pair, borell_tail_bound, estimate_g, estimate_g_full, expected_excess,
    extremality_ratio, gaussian_upper_tail, nondegeneracy_ratio, union_bound_g, GEstimate,
};
pub use field_models::{FieldModel, IndexSet, PointLabel};
pub use level_sets::{extract_level_set, LevelSet};
pub use sampler::{decompose_sample, empirical_covariance, factorize, FieldSample, RngStream, SamplerKernel};
pub use valleys::{build_epsilon_net, find_multiple_valleys, mixture_coefficient, verify_net};
