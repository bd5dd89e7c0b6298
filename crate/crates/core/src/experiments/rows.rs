//! CSV row types and deterministic formatting.
//!
//! Floats are written with 17 significant digits so re-runs are
//! byte-comparable; every row carries the `base_seed:stream_index` pair that
//! produced it, enough to regenerate the row in isolation.

use crate::level_sets::{CardinalityRow, RatioResult};
use crate::sampler::RngStream;

/// 17-significant-digit float form used in every CSV cell.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub fn fmt_bool(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn fmt_stream(s: RngStream) -> String {
    format!("{}:{}", s.base_seed, s.stream_index)
}

pub const RATIO_HEADER: &str = "experiment,model,size,alpha,replicate_id,seed,g_v_hat,g_v_stderr,levelset_size,g_u_hat,g_u_stderr,ratio,empty_flag";

pub const CARDINALITY_HEADER: &str =
    "experiment,model,size,alpha,replicate_id,seed,levelset_size,exponent,empty_flag";

pub const VALLEYS_HEADER: &str = "experiment,model,size,epsilon,delta,replicate_id,seed,pool_size,net_size,growth_exponent,cond_a,cond_b,cond_c";

pub const ESTIMATE_G_HEADER: &str =
    "experiment,model,size,subset_size,replicates,seed,mean,stderr,borell_halfwidth";

pub const EXTREMALITY_HEADER: &str =
    "experiment,model,size,replicates,seed,g_hat,g_stderr,extremality_ratio,nondegeneracy_ratio";

pub const CONCENTRATION_HEADER: &str =
    "experiment,model,size,z_multiplier,z,replicates,seed,empirical_freq,bound,binomial_sd";

pub fn ratio_csv_row(model: &str, size: usize, r: &RatioResult) -> String {
    let (g_u, g_u_se, ratio) = match (&r.g_u_hat, r.ratio) {
        (Some(est), Some(ratio)) => (est.mean, est.stderr, ratio),
        _ => (f64::NAN, f64::NAN, f64::NAN),
    };
    format!(
        "ratio,{model},{size},{},{},{},{},{},{},{},{},{},{}",
        fmt_f64(r.alpha),
        r.replicate_id,
        fmt_stream(r.field_stream),
        fmt_f64(r.g_v_hat.mean),
        fmt_f64(r.g_v_hat.stderr),
        r.levelset_size,
        fmt_f64(g_u),
        fmt_f64(g_u_se),
        fmt_f64(ratio),
        fmt_bool(r.empty),
    )
}

pub fn cardinality_csv_row(model: &str, size: usize, r: &CardinalityRow) -> String {
    format!(
        "cardinality,{model},{size},{},{},{},{},{},{}",
        fmt_f64(r.alpha),
        r.replicate_id,
        fmt_stream(r.field_stream),
        r.levelset_size,
        fmt_f64(r.exponent),
        fmt_bool(r.empty),
    )
}

/// Per-replicate valley certificate row (produced by the valleys experiment).
#[derive(Debug, Clone)]
pub struct ValleyExperimentRow {
    pub epsilon: f64,
    pub delta: f64,
    pub replicate_id: usize,
    pub field_stream: RngStream,
    pub pool_size: usize,
    pub net_size: usize,
    pub growth_exponent: f64,
    pub cond_a: bool,
    pub cond_b: bool,
    pub cond_c: bool,
}

pub fn valleys_csv_row(model: &str, size: usize, r: &ValleyExperimentRow) -> String {
    format!(
        "valleys,{model},{size},{},{},{},{},{},{},{},{},{},{}",
        fmt_f64(r.epsilon),
        fmt_f64(r.delta),
        r.replicate_id,
        fmt_stream(r.field_stream),
        r.pool_size,
        r.net_size,
        fmt_f64(r.growth_exponent),
        fmt_bool(r.cond_a),
        fmt_bool(r.cond_b),
        fmt_bool(r.cond_c),
    )
}

#[derive(Debug, Clone)]
pub struct EstimateGRow {
    pub subset_size: usize,
    pub replicates: usize,
    pub stream: RngStream,
    pub mean: f64,
    pub stderr: f64,
    pub borell_halfwidth: f64,
}

pub fn estimate_g_csv_row(model: &str, size: usize, r: &EstimateGRow) -> String {
    format!(
        "estimate-g,{model},{size},{},{},{},{},{},{}",
        r.subset_size,
        r.replicates,
        fmt_stream(r.stream),
        fmt_f64(r.mean),
        fmt_f64(r.stderr),
        fmt_f64(r.borell_halfwidth),
    )
}

#[derive(Debug, Clone)]
pub struct ExtremalityRow {
    pub replicates: usize,
    pub stream: RngStream,
    pub g_hat: f64,
    pub g_stderr: f64,
    pub extremality_ratio: f64,
    pub nondegeneracy_ratio: f64,
}

pub fn extremality_csv_row(model: &str, size: usize, r: &ExtremalityRow) -> String {
    format!(
        "extremality,{model},{size},{},{},{},{},{},{}",
        r.replicates,
        fmt_stream(r.stream),
        fmt_f64(r.g_hat),
        fmt_f64(r.g_stderr),
        fmt_f64(r.extremality_ratio),
        fmt_f64(r.nondegeneracy_ratio),
    )
}

#[derive(Debug, Clone)]
pub struct ConcentrationExperimentRow {
    pub z_multiplier: f64,
    pub z: f64,
    pub replicates: usize,
    pub stream: RngStream,
    pub empirical: f64,
    pub bound: f64,
    pub binomial_sd: f64,
}

pub fn concentration_csv_row(model: &str, size: usize, r: &ConcentrationExperimentRow) -> String {
    format!(
        "concentration,{model},{size},{},{},{},{},{},{},{}",
        fmt_f64(r.z_multiplier),
        fmt_f64(r.z),
        r.replicates,
        fmt_stream(r.stream),
        fmt_f64(r.empirical),
        fmt_f64(r.bound),
        fmt_f64(r.binomial_sd),
    )
}
