//! Configuration-driven experiment runner: builds models, dispatches the
//! named experiment across the size ladder, and writes CSV rows plus a JSON
//! summary. Output rows are a pure function of (config, crate version); the
//! manifest's timestamp and wall-clock fields are the only varying parts.

pub mod config;
pub mod rows;
pub mod summary;

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{
    concentration_check, estimate_g_full, extremality_ratio, nondegeneracy_ratio, GEstimate,
};
use crate::field_models::FieldModel;
use crate::level_sets::{cardinality_experiment_with_floor, ratio_experiment_with_floor};
use crate::sampler::{factorize, RngStream};
use crate::valleys::find_multiple_valleys;

pub use config::{parse_config, ExperimentConfig, ExperimentKind, ModelKind};
pub use rows::{
    ConcentrationExperimentRow, EstimateGRow, ExtremalityRow, ValleyExperimentRow,
};
pub use summary::{parse_csv_rows, summarize, trends, GroupSummary, SummaryInput, TrendSummary};

/// Deviation levels (in σ units) tabulated by the concentration experiment.
pub const CONCENTRATION_Z_MULTIPLIERS: [f64; 3] = [1.0, 2.0, 3.0];

/// Output of the valleys experiment on one model.
#[derive(Debug, Clone)]
pub struct ValleysExperiment {
    pub g_v_hat: GEstimate,
    pub rows: Vec<ValleyExperimentRow>,
    pub next_stream: u64,
}

/// Per replicate: draw a fresh field copy, pool its high points at
/// ĝ(V) − δ·n_eff, net them at ε, and record the certificate verdicts.
pub fn valleys_experiment(
    model: &FieldModel,
    epsilon: f64,
    delta: f64,
    replicates: usize,
    g_replicates: usize,
    stream: RngStream,
) -> Result<ValleysExperiment> {
    let kernel = factorize(model)?;
    let g_reps = g_replicates.max(2);
    let g_v_hat = estimate_g_full(&kernel, g_reps, stream)?;
    let base = stream.offset(g_reps as u64);
    let mut out = Vec::with_capacity(replicates);
    for j in 0..replicates {
        let field_stream = base.offset(j as u64);
        let sample = kernel.sample(field_stream);
        let report = find_multiple_valleys(model, &sample, g_v_hat.mean, delta, epsilon)?;
        out.push(ValleyExperimentRow {
            epsilon,
            delta,
            replicate_id: j,
            field_stream,
            pool_size: report.pool_size,
            net_size: report.centers.len(),
            growth_exponent: report.growth_exponent,
            cond_a: report.cond_a,
            cond_b: report.cond_b,
            cond_c: report.cond_c,
        });
    }
    Ok(ValleysExperiment {
        g_v_hat,
        rows: out,
        next_stream: stream.stream_index + g_reps as u64 + replicates as u64,
    })
}

/// Run descriptor echoed into the JSON summary.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub timestamp_unix: u64,
    pub wall_seconds: f64,
    pub row_counts: BTreeMap<String, usize>,
    pub warnings: Vec<String>,
    pub config: ExperimentConfig,
}

#[derive(Serialize)]
struct JsonSummaryDoc<'a> {
    manifest: &'a RunManifest,
    groups: &'a [GroupSummary],
    trends: &'a [TrendSummary],
}

/// Build the configured model at one ladder size (normalized per config).
pub fn build_model(config: &ExperimentConfig, size: usize) -> Result<FieldModel> {
    let model = match config.model {
        ModelKind::Iid => {
            let m = FieldModel::iid(size, config.variance)?;
            if config.normalize {
                m.normalize_to_spec()?
            } else {
                m
            }
        }
        ModelKind::Sign => FieldModel::sign_field(size)?,
        ModelKind::Dgff => FieldModel::dgff(size)?,
        ModelKind::File => {
            let path = config
                .model_path
                .as_ref()
                .expect("validated: model_path present for file models");
            let m = FieldModel::from_covariance_file(path)?;
            if config.normalize {
                m.normalize_to_spec()?
            } else {
                m
            }
        }
    };
    Ok(model)
}

/// Execute the configured experiment, write its CSV and JSON outputs, and
/// return the manifest.
pub fn run(config: &ExperimentConfig) -> Result<RunManifest> {
    config.validate()?;
    let csv_path = config.csv_out.clone().ok_or_else(|| Error::Config {
        path: "csv_out".into(),
        msg: "required to run an experiment".into(),
    })?;
    let json_path = config
        .json_out
        .clone()
        .unwrap_or_else(|| csv_path.with_extension("summary.json"));

    let started = Instant::now();
    let model_name = config.model.as_str().to_string();
    let header = match config.experiment {
        ExperimentKind::Ratio => rows::RATIO_HEADER,
        ExperimentKind::Cardinality => rows::CARDINALITY_HEADER,
        ExperimentKind::Valleys => rows::VALLEYS_HEADER,
        ExperimentKind::EstimateG => rows::ESTIMATE_G_HEADER,
        ExperimentKind::Extremality => rows::EXTREMALITY_HEADER,
        ExperimentKind::Concentration => rows::CONCENTRATION_HEADER,
    };
    let mut lines: Vec<String> = vec![header.to_string()];
    let mut inputs: Vec<SummaryInput> = Vec::new();
    let mut row_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut warnings: Vec<String> = Vec::new();

    // File models fix their own size; ladder models iterate the config sizes.
    let sizes: Vec<usize> = match config.model {
        ModelKind::File => vec![0],
        _ => config.sizes.clone(),
    };

    let mut cursor = 0u64;
    for &ladder_size in &sizes {
        let model = build_model(config, ladder_size)?;
        let size = if config.model == ModelKind::File {
            model.size()
        } else {
            ladder_size
        };
        let mut cell_rows = 0usize;
        match config.experiment {
            ExperimentKind::Ratio => {
                for &alpha in &config.alpha_list {
                    let stream = RngStream::new(config.base_seed, cursor);
                    let exp = ratio_experiment_with_floor(
                        &model,
                        alpha,
                        config.outer_replicates,
                        config.inner_replicates,
                        stream,
                        config.nondegeneracy_floor,
                    )?;
                    cursor = exp.next_stream;
                    if exp.degenerate {
                        warnings.push(format!(
                            "model {model_name} size {size}: ĝ/σ = {:.3} below the non-degeneracy floor {}; results flagged",
                            exp.g_v_hat.mean / model.sigma_max().max(f64::MIN_POSITIVE),
                            config.nondegeneracy_floor
                        ));
                    }
                    for r in &exp.results {
                        lines.push(rows::ratio_csv_row(&model_name, size, r));
                        inputs.push(SummaryInput {
                            experiment: "ratio".into(),
                            model: model_name.clone(),
                            size,
                            alpha: Some(alpha),
                            epsilon: None,
                            statistic: r.ratio,
                            empty: r.empty,
                        });
                        cell_rows += 1;
                    }
                }
            }
            ExperimentKind::Cardinality => {
                for &alpha in &config.alpha_list {
                    let stream = RngStream::new(config.base_seed, cursor);
                    let exp = cardinality_experiment_with_floor(
                        &model,
                        alpha,
                        config.outer_replicates,
                        config.inner_replicates,
                        stream,
                        config.nondegeneracy_floor,
                    )?;
                    cursor = exp.next_stream;
                    if exp.degenerate {
                        warnings.push(format!(
                            "model {model_name} size {size}: non-degeneracy floor violated; results flagged"
                        ));
                    }
                    for r in &exp.rows {
                        lines.push(rows::cardinality_csv_row(&model_name, size, r));
                        inputs.push(SummaryInput {
                            experiment: "cardinality".into(),
                            model: model_name.clone(),
                            size,
                            alpha: Some(alpha),
                            epsilon: None,
                            statistic: Some(r.exponent),
                            empty: r.empty,
                        });
                        cell_rows += 1;
                    }
                }
            }
            ExperimentKind::Valleys => {
                let epsilon = config.epsilon.expect("validated");
                let delta = config.valley_delta().expect("validated");
                let stream = RngStream::new(config.base_seed, cursor);
                let exp = valleys_experiment(
                    &model,
                    epsilon,
                    delta,
                    config.outer_replicates,
                    config.inner_replicates,
                    stream,
                )?;
                cursor = exp.next_stream;
                for r in &exp.rows {
                    lines.push(rows::valleys_csv_row(&model_name, size, r));
                    inputs.push(SummaryInput {
                        experiment: "valleys".into(),
                        model: model_name.clone(),
                        size,
                        alpha: None,
                        epsilon: Some(epsilon),
                        statistic: Some(r.growth_exponent),
                        empty: r.pool_size == 0,
                    });
                    cell_rows += 1;
                }
            }
            ExperimentKind::EstimateG => {
                let stream = RngStream::new(config.base_seed, cursor);
                let kernel = factorize(&model)?;
                let est = estimate_g_full(&kernel, config.inner_replicates.max(2), stream)?;
                cursor += est.replicates as u64;
                let row = EstimateGRow {
                    subset_size: est.subset_size,
                    replicates: est.replicates,
                    stream,
                    mean: est.mean,
                    stderr: est.stderr,
                    borell_halfwidth: est.borell_halfwidth,
                };
                lines.push(rows::estimate_g_csv_row(&model_name, size, &row));
                inputs.push(SummaryInput {
                    experiment: "estimate-g".into(),
                    model: model_name.clone(),
                    size,
                    alpha: None,
                    epsilon: None,
                    statistic: Some(est.mean),
                    empty: false,
                });
                cell_rows += 1;
            }
            ExperimentKind::Extremality => {
                let stream = RngStream::new(config.base_seed, cursor);
                let kernel = factorize(&model)?;
                let est = estimate_g_full(&kernel, config.inner_replicates.max(2), stream)?;
                cursor += est.replicates as u64;
                let row = ExtremalityRow {
                    replicates: est.replicates,
                    stream,
                    g_hat: est.mean,
                    g_stderr: est.stderr,
                    extremality_ratio: extremality_ratio(&est, &model),
                    nondegeneracy_ratio: nondegeneracy_ratio(&est, &model)?,
                };
                lines.push(rows::extremality_csv_row(&model_name, size, &row));
                inputs.push(SummaryInput {
                    experiment: "extremality".into(),
                    model: model_name.clone(),
                    size,
                    alpha: None,
                    epsilon: None,
                    statistic: Some(row.extremality_ratio),
                    empty: false,
                });
                cell_rows += 1;
            }
            ExperimentKind::Concentration => {
                let stream = RngStream::new(config.base_seed, cursor);
                let kernel = factorize(&model)?;
                let g_reps = config.inner_replicates.max(2);
                let est = estimate_g_full(&kernel, g_reps, stream)?;
                let check_stream = stream.offset(g_reps as u64);
                let rows_out = concentration_check(
                    &kernel,
                    &est,
                    &CONCENTRATION_Z_MULTIPLIERS,
                    config.outer_replicates,
                    check_stream,
                );
                cursor = check_stream.stream_index + config.outer_replicates as u64;
                for (mult, c) in CONCENTRATION_Z_MULTIPLIERS.iter().zip(rows_out.iter()) {
                    let row = ConcentrationExperimentRow {
                        z_multiplier: *mult,
                        z: c.z,
                        replicates: config.outer_replicates,
                        stream: check_stream,
                        empirical: c.empirical,
                        bound: c.bound,
                        binomial_sd: c.binomial_sd,
                    };
                    lines.push(rows::concentration_csv_row(&model_name, size, &row));
                    inputs.push(SummaryInput {
                        experiment: "concentration".into(),
                        model: model_name.clone(),
                        size,
                        alpha: None,
                        epsilon: None,
                        statistic: Some(c.empirical),
                        empty: false,
                    });
                    cell_rows += 1;
                }
            }
        }
        row_counts.insert(format!("size={size}"), cell_rows);
    }

    let groups = summarize(&inputs)?;
    let trend_records = trends(&groups);

    if let Some(parent) = csv_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut csv = std::io::BufWriter::new(std::fs::File::create(&csv_path)?);
    for line in &lines {
        writeln!(csv, "{line}")?;
    }
    csv.flush()?;

    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        wall_seconds: started.elapsed().as_secs_f64(),
        row_counts,
        warnings,
        config: config.clone(),
    };
    if let Some(parent) = json_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let doc = JsonSummaryDoc {
        manifest: &manifest,
        groups: &groups,
        trends: &trend_records,
    };
    let json = serde_json::to_string_pretty(&doc).expect("serializable summary");
    std::fs::write(&json_path, json + "\n")?;

    Ok(manifest)
}
