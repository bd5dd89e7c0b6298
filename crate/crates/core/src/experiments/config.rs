//! Experiment configuration: a flat `key = value` text format with `#`
//! comments and comma-separated lists. Unknown keys are errors, and every
//! validation failure names the offending field path.

use std::path::PathBuf;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    EstimateG,
    Ratio,
    Cardinality,
    Valleys,
    Extremality,
    Concentration,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::EstimateG => "estimate-g",
            ExperimentKind::Ratio => "ratio",
            ExperimentKind::Cardinality => "cardinality",
            ExperimentKind::Valleys => "valleys",
            ExperimentKind::Extremality => "extremality",
            ExperimentKind::Concentration => "concentration",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Iid,
    Sign,
    Dgff,
    File,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Iid => "iid",
            ModelKind::Sign => "sign",
            ModelKind::Dgff => "dgff",
            ModelKind::File => "file",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: ModelKind,
    /// Covariance file path (model = file).
    pub model_path: Option<PathBuf>,
    /// Variance of the iid model before normalization.
    pub variance: f64,
    /// Model sizes for trend runs: point count (iid), n (sign), side (dgff).
    pub sizes: Vec<usize>,
    pub alpha_list: Vec<f64>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    /// High-point floor offset; used as the valley `delta` when `delta`
    /// itself is absent.
    pub beta: Option<f64>,
    pub outer_replicates: usize,
    pub inner_replicates: usize,
    pub base_seed: u64,
    pub csv_out: Option<PathBuf>,
    pub json_out: Option<PathBuf>,
    /// Growth-exponent pass threshold used in summaries.
    pub exponent_floor: f64,
    /// ĝ/σ floor below which results carry the degeneracy flag.
    pub nondegeneracy_floor: f64,
    /// Rescale iid/file models to the reference normalization after build.
    pub normalize: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::EstimateG,
            model: ModelKind::Iid,
            model_path: None,
            variance: 1.0,
            sizes: Vec::new(),
            alpha_list: Vec::new(),
            epsilon: None,
            delta: None,
            beta: None,
            outer_replicates: 1,
            inner_replicates: 1000,
            base_seed: 0,
            csv_out: None,
            json_out: None,
            exponent_floor: 0.05,
            nondegeneracy_floor: crate::level_sets::DEFAULT_NONDEGENERACY_FLOOR,
            normalize: true,
        }
    }
}

fn config_err(path: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        msg: msg.into(),
    }
}

fn parse_scalar<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| config_err(key, format!("cannot parse `{value}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .enumerate()
        .map(|(i, tok)| {
            tok.parse::<T>()
                .map_err(|_| config_err(format!("{key}[{i}]"), format!("cannot parse `{tok}`")))
        })
        .collect()
}

/// Parse a config file's text. Duplicate keys are rejected.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut seen: Vec<String> = Vec::new();
    let mut required_seen = (false, false, false); // experiment, model, base_seed

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        let line = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(config_err(
                format!("line {}", lineno + 1),
                format!("expected `key = value`, got `{line}`"),
            ));
        };
        let key = key.trim();
        let value = value.trim();
        if seen.iter().any(|k| k == key) {
            return Err(config_err(key, "duplicate key"));
        }
        seen.push(key.to_string());

        match key {
            "experiment" => {
                cfg.experiment = match value {
                    "estimate-g" => ExperimentKind::EstimateG,
                    "ratio" => ExperimentKind::Ratio,
                    "cardinality" => ExperimentKind::Cardinality,
                    "valleys" => ExperimentKind::Valleys,
                    "extremality" => ExperimentKind::Extremality,
                    "concentration" => ExperimentKind::Concentration,
                    other => {
                        return Err(config_err(
                            "experiment",
                            format!("unknown experiment `{other}`"),
                        ))
                    }
                };
                required_seen.0 = true;
            }
            "model" => {
                cfg.model = match value {
                    "iid" => ModelKind::Iid,
                    "sign" => ModelKind::Sign,
                    "dgff" => ModelKind::Dgff,
                    "file" => ModelKind::File,
                    other => return Err(config_err("model", format!("unknown model `{other}`"))),
                };
                required_seen.1 = true;
            }
            "model_path" => cfg.model_path = Some(PathBuf::from(value)),
            "variance" => cfg.variance = parse_scalar(key, value)?,
            "sizes" => cfg.sizes = parse_list(key, value)?,
            "alpha_list" => cfg.alpha_list = parse_list(key, value)?,
            "epsilon" => cfg.epsilon = Some(parse_scalar(key, value)?),
            "delta" => cfg.delta = Some(parse_scalar(key, value)?),
            "beta" => cfg.beta = Some(parse_scalar(key, value)?),
            "outer_replicates" => cfg.outer_replicates = parse_scalar(key, value)?,
            "inner_replicates" => cfg.inner_replicates = parse_scalar(key, value)?,
            "base_seed" => {
                cfg.base_seed = parse_scalar(key, value)?;
                required_seen.2 = true;
            }
            "csv_out" => cfg.csv_out = Some(PathBuf::from(value)),
            "json_out" => cfg.json_out = Some(PathBuf::from(value)),
            "exponent_floor" => cfg.exponent_floor = parse_scalar(key, value)?,
            "nondegeneracy_floor" => cfg.nondegeneracy_floor = parse_scalar(key, value)?,
            "normalize" => cfg.normalize = parse_scalar(key, value)?,
            other => return Err(config_err(other, "unknown key")),
        }
    }

    if !required_seen.0 {
        return Err(config_err("experiment", "missing required key"));
    }
    if !required_seen.1 {
        return Err(config_err("model", "missing required key"));
    }
    if !required_seen.2 {
        return Err(config_err("base_seed", "missing required key"));
    }
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Effective high-point floor offset for valley runs.
    pub fn valley_delta(&self) -> Option<f64> {
        self.delta.or(self.beta)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, a) in self.alpha_list.iter().enumerate() {
            if !(*a > 0.0 && *a < 1.0) {
                return Err(config_err(
                    format!("alpha_list[{i}]"),
                    format!("alpha must lie in (0,1), got {a}"),
                ));
            }
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e < 1.0) {
                return Err(config_err("epsilon", format!("must lie in (0,1), got {e}")));
            }
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return Err(config_err("delta", format!("must be > 0, got {d}")));
            }
        }
        if let Some(b) = self.beta {
            if !(b > 0.0) {
                return Err(config_err("beta", format!("must be > 0, got {b}")));
            }
        }
        if self.outer_replicates < 1 {
            return Err(config_err("outer_replicates", "must be >= 1"));
        }
        if self.inner_replicates < 1 {
            return Err(config_err("inner_replicates", "must be >= 1"));
        }
        if !(self.variance > 0.0) {
            return Err(config_err(
                "variance",
                format!("must be > 0, got {}", self.variance),
            ));
        }
        if !self.sizes.windows(2).all(|w| w[0] < w[1]) {
            return Err(config_err("sizes", "must be strictly increasing"));
        }
        match self.model {
            ModelKind::File => {
                if self.model_path.is_none() {
                    return Err(config_err("model_path", "required when model = file"));
                }
                if !self.sizes.is_empty() {
                    return Err(config_err(
                        "sizes",
                        "must be omitted when model = file (the file fixes the size)",
                    ));
                }
            }
            _ => {
                if self.sizes.is_empty() {
                    return Err(config_err("sizes", "at least one size is required"));
                }
            }
        }
        match self.experiment {
            ExperimentKind::Ratio | ExperimentKind::Cardinality => {
                if self.alpha_list.is_empty() {
                    return Err(config_err(
                        "alpha_list",
                        format!("required for the {} experiment", self.experiment.as_str()),
                    ));
                }
            }
            ExperimentKind::Valleys => {
                if self.epsilon.is_none() {
                    return Err(config_err("epsilon", "required for the valleys experiment"));
                }
                if self.valley_delta().is_none() {
                    return Err(config_err(
                        "delta",
                        "delta (or beta) is required for the valleys experiment",
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }
}
