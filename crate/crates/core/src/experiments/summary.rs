//! Per-group summaries of experiment rows and size-trend records.
//!
//! A group is one (experiment, model, size, α or ε) cell; the headline
//! statistic is the ratio, exponent, or growth exponent of that experiment
//! type, summarized by median, mean and the 10th/90th percentiles, with the
//! theoretical target computed from α by formula.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, Serialize)]
pub struct GroupSummary {
    pub experiment: String,
    pub model: String,
    pub size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub count: usize,
    pub median: f64,
    pub mean: f64,
    pub p10: f64,
    pub p90: f64,
    pub empty_fraction: f64,
    /// √(1−α²) for ratio rows, 1−α² for cardinality rows, absent otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
}

/// Trend of one α across the size ladder: does the headline statistic's
/// absolute error against the target improve as sizes grow?
#[derive(Debug, Clone, Serialize)]
pub struct TrendSummary {
    pub experiment: String,
    pub model: String,
    pub alpha: f64,
    pub sizes: Vec<usize>,
    pub medians: Vec<f64>,
    pub abs_errors: Vec<f64>,
    pub improving_pairs: usize,
    pub total_pairs: usize,
    /// At least half of the adjacent size pairs moved toward the target.
    pub majority_improving: bool,
}

/// One parsed row: group keys plus the headline statistic.
#[derive(Debug, Clone)]
pub struct SummaryInput {
    pub experiment: String,
    pub model: String,
    pub size: usize,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub statistic: Option<f64>,
    pub empty: bool,
}

fn target_for(experiment: &str, alpha: Option<f64>) -> Option<f64> {
    let a = alpha?;
    match experiment {
        "ratio" => Some((1.0 - a * a).sqrt()),
        "cardinality" => Some(1.0 - a * a),
        _ => None,
    }
}

/// Group rows by (experiment, model, size, α/ε) and summarize each group.
pub fn summarize(rows: &[SummaryInput]) -> Result<Vec<GroupSummary>> {
    if rows.is_empty() {
        return Err(Error::invalid("summarize needs at least one row"));
    }
    let mut groups: BTreeMap<(String, String, usize, Option<u64>, Option<u64>), Vec<&SummaryInput>> =
        BTreeMap::new();
    for row in rows {
        let key = (
            row.experiment.clone(),
            row.model.clone(),
            row.size,
            row.alpha.map(f64::to_bits),
            row.epsilon.map(f64::to_bits),
        );
        groups.entry(key).or_default().push(row);
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((experiment, model, size, alpha_bits, eps_bits), members) in groups {
        let alpha = alpha_bits.map(f64::from_bits);
        let epsilon = eps_bits.map(f64::from_bits);
        let stats_vals: Vec<f64> = members.iter().filter_map(|r| r.statistic).collect();
        let empties = members.iter().filter(|r| r.empty).count();
        let (median, mean, p10, p90) = if stats_vals.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        } else {
            (
                stats::median(&stats_vals),
                stats::mean(&stats_vals),
                stats::percentile(&stats_vals, 10.0),
                stats::percentile(&stats_vals, 90.0),
            )
        };
        out.push(GroupSummary {
            target: target_for(&experiment, alpha),
            experiment,
            model,
            size,
            alpha,
            epsilon,
            count: members.len(),
            median,
            mean,
            p10,
            p90,
            empty_fraction: empties as f64 / members.len() as f64,
        });
    }
    Ok(out)
}

/// Derive per-α size trends from group summaries (ratio/cardinality only).
pub fn trends(groups: &[GroupSummary]) -> Vec<TrendSummary> {
    let mut by_alpha: BTreeMap<(String, String, u64), Vec<&GroupSummary>> = BTreeMap::new();
    for g in groups {
        let (Some(alpha), Some(_)) = (g.alpha, g.target) else {
            continue;
        };
        by_alpha
            .entry((g.experiment.clone(), g.model.clone(), alpha.to_bits()))
            .or_default()
            .push(g);
    }
    let mut out = Vec::new();
    for ((experiment, model, alpha_bits), mut members) in by_alpha {
        members.sort_by_key(|g| g.size);
        if members.len() < 2 {
            continue;
        }
        let sizes: Vec<usize> = members.iter().map(|g| g.size).collect();
        let medians: Vec<f64> = members.iter().map(|g| g.median).collect();
        let target = members[0].target.unwrap();
        let abs_errors: Vec<f64> = medians.iter().map(|m| (m - target).abs()).collect();
        let improving = abs_errors.windows(2).filter(|w| w[1] <= w[0]).count();
        let total = abs_errors.len() - 1;
        out.push(TrendSummary {
            experiment,
            model,
            alpha: f64::from_bits(alpha_bits),
            sizes,
            medians,
            abs_errors,
            improving_pairs: improving,
            total_pairs: total,
            majority_improving: improving * 2 >= total,
        });
    }
    out
}

/// Parse a CSV produced by the runner back into summary inputs. The header
/// determines the experiment type and the headline column.
pub fn parse_csv_rows(text: &str) -> Result<Vec<SummaryInput>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::invalid("empty CSV input"))?;
    let cols: Vec<&str> = header.split(',').collect();
    let idx = |name: &str| cols.iter().position(|c| *c == name);
    let (Some(experiment_i), Some(model_i), Some(size_i)) =
        (idx("experiment"), idx("model"), idx("size"))
    else {
        return Err(Error::invalid(
            "CSV header must contain experiment, model and size columns",
        ));
    };
    let alpha_i = idx("alpha");
    let epsilon_i = idx("epsilon");
    let empty_i = idx("empty_flag");

    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::Parse {
                line: lineno + 2,
                msg: format!("expected {} fields, got {}", cols.len(), fields.len()),
            });
        }
        let experiment = fields[experiment_i].to_string();
        let stat_col = match experiment.as_str() {
            "ratio" => "ratio",
            "cardinality" => "exponent",
            "valleys" => "growth_exponent",
            "estimate-g" => "mean",
            "extremality" => "extremality_ratio",
            "concentration" => "empirical_freq",
            other => {
                return Err(Error::Parse {
                    line: lineno + 2,
                    msg: format!("unknown experiment `{other}`"),
                })
            }
        };
        let stat_i = idx(stat_col).ok_or_else(|| Error::Parse {
            line: lineno + 2,
            msg: format!("missing column `{stat_col}`"),
        })?;
        let parse_f64 = |i: usize| -> Result<f64> {
            fields[i].parse::<f64>().map_err(|_| Error::Parse {
                line: lineno + 2,
                msg: format!("cannot parse `{}` in column {}", fields[i], cols[i]),
            })
        };
        let statistic = {
            let v = parse_f64(stat_i)?;
            (!v.is_nan()).then_some(v)
        };
        rows.push(SummaryInput {
            experiment,
            model: fields[model_i].to_string(),
            size: fields[size_i].parse().map_err(|_| Error::Parse {
                line: lineno + 2,
                msg: format!("cannot parse size `{}`", fields[size_i]),
            })?,
            alpha: match alpha_i {
                Some(i) => Some(parse_f64(i)?),
                None => None,
            },
            epsilon: match epsilon_i {
                Some(i) => Some(parse_f64(i)?),
                None => None,
            },
            statistic,
            empty: match empty_i {
                Some(i) => fields[i] == "1",
                None => false,
            },
        });
    }
    if rows.is_empty() {
        return Err(Error::invalid("CSV contains no data rows"));
    }
    Ok(rows)
}
