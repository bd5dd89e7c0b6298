//! Correlation ε-nets over high-point pools and the resulting
//! multiple-valley certificates.
//!
//! A net is built greedily: sweeping the pool in a deterministic order, a
//! point becomes a center iff its normalized correlation with every accepted
//! center is strictly below ε. Maximality makes the net both a packing
//! (centers pairwise < ε) and a covering (every pool point is ε-correlated
//! with some center, one-sidedly — negative correlation counts as "outside
//! the ball", so anti-correlated points can both be centers).

use crate::error::{Error, Result};
use crate::field_models::FieldModel;
use crate::sampler::FieldSample;

/// Pearson correlation Σ_uv/√(Σ_uu·Σ_vv), clamped to [−1, 1].
pub fn normalized_correlation(model: &FieldModel, u: usize, v: usize) -> Result<f64> {
    let var_u = model.variance(u)?;
    let var_v = model.variance(v)?;
    if var_u <= 0.0 {
        return Err(Error::DegeneratePoint { index: u });
    }
    if var_v <= 0.0 {
        return Err(Error::DegeneratePoint { index: v });
    }
    let cov = model.covariance_entry(u, v)?;
    Ok((cov / (var_u * var_v).sqrt()).clamp(-1.0, 1.0))
}

/// Sweep order for the greedy net construction.
#[derive(Debug, Clone, Copy)]
pub enum SweepOrder<'a> {
    /// Ascending index order.
    IndexAscending,
    /// Descending by the given per-index values (the high points first);
    /// ties fall back to ascending index.
    ValueDescending(&'a [f64]),
}

/// A maximal ε-net over a candidate pool.
#[derive(Debug, Clone)]
pub struct NetResult {
    pub centers: Vec<usize>,
    pub epsilon: f64,
    pub candidate_pool: Vec<usize>,
    /// log|centers| / n_eff (0 for degenerate or empty nets).
    pub growth_exponent: f64,
}

/// Greedy maximal ε-net over `pool` in the given sweep order.
pub fn build_epsilon_net(
    model: &FieldModel,
    pool: &[usize],
    epsilon: f64,
    order: SweepOrder,
) -> Result<NetResult> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!(
            "epsilon must lie in (0,1), got {epsilon}"
        )));
    }
    if pool.is_empty() {
        return Err(Error::invalid("epsilon net needs a nonempty pool"));
    }
    let mut sweep: Vec<usize> = pool.to_vec();
    match order {
        SweepOrder::IndexAscending => sweep.sort_unstable(),
        SweepOrder::ValueDescending(values) => {
            if let Some(&bad) = sweep.iter().find(|&&i| i >= values.len()) {
                return Err(Error::invalid(format!(
                    "pool index {bad} out of range for the ordering values"
                )));
            }
            sweep.sort_by(|&a, &b| {
                values[b]
                    .partial_cmp(&values[a])
                    .expect("non-finite ordering value")
                    .then(a.cmp(&b))
            });
        }
    }
    let mut centers: Vec<usize> = Vec::new();
    for &candidate in &sweep {
        let mut accept = true;
        for &center in &centers {
            if normalized_correlation(model, candidate, center)? >= epsilon {
                accept = false;
                break;
            }
        }
        if accept {
            centers.push(candidate);
        }
    }
    let growth_exponent = if model.effective_n() > 0.0 {
        (centers.len() as f64).ln() / model.effective_n()
    } else {
        0.0
    };
    Ok(NetResult {
        centers,
        epsilon,
        candidate_pool: pool.to_vec(),
        growth_exponent,
    })
}

/// Exhaustive packing-and-covering check; the independent oracle for
/// `build_epsilon_net`.
pub fn verify_net(model: &FieldModel, net: &NetResult) -> bool {
    let eps = net.epsilon;
    // centers must come from the pool, without duplicates
    for (i, &c) in net.centers.iter().enumerate() {
        if !net.candidate_pool.contains(&c) {
            return false;
        }
        if net.centers[..i].contains(&c) {
            return false;
        }
    }
    // packing: centers pairwise strictly below epsilon
    for (i, &a) in net.centers.iter().enumerate() {
        for &b in &net.centers[i + 1..] {
            match normalized_correlation(model, a, b) {
                Ok(r) if r < eps => {}
                _ => return false,
            }
        }
    }
    // covering: every pool point is a center or lies in some center's ball
    for &p in &net.candidate_pool {
        if net.centers.contains(&p) {
            continue;
        }
        let covered = net.centers.iter().any(|&c| {
            matches!(normalized_correlation(model, p, c), Ok(r) if r >= eps)
        });
        if !covered {
            return false;
        }
    }
    true
}

/// Verdicts for the three multiple-valley conditions over one sample.
#[derive(Debug, Clone)]
pub struct ValleyReport {
    pub centers: Vec<usize>,
    pub epsilon: f64,
    pub delta: f64,
    pub g_v_hat: f64,
    /// ĝ(V) − δ·n_eff, the high-point floor defining the pool.
    pub value_floor: f64,
    pub pool_size: usize,
    /// log|centers| / n_eff.
    pub growth_exponent: f64,
    /// (a): exponentially many centers — reported as growth_exponent > 0.
    pub cond_a: bool,
    /// (b): pairwise normalized correlations among centers ≤ ε.
    pub cond_b: bool,
    /// (c): every center's sampled value ≥ the floor.
    pub cond_c: bool,
}

/// Assemble a multiple-valley certificate: pool the sample's high points
/// (value ≥ ĝ(V) − δ·n_eff), net them greedily by descending value, and
/// report the three condition verdicts. An empty pool yields a report with
/// all conditions false rather than an error. Zero-variance points are
/// excluded from the pool (their correlations are undefined).
pub fn find_multiple_valleys(
    model: &FieldModel,
    sample: &FieldSample,
    g_v: f64,
    delta: f64,
    epsilon: f64,
) -> Result<ValleyReport> {
    if !(g_v > 0.0) {
        return Err(Error::DegenerateModel(format!(
            "valley certificate needs g(V) > 0, got {g_v}"
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("delta must be > 0, got {delta}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!(
            "epsilon must lie in (0,1), got {epsilon}"
        )));
    }
    if sample.len() != model.size() {
        return Err(Error::invalid(
            "sample length does not match the model's index set",
        ));
    }
    let value_floor = g_v - delta * model.effective_n();
    let profile = model.variance_profile();
    let pool: Vec<usize> = sample
        .values()
        .iter()
        .enumerate()
        .filter_map(|(i, &v)| (v >= value_floor && profile[i] > 0.0).then_some(i))
        .collect();
    if pool.is_empty() {
        return Ok(ValleyReport {
            centers: Vec::new(),
            epsilon,
            delta,
            g_v_hat: g_v,
            value_floor,
            pool_size: 0,
            growth_exponent: 0.0,
            cond_a: false,
            cond_b: false,
            cond_c: false,
        });
    }
    let net = build_epsilon_net(model, &pool, epsilon, SweepOrder::ValueDescending(sample.values()))?;
    let mut cond_b = true;
    'outer: for (i, &a) in net.centers.iter().enumerate() {
        for &b in &net.centers[i + 1..] {
            if normalized_correlation(model, a, b)? > epsilon {
                cond_b = false;
                break 'outer;
            }
        }
    }
    let cond_c = net
        .centers
        .iter()
        .all(|&c| sample.values()[c] >= value_floor);
    Ok(ValleyReport {
        cond_a: net.growth_exponent > 0.0,
        cond_b,
        cond_c,
        centers: net.centers,
        epsilon,
        delta,
        g_v_hat: g_v,
        value_floor,
        pool_size: pool.len(),
        growth_exponent: net.growth_exponent,
    })
}

/// h(t, α) = α·t + √(1−α²)·√(1−t²): the mixture gain appearing in the
/// two-copy domination argument. Bounded by 1, with equality iff t = α.
pub fn mixture_coefficient(t: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("t must lie in [0,1], got {t}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!(
            "alpha must lie in [0,1], got {alpha}"
        )));
    }
    Ok(alpha * t + (1.0 - alpha * alpha).sqrt() * (1.0 - t * t).sqrt())
}

/// Regression of the field at `u` on the field at `center`: returns the
/// coefficient ρ = Σ_{u,c}/Σ_{c,c} and the residual variance
/// Σ_uu − ρ²·Σ_cc, which satisfies the (1 − r²)·Σ_uu bound.
pub fn residual_variance_bound(model: &FieldModel, center: usize, u: usize) -> Result<(f64, f64)> {
    let var_c = model.variance(center)?;
    if var_c <= 0.0 {
        return Err(Error::DegeneratePoint { index: center });
    }
    let var_u = model.variance(u)?;
    let cov = model.covariance_entry(u, center)?;
    let rho = cov / var_c;
    let residual = var_u - rho * rho * var_c;
    if var_u > 0.0 {
        let r = (cov / (var_u * var_c).sqrt()).clamp(-1.0, 1.0);
        assert!(
            residual <= (1.0 - r * r) * var_u + 1e-9,
            "residual variance bound violated: {residual} vs {}",
            (1.0 - r * r) * var_u
        );
    }
    Ok((rho, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_models::model_from_dense;
    use crate::sampler::RngStream;
    use nalgebra::DMatrix;

    fn all_ones_model(n: usize) -> FieldModel {
        model_from_dense(DMatrix::from_element(n, n, 1.0)).unwrap()
    }

    #[test]
    fn correlation_examples() {
        let iid = FieldModel::iid(5, 2.0).unwrap();
        assert_eq!(normalized_correlation(&iid, 2, 2).unwrap(), 1.0);
        assert_eq!(normalized_correlation(&iid, 0, 3).unwrap(), 0.0);

        let sign = FieldModel::sign_field(4).unwrap();
        let u = sign.index_set().index_of_spins(&[1, 1, 1, 1]).unwrap();
        let v = sign.index_set().index_of_spins(&[1, 1, 1, -1]).unwrap();
        assert_eq!(normalized_correlation(&sign, u, v).unwrap(), 0.5);
    }

    #[test]
    fn correlation_rejects_degenerate_points() {
        let m = model_from_dense(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(matches!(
            normalized_correlation(&m, 0, 1),
            Err(Error::DegeneratePoint { index: 1 })
        ));
    }

    #[test]
    fn net_on_iid_keeps_every_point() {
        let m = FieldModel::iid(12, 1.0).unwrap();
        let pool: Vec<usize> = (0..12).collect();
        for eps in [0.1, 0.5, 0.9] {
            let net = build_epsilon_net(&m, &pool, eps, SweepOrder::IndexAscending).unwrap();
            assert_eq!(net.centers.len(), 12);
            assert!(verify_net(&m, &net));
        }
    }

    #[test]
    fn net_on_perfect_correlation_keeps_first_sweep_point() {
        let m = all_ones_model(6);
        let pool: Vec<usize> = (0..6).collect();
        let net = build_epsilon_net(&m, &pool, 0.5, SweepOrder::IndexAscending).unwrap();
        assert_eq!(net.centers, vec![0]);
        assert!(verify_net(&m, &net));

        let values = [0.0, 3.0, 1.0, 2.0, -1.0, 0.5];
        let net = build_epsilon_net(&m, &pool, 0.5, SweepOrder::ValueDescending(&values)).unwrap();
        assert_eq!(net.centers, vec![1], "highest value sweeps first");
    }

    #[test]
    fn sign_field_n2_net_accepts_all_four() {
        // pairwise correlations are 0 or -1, all below eps = 0.5
        let m = FieldModel::sign_field(2).unwrap();
        let pool: Vec<usize> = (0..4).collect();
        let net = build_epsilon_net(&m, &pool, 0.5, SweepOrder::IndexAscending).unwrap();
        assert_eq!(net.centers.len(), 4);
        assert!(verify_net(&m, &net));
    }

    #[test]
    fn boundary_ties_stay_out_of_the_packing_but_are_covered() {
        // sign field n=4: adjacent corners have correlation exactly 2/4 = 0.5
        let m = FieldModel::sign_field(4).unwrap();
        let pool: Vec<usize> = (0..16).collect();
        let net = build_epsilon_net(&m, &pool, 0.5, SweepOrder::IndexAscending).unwrap();
        assert!(verify_net(&m, &net));
        for (i, &a) in net.centers.iter().enumerate() {
            for &b in &net.centers[i + 1..] {
                assert!(normalized_correlation(&m, a, b).unwrap() < 0.5);
            }
        }
    }

    #[test]
    fn verify_net_rejects_mutations() {
        let m = FieldModel::iid(4, 1.0).unwrap();
        let pool: Vec<usize> = (0..4).collect();
        let mut net = build_epsilon_net(&m, &pool, 0.3, SweepOrder::IndexAscending).unwrap();
        assert!(verify_net(&m, &net));
        // removing a center breaks covering (iid balls are singletons)
        net.centers.pop();
        assert!(!verify_net(&m, &net));

        let m = all_ones_model(4);
        let mut net = build_epsilon_net(&m, &pool, 0.3, SweepOrder::IndexAscending).unwrap();
        assert!(verify_net(&m, &net));
        // injecting a fully-correlated extra center breaks packing
        net.centers.push(2);
        assert!(!verify_net(&m, &net));
    }

    #[test]
    fn net_size_is_monotone_in_epsilon_on_suite_models() {
        let suite = vec![
            FieldModel::iid(16, 1.0).unwrap(),
            FieldModel::sign_field(4).unwrap(),
            FieldModel::dgff(9).unwrap(),
            FieldModel::dgff(17).unwrap(),
        ];
        for m in &suite {
            let pool: Vec<usize> = (0..m.size()).collect();
            let mut prev = 0usize;
            for eps in [0.1, 0.3, 0.5, 0.9] {
                let net = build_epsilon_net(m, &pool, eps, SweepOrder::IndexAscending).unwrap();
                assert!(verify_net(m, &net));
                assert!(
                    net.centers.len() >= prev,
                    "net shrank from {prev} to {} at eps {eps}",
                    net.centers.len()
                );
                prev = net.centers.len();
            }
        }
    }

    #[test]
    fn epsilon_contract() {
        let m = FieldModel::iid(4, 1.0).unwrap();
        let pool: Vec<usize> = (0..4).collect();
        for eps in [0.0, 1.0, -0.5, 1.5] {
            assert!(matches!(
                build_epsilon_net(&m, &pool, eps, SweepOrder::IndexAscending),
                Err(Error::InvalidArgument(_))
            ));
        }
        assert!(matches!(
            build_epsilon_net(&m, &[], 0.5, SweepOrder::IndexAscending),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn valleys_on_iid_with_wide_floor() {
        let m = FieldModel::iid(64, 1.0).unwrap();
        let k = crate::sampler::factorize(&m).unwrap();
        let s = k.sample(RngStream::new(5, 0));
        // delta large enough that the floor is below every sampled value
        let g_v = 2.0;
        let delta = 5.0;
        let report = find_multiple_valleys(&m, &s, g_v, delta, 0.5).unwrap();
        assert_eq!(report.pool_size, 64);
        assert_eq!(report.centers.len(), 64);
        assert!(report.cond_a && report.cond_b && report.cond_c);
        assert!((report.growth_exponent - 1.0).abs() < 1e-12);
    }

    #[test]
    fn valleys_empty_pool_is_a_report_not_an_error() {
        let m = FieldModel::iid(8, 1.0).unwrap();
        let k = crate::sampler::factorize(&m).unwrap();
        let s = k.sample(RngStream::new(6, 0));
        let report = find_multiple_valleys(&m, &s, 100.0, 0.001, 0.5).unwrap();
        assert_eq!(report.pool_size, 0);
        assert!(!report.cond_a && !report.cond_b && !report.cond_c);
        assert_eq!(report.growth_exponent, 0.0);
    }

    #[test]
    fn valley_conditions_are_scale_invariant() {
        // exact halving: scale the field, the sample, ĝ and δ together
        let m = FieldModel::sign_field(6).unwrap();
        let k = crate::sampler::factorize(&m).unwrap();
        let s = k.sample(RngStream::new(9, 4));
        let g_v = crate::field_models::sign_field_expected_max(6);
        let r1 = find_multiple_valleys(&m, &s, g_v, 0.2, 0.3).unwrap();

        let half = model_from_dense(m.covariance_matrix() * 0.25).unwrap();
        let half_sample = crate::sampler::FieldSample::from_parts(
            s.values().iter().map(|v| v * 0.5).collect(),
            s.stream(),
            half.id(),
        );
        let r2 = find_multiple_valleys(&half, &half_sample, 0.5 * g_v, 0.5 * 0.2, 0.3).unwrap();
        assert_eq!(r1.centers, r2.centers);
        assert_eq!(
            (r1.cond_a, r1.cond_b, r1.cond_c),
            (r2.cond_a, r2.cond_b, r2.cond_c)
        );
        assert!((r1.growth_exponent - r2.growth_exponent).abs() < 1e-12);
    }

    #[test]
    fn mixture_coefficient_identities() {
        for alpha in [0.0, 0.3, 0.7, 1.0] {
            assert!((mixture_coefficient(alpha, alpha).unwrap() - 1.0).abs() < 1e-12);
            let at_zero = mixture_coefficient(0.0, alpha).unwrap();
            assert!((at_zero - (1.0 - alpha * alpha).sqrt()).abs() < 1e-15);
        }
        assert!(mixture_coefficient(-0.1, 0.5).is_err());
        assert!(mixture_coefficient(0.5, 1.1).is_err());
    }

    #[test]
    fn mixture_coefficient_grid_max_on_diagonal() {
        let alpha = 0.6;
        let mut best = f64::NEG_INFINITY;
        let mut best_t = -1.0;
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            let h = mixture_coefficient(t, alpha).unwrap();
            assert!(h <= 1.0 + 1e-12);
            if h > best {
                best = h;
                best_t = t;
            }
            if (t - alpha).abs() >= 0.01 {
                assert!(h < 1.0 - 1e-6, "h({t}, {alpha}) = {h} too close to 1");
            }
        }
        assert!((best_t - alpha).abs() < 1e-12);
        assert!((best - 1.0).abs() < 1e-12);
    }

    #[test]
    fn residual_variance_examples() {
        let iid = FieldModel::iid(4, 1.5).unwrap();
        let (rho, res) = residual_variance_bound(&iid, 1, 1).unwrap();
        assert_eq!(rho, 1.0);
        assert!(res.abs() < 1e-12);
        let (rho, res) = residual_variance_bound(&iid, 0, 2).unwrap();
        assert_eq!(rho, 0.0);
        assert!((res - 1.5).abs() < 1e-12);

        let sign = FieldModel::sign_field(4).unwrap();
        let c = sign.index_set().index_of_spins(&[1, 1, 1, 1]).unwrap();
        let u = sign.index_set().index_of_spins(&[1, 1, -1, -1]).unwrap();
        let (rho, res) = residual_variance_bound(&sign, c, u).unwrap();
        assert_eq!(rho, 0.0);
        assert_eq!(res, 4.0);
    }

    #[test]
    fn residual_bound_is_tight_on_the_sign_field() {
        // equal variances: residual equals (1 − r²)·var exactly
        let sign = FieldModel::sign_field(5).unwrap();
        for u in [1usize, 7, 19] {
            let (_, res) = residual_variance_bound(&sign, 3, u).unwrap();
            let r = normalized_correlation(&sign, 3, u).unwrap();
            let bound = (1.0 - r * r) * sign.variance(u).unwrap();
            assert!((res - bound).abs() < 1e-9);
        }
    }
}
