//! Order-stable reductions and summary statistics.
//!
//! Replicate results are always reduced in fixed index order with pairwise
//! summation, so a run's numbers do not depend on how work was scheduled.

/// Pairwise (cascade) summation. Deterministic for a fixed slice order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Sample mean and standard error (sample sd / sqrt(n)).
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let m = mean(xs);
    if n < 2 {
        return (m, 0.0);
    }
    let devs: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    let var = pairwise_sum(&devs) / (n as f64 - 1.0);
    (m, (var / n as f64).sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    percentile(xs, 50.0)
}

/// Percentile with linear interpolation between closest ranks.
pub fn percentile(xs: &[f64], p: f64) -> f64 {
    assert!((0.0..=100.0).contains(&p));
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in percentile"));
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = rank - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-9);
    }

    #[test]
    fn median_of_three() {
        assert_eq!(median(&[0.8, 0.9, 1.0]), 0.9);
        assert_eq!(median(&[1.0, 0.8, 0.9]), 0.9);
    }

    #[test]
    fn single_value_percentiles_collapse() {
        let xs = [0.37];
        assert_eq!(median(&xs), 0.37);
        assert_eq!(percentile(&xs, 10.0), 0.37);
        assert_eq!(percentile(&xs, 90.0), 0.37);
    }

    #[test]
    fn stderr_of_constant_is_zero() {
        let (m, se) = mean_and_stderr(&[2.0, 2.0, 2.0, 2.0]);
        assert_eq!(m, 2.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn interpolated_percentile() {
        // ranks 0..=3, p90 -> rank 2.7 between 3.0 and 4.0
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert!((percentile(&xs, 90.0) - 3.7).abs() < 1e-12);
    }
}
