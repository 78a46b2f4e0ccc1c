//! Small shared numeric helpers.
//!
//! Conventions used throughout the crate: variances and standard deviations
//! are population (divide by `n`) quantities, and percentiles interpolate
//! linearly between the two closest order statistics at fractional rank
//! `p/100 * (n - 1)`.

use crate::{Error, Result};

pub fn mean(values: &[f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance (divide by `n`, not `n - 1`).
pub fn population_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

pub fn population_stddev(values: &[f64]) -> f64 {
    population_variance(values).sqrt()
}

/// Percentile of `values` for `p` in `[0, 100]`.
///
/// Sorts a copy of the input; use [`percentile_sorted`] when the data is
/// already ordered.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    percentile_sorted(&sorted, p)
}

/// Percentile of an ascending slice for `p` in `[0, 100]`, interpolating
/// linearly between the closest ranks.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::Argument("percentile of an empty slice".into()));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::Argument(format!(
            "percentile {p} outside [0, 100]"
        )));
    }
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        return Ok(sorted[lo]);
    }
    let frac = rank - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mean_and_population_stddev() {
        let vals = [2.0, 2.0, 2.0, 2.0, 20.0];
        assert_abs_diff_eq!(mean(&vals), 5.6, epsilon = 1e-12);
        // Mean absolute deviation would be 5.76; the population stddev is 7.2.
        assert_abs_diff_eq!(population_stddev(&vals), 7.2, epsilon = 1e-12);
    }

    #[test]
    fn percentile_interpolates_between_ranks() {
        let vals = [1.0, 2.0, 3.0, 4.0];
        // rank = 0.25 * 3 = 0.75 -> between 1 and 2.
        assert_abs_diff_eq!(percentile(&vals, 25.0).unwrap(), 1.75, epsilon = 1e-12);
        assert_abs_diff_eq!(percentile(&vals, 50.0).unwrap(), 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(percentile(&vals, 100.0).unwrap(), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(percentile(&vals, 0.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn percentile_single_value() {
        assert_abs_diff_eq!(percentile(&[7.0], 90.0).unwrap(), 7.0, epsilon = 1e-12);
    }

    #[test]
    fn percentile_rejects_bad_input() {
        assert!(percentile(&[], 50.0).is_err());
        assert!(percentile(&[1.0], -1.0).is_err());
        assert!(percentile(&[1.0], 100.5).is_err());
    }

    #[test]
    fn percentile_is_order_insensitive() {
        let a = [5.0, 1.0, 3.0, 2.0, 4.0];
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        for p in [0.0, 10.0, 25.0, 50.0, 75.0, 90.0, 100.0] {
            assert_eq!(percentile(&a, p).unwrap(), percentile(&b, p).unwrap());
        }
    }
}
