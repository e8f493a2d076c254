//! Small deterministic statistics helpers.

use alloc::vec::Vec;

use crate::math;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the mean of independent draws.
pub fn standard_error(xs: &[f64]) -> f64 {
    math::sqrt(variance(xs) / xs.len() as f64)
}

/// Standard error of the mean of a correlated series from `batches`
/// non-overlapping batch means. Trailing entries that do not fill a batch are
/// dropped.
pub fn batch_means_se(series: &[f64], batches: usize) -> f64 {
    let size = series.len() / batches.max(1);
    if batches < 2 || size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = series.chunks_exact(size).take(batches).map(mean).collect();
    standard_error(&means)
}

/// Median; NaN for an empty slice. NaN entries sort last.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Classical OLS standard error of the slope; NaN with fewer than 3 points.
    pub slope_se: f64,
}

/// Ordinary least squares y ≈ slope·x + intercept. None if x is constant or
/// fewer than two points are given.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let (x, y) = (&x[..n], &y[..n]);
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if n > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let r = b - (slope * a + intercept);
                r * r
            })
            .sum();
        math::sqrt(rss / (n - 2) as f64 / sxx)
    } else {
        f64::NAN
    };
    Some(LinearFit {
        slope,
        intercept,
        slope_se,
    })
}

/// Least-squares c for y ≈ c·x (fit through the origin).
pub fn proportional_fit(x: &[f64], y: &[f64]) -> Option<f64> {
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    if sxx <= 0.0 {
        return None;
    }
    Some(x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / sxx)
}

/// Half-range over midrange: the smallest r such that every value lies in
/// c·[1 − r, 1 + r] for some c > 0. Zero for a single value; NaN if any value
/// is non-positive or non-finite.
pub fn relative_spread(xs: &[f64]) -> f64 {
    if xs.is_empty() || xs.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return f64::NAN;
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo) / (hi + lo)
}

/// max / min of positive values; NaN otherwise.
pub fn max_min_ratio(xs: &[f64]) -> f64 {
    if xs.is_empty() || xs.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return f64::NAN;
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi / lo
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn fit_recovers_exact_line() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 2.5).abs() < 1e-12);
        assert!((f.intercept + 1.0).abs() < 1e-12);
        assert!(f.slope_se.abs() < 1e-12);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn spread_definition() {
        assert_eq!(relative_spread(&[1.0, 3.0]), 0.5);
        assert_eq!(relative_spread(&[2.0]), 0.0);
        assert!(relative_spread(&[0.0, 1.0]).is_nan());
        assert_eq!(max_min_ratio(&[1.0, 4.0, 2.0]), 4.0);
    }

    #[test]
    fn batch_means_of_constant_series() {
        assert_eq!(batch_means_se(&[1.0; 100], 10), 0.0);
    }
}
