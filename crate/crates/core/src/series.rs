//! Upper-bound series for the Jacobian blocks.
//!
//! bound(t, Q*, r; c1) = (1+t)·Σ_{n≥r} (H·√ln(e+n) / n²)^n,  H = c1·t²·√Q*,
//! with the n = 0 term (only present for r = 0) equal to 1. Terms are summed
//! in log space; the linear-space value saturates to +∞.

use crate::math;

const TINY_LN: f64 = -690.775_527_898_213_7; // ln(1e-300)
const LN_MAX: f64 = 709.782_712_893_384; // ln(f64::MAX)
const MAX_TERMS: usize = 10_000_000;

/// ln of the bound, or +∞ if the series does not settle within the term cap.
/// −∞ when every term vanishes.
pub fn log_series_bound(t: f64, q_sup: f64, j_dist: u64, c1: f64) -> f64 {
    math::ln(1.0 + t) + log_sum(t, q_sup, j_dist, c1)
}

/// The bound in linear space; +∞ on overflow.
pub fn series_bound(t: f64, q_sup: f64, j_dist: u64, c1: f64) -> f64 {
    let l = log_series_bound(t, q_sup, j_dist, c1);
    if l > LN_MAX {
        f64::INFINITY
    } else {
        (1.0 + t) * math::exp(log_sum(t, q_sup, j_dist, c1))
    }
}

/// ln Σ_{n≥r} (H·√ln(e+n)/n²)^n.
fn log_sum(t: f64, q_sup: f64, j_dist: u64, c1: f64) -> f64 {
    let h = c1 * t * t * math::sqrt(q_sup);
    let mut acc = f64::NEG_INFINITY;
    let mut start = j_dist as usize;
    if start == 0 {
        acc = 0.0;
        start = 1;
    }
    if !(h > 0.0) {
        return acc;
    }
    if !h.is_finite() {
        return f64::INFINITY;
    }
    let ln_h = math::ln(h);
    let mut small_ratio_run = 0;
    let mut prev = f64::NAN;
    for n in start..start.saturating_add(MAX_TERMS) {
        let nf = n as f64;
        let ln_base = ln_h + 0.5 * math::ln(math::ln(math::E + nf)) - 2.0 * math::ln(nf);
        let term = nf * ln_base;
        acc = log_add(acc, term);
        if ln_base < 0.0 {
            if term < TINY_LN {
                break;
            }
            if term - prev < -core::f64::consts::LN_2 {
                small_ratio_run += 1;
                if small_ratio_run >= 10 {
                    break;
                }
            } else {
                small_ratio_run = 0;
            }
        }
        prev = term;
        if n + 1 == start.saturating_add(MAX_TERMS) {
            return f64::INFINITY;
        }
    }
    acc
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + libm::log1p(math::exp(lo - hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vanishing_energy_scale() {
        assert_eq!(series_bound(1.0, 0.0, 3, 1.0), 0.0);
        assert_eq!(series_bound(2.0, 0.0, 0, 1.0), 3.0);
        assert_eq!(series_bound(0.0, 5.0, 0, 1.0), 1.0);
    }

    #[test]
    fn zero_distance_includes_unit_term() {
        assert!(series_bound(1.5, 2.0, 0, 0.3) >= 2.5);
    }

    #[test]
    fn first_term_at_distance_five() {
        let first = libm::pow(libm::sqrt(libm::log(core::f64::consts::E + 5.0)) / 25.0, 5.0);
        assert!((first - 6.11e-7).abs() < 0.01e-7);
        let total = series_bound(1.0, 1.0, 5, 1.0);
        assert!(total > 2.0 * first && total < 2.0 * first * 1.01);
    }

    #[test]
    fn monotone_in_c1_and_saturates() {
        let a = series_bound(2.0, 3.0, 4, 0.5);
        let b = series_bound(2.0, 3.0, 4, 1.0);
        assert!(b > a);
        assert_eq!(series_bound(100.0, 1e6, 1, 1e6), f64::INFINITY);
        assert!(log_series_bound(100.0, 1e6, 1, 1e6).is_finite());
    }
}
