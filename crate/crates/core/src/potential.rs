//! Quartic one-body potential U(ξ) = a4 ξ⁴ + a3 ξ³ + a2 ξ² + a1 ξ + a0.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

// Allowed undershoot below zero when checking U ≥ 0 at the critical points;
// admits potentials such as (ξ² - 1)² whose minimum is zero up to roundoff.
const MIN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potential {
    coeffs: [f64; 5],
}

impl Default for Potential {
    /// U(ξ) = ξ⁴/4.
    fn default() -> Self {
        Potential {
            coeffs: [0.0, 0.0, 0.0, 0.0, 0.25],
        }
    }
}

impl Potential {
    /// Coefficients in increasing degree: `[a0, a1, a2, a3, a4]`.
    ///
    /// Rejects a4 ≤ 0 and any polynomial that takes negative values.
    pub fn new(coeffs: [f64; 5]) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPotential("coefficients must be finite".into()));
        }
        if !(coeffs[4] > 0.0) {
            return Err(Error::InvalidPotential(format!(
                "leading coefficient a4 = {} must be positive",
                coeffs[4]
            )));
        }
        let pot = Potential { coeffs };
        let (xi, min) = pot.minimum();
        let scale = 1.0 + coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max);
        if min < -MIN_TOLERANCE * scale {
            return Err(Error::InvalidPotential(format!(
                "U({xi}) = {min} < 0; the potential must be non-negative"
            )));
        }
        Ok(pot)
    }

    pub fn coeffs(&self) -> [f64; 5] {
        self.coeffs
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let [a0, a1, a2, a3, a4] = self.coeffs;
        (((a4 * x + a3) * x + a2) * x + a1) * x + a0
    }

    /// U′(ξ).
    #[inline]
    pub fn first(&self, x: f64) -> f64 {
        let [_, a1, a2, a3, a4] = self.coeffs;
        ((4.0 * a4 * x + 3.0 * a3) * x + 2.0 * a2) * x + a1
    }

    /// U″(ξ).
    #[inline]
    pub fn second(&self, x: f64) -> f64 {
        let [_, _, a2, a3, a4] = self.coeffs;
        (12.0 * a4 * x + 6.0 * a3) * x + 2.0 * a2
    }

    /// U′(y + δ) − U′(y), evaluated in factored form so that the result keeps
    /// full relative precision when δ is far below the resolution of y.
    #[inline]
    pub fn first_increment(&self, y: f64, delta: f64) -> f64 {
        let [_, _, a2, a3, a4] = self.coeffs;
        let cubic = 3.0 * y * y + 3.0 * y * delta + delta * delta;
        delta * (4.0 * a4 * cubic + 3.0 * a3 * (2.0 * y + delta) + 2.0 * a2)
    }

    /// Global minimum (location, value) found among the real critical points.
    pub fn minimum(&self) -> (f64, f64) {
        self.critical_points()
            .into_iter()
            .map(|x| (x, self.value(x)))
            .fold(
                (0.0, f64::INFINITY),
                |best, cur| {
                    if cur.1 < best.1 {
                        cur
                    } else {
                        best
                    }
                },
            )
    }

    /// Real roots of U′. U″ splits the line into at most three intervals on
    /// which U′ is monotone; each sign change is bracketed and bisected.
    fn critical_points(&self) -> Vec<f64> {
        let [_, _, a2, a3, a4] = self.coeffs;
        // U''(x) = 12 a4 x^2 + 6 a3 x + 2 a2
        let (qa, qb, qc) = (12.0 * a4, 6.0 * a3, 2.0 * a2);
        let disc = qb * qb - 4.0 * qa * qc;
        let mut knots = Vec::new();
        if disc > 0.0 {
            let s = crate::math::sqrt(disc);
            knots.push((-qb - s) / (2.0 * qa));
            knots.push((-qb + s) / (2.0 * qa));
        }
        let reach = 1.0 + self.coeffs.iter().map(|c| c.abs()).sum::<f64>() / a4;
        let mut edges = Vec::with_capacity(knots.len() + 2);
        edges.push(-reach - knots.iter().map(|k| k.abs()).fold(0.0, f64::max));
        edges.extend_from_slice(&knots);
        edges.push(-edges[0]);

        let mut roots = Vec::new();
        for w in edges.windows(2) {
            let (mut lo, mut hi) = (w[0], w[1]);
            let (flo, fhi) = (self.first(lo), self.first(hi));
            if flo == 0.0 {
                roots.push(lo);
                continue;
            }
            if fhi == 0.0 {
                roots.push(hi);
                continue;
            }
            if (flo < 0.0) == (fhi < 0.0) {
                continue;
            }
            let rising = flo < 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                if (self.first(mid) < 0.0) == rising {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        // U'' vanishing at a double root leaves U' tangent to zero there.
        for k in knots {
            if self.first(k).abs() <= 1e-14 * (1.0 + k.abs()) {
                roots.push(k);
            }
        }
        if roots.is_empty() {
            roots.push(0.0);
        }
        roots
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_quartic_over_four() {
        let u = Potential::default();
        assert_eq!(u.value(2.0), 4.0);
        assert_eq!(u.first(2.0), 8.0);
        assert_eq!(u.second(1.0), 3.0);
    }

    #[test]
    fn rejects_non_positive_leading_coefficient() {
        assert!(Potential::new([0.0, 0.0, 1.0, 0.0, 0.0]).is_err());
        assert!(Potential::new([0.0, 0.0, 1.0, 0.0, -1.0]).is_err());
    }

    #[test]
    fn double_well_with_zero_minimum_is_admissible() {
        // (x^2 - 1)^2
        let u = Potential::new([1.0, 0.0, -2.0, 0.0, 1.0]).unwrap();
        let (xi, min) = u.minimum();
        assert!((xi.abs() - 1.0).abs() < 1e-9);
        assert!(min.abs() < 1e-12);
    }

    #[test]
    fn shifted_double_well_below_zero_is_rejected() {
        assert!(Potential::new([0.5, 0.0, -2.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn asymmetric_quartic_minimum() {
        // x^4 - x^3 + 1: critical points at 0 (inflection) and 3/4.
        let u = Potential::new([1.0, 0.0, 0.0, -1.0, 1.0]).unwrap();
        let (xi, min) = u.minimum();
        assert!((xi - 0.75).abs() < 1e-9);
        assert!((min - (1.0 - 27.0 / 256.0)).abs() < 1e-12);
        assert!(Potential::new([0.1, 0.0, 0.0, -1.0, 1.0]).is_err());
    }

    #[test]
    fn first_increment_matches_direct_difference() {
        let u = Potential::new([0.3, 0.1, 0.5, -0.2, 0.7]).unwrap();
        for &(y, d) in &[(0.3, 0.2), (-1.5, 0.7), (2.0, -3.0)] {
            let direct = u.first(y + d) - u.first(y);
            assert!((u.first_increment(y, d) - direct).abs() < 1e-12);
        }
        // far below the resolution of y
        let inc = u.first_increment(1.0, 1e-40);
        assert!((inc / 1e-40 - u.second(1.0)).abs() < 1e-12);
    }
}
