//! Measure-level diagnostics on sampled ensembles: exponential moments of the
//! local energy, the tail of Q, and good-set membership along the flow.

use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::{steps_for, Verlet};
use crate::energy::{q_statistic, EnergyTable};
use crate::error::{Error, Result};
use crate::lattice::{Cube, Lattice};
use crate::math;
use crate::potential::Potential;
use crate::state::PhaseState;
use crate::stats;

/// ln(f64::MAX), the largest exponent exp() can take.
const LN_MAX: f64 = 709.782_712_893_384;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeEstimate {
    pub cube: Cube,
    /// Ĉ = (2k+1)^{−d}·ln((1/M)·Σ exp(λ·W)).
    pub c_hat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperstabilityReport {
    pub lambda: f64,
    pub samples: usize,
    pub estimates: Vec<CubeEstimate>,
    /// max over cubes of Ĉ.
    pub c_omega: f64,
    /// OLS slope of Ĉ against k over all cubes.
    pub slope: f64,
    /// Delete-one-block jackknife standard error of the slope; NaN unless at
    /// least two blocks were requested and every block is non-empty.
    pub slope_se: f64,
}

/// Ĉ(ν,k) for every cube in `cubes`, with the slope of Ĉ in k and its
/// jackknife error over `blocks` contiguous blocks of samples.
pub fn superstability_diagnostic(
    lattice: &Lattice,
    pot: &Potential,
    ensemble: &[PhaseState],
    lambda: f64,
    cubes: &[Cube],
    blocks: usize,
) -> Result<SuperstabilityReport> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidConfig(alloc::format!(
            "lambda = {lambda} must be positive"
        )));
    }
    if ensemble.is_empty() || cubes.is_empty() {
        return Err(Error::InvalidConfig("superstability needs samples and cubes".into()));
    }
    for c in cubes {
        if !lattice.cube_fits(c) {
            return Err(Error::CubeOutsideBox {
                center: c.center,
                radius: c.radius,
                box_radius: lattice.radius(),
            });
        }
    }
    let m = ensemble.len();
    let blocks = blocks.clamp(1, m);
    let block_of = |s: usize| s * blocks / m;

    // Per block and cube: Σ exp(λ(W − V)) with V the cube volume (W ≥ V).
    let nc = cubes.len();
    let mut sums = vec![0.0; blocks * nc];
    let mut max_w: f64 = 0.0;
    for (s, state) in ensemble.iter().enumerate() {
        state.check_on(lattice)?;
        let table = EnergyTable::new(lattice, pot, state);
        let row = &mut sums[block_of(s) * nc..(block_of(s) + 1) * nc];
        for (c, cube) in cubes.iter().enumerate() {
            let w = table.local_energy(cube);
            max_w = max_w.max(w);
            row[c] += math::exp(lambda * (w - cube.volume() as f64));
        }
    }
    if !(lambda * max_w < LN_MAX) {
        return Err(Error::LambdaTooLarge {
            lambda,
            max_w,
            suggested: 0.5 * LN_MAX / max_w,
        });
    }

    let estimate = |skip: Option<usize>| -> Vec<f64> {
        let count = match skip {
            Some(b) => m - (0..m).filter(|&s| block_of(s) == b).count(),
            None => m,
        };
        (0..nc)
            .map(|c| {
                let total: f64 = (0..blocks).filter(|&b| Some(b) != skip).map(|b| sums[b * nc + c]).sum();
                let v = cubes[c].volume() as f64;
                (lambda * v + math::ln(total / count as f64)) / v
            })
            .collect()
    };
    let ks: Vec<f64> = cubes.iter().map(|c| c.radius as f64).collect();
    let slope_of = |c_hat: &[f64]| stats::linear_fit(&ks, c_hat).map_or(f64::NAN, |f| f.slope);

    let full = estimate(None);
    let slope = slope_of(&full);
    let slope_se = if blocks >= 2 {
        let partial: Vec<f64> = (0..blocks).map(|b| slope_of(&estimate(Some(b)))).collect();
        let mean = stats::mean(&partial);
        let ss: f64 = partial.iter().map(|s| (s - mean) * (s - mean)).sum();
        math::sqrt((blocks - 1) as f64 / blocks as f64 * ss)
    } else {
        f64::NAN
    };
    let c_omega = full.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let estimates = cubes
        .iter()
        .zip(&full)
        .map(|(&cube, &c_hat)| CubeEstimate { cube, c_hat })
        .collect();
    Ok(SuperstabilityReport {
        lambda,
        samples: m,
        estimates,
        c_omega,
        slope,
        slope_se,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    pub grid: Vec<f64>,
    /// Empirical P(Q > N) at each grid point.
    pub tail: Vec<f64>,
    /// Slope of ln P against N over grid points with P > 5/M.
    pub slope: Option<f64>,
}

/// Empirical survival function of Q on `grid`.
pub fn q_tail_diagnostic(q_values: &[f64], grid: &[f64]) -> TailReport {
    let m = q_values.len();
    let tail: Vec<f64> = grid
        .iter()
        .map(|&n| {
            if m == 0 {
                0.0
            } else {
                q_values.iter().filter(|&&q| q > n).count() as f64 / m as f64
            }
        })
        .collect();
    let floor = 5.0 / m.max(1) as f64;
    let (x, y): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .zip(&tail)
        .filter(|(_, &p)| p > floor)
        .map(|(&n, &p)| (n, math::ln(p)))
        .unzip();
    let slope = stats::linear_fit(&x, &y).map(|f| f.slope);
    TailReport {
        grid: grid.to_vec(),
        tail,
        slope,
    }
}

/// Q of each sample.
pub fn q_values(lattice: &Lattice, pot: &Potential, ensemble: &[PhaseState]) -> Result<Vec<f64>> {
    ensemble
        .iter()
        .map(|s| q_statistic(lattice, pot, s).map(|q| q.value))
        .collect()
}

/// `points` evenly spaced values from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodSetRow {
    pub k: usize,
    /// ln^δ k.
    pub threshold: f64,
    /// Samples with Q(Φ_k x) > ln^δ k.
    pub failures: usize,
    /// Samples whose evolution blew up before time k.
    pub blowups: usize,
    /// Samples that reached time k.
    pub evaluated: usize,
}

impl GoodSetRow {
    pub fn failure_fraction(&self) -> f64 {
        if self.evaluated == 0 {
            f64::NAN
        } else {
            self.failures as f64 / self.evaluated as f64
        }
    }
}

/// For each sample and each integer time k in `k_list`, tests
/// Q(Φ_k x) ≤ ln^δ k.
pub fn good_set_diagnostic(
    lattice: &Lattice,
    pot: &Potential,
    ensemble: &[PhaseState],
    delta: f64,
    k_list: &[usize],
    dt: f64,
) -> Result<Vec<GoodSetRow>> {
    if !(delta > 1.0) {
        return Err(Error::InvalidConfig(alloc::format!("delta = {delta} must exceed 1")));
    }
    if k_list.iter().any(|&k| k < 3) {
        return Err(Error::InvalidConfig("good-set times must be >= 3".into()));
    }
    let mut ks = k_list.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let mut rows: Vec<GoodSetRow> = ks
        .iter()
        .map(|&k| GoodSetRow {
            k,
            threshold: math::powf(math::ln(k as f64), delta),
            failures: 0,
            blowups: 0,
            evaluated: 0,
        })
        .collect();
    let step_counts = ks
        .iter()
        .map(|&k| steps_for(k as f64, dt))
        .collect::<Result<Vec<_>>>()?;
    for sample in ensemble {
        let mut v = Verlet::new(lattice, pot, sample.clone(), dt)?;
        let mut dead = false;
        for (row, &target) in rows.iter_mut().zip(&step_counts) {
            if !dead && v.advance(target - v.steps_taken()).is_err() {
                dead = true;
            }
            if dead {
                row.blowups += 1;
                continue;
            }
            row.evaluated += 1;
            if q_statistic(lattice, pot, v.state())?.value > row.threshold {
                row.failures += 1;
            }
        }
    }
    Ok(rows)
}
