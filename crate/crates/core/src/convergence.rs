//! Convergence of the n-partial dynamics as the truncation box grows.
//!
//! For each truncation radius n the study measures
//! u_k(n,t) = max_{i∈Λ_k} |q_i^{(n+1)}(t) − q_i^{(n)}(t)| + |p_i^{(n+1)}(t) − p_i^{(n)}(t)|,
//! where both flows start from the same configuration restricted to the two
//! boxes. The gap decays super-exponentially in n − k and drops below the
//! resolution of f64 coordinates long before it reaches f64 underflow, so it
//! is not obtained by subtracting two trajectories. Instead the larger box is
//! integrated directly and the difference δ = x^{(n)} − x^{(n+1)} is carried as
//! its own variable through the exact difference of the two Verlet maps. In
//! exact arithmetic this is the same quantity; in floating point it keeps full
//! relative precision down to ~1e-300.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::{steps_for, Verlet};
use crate::energy::q_statistic;
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::math;
use crate::potential::Potential;
use crate::state::PhaseState;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    /// Truncation radius n.
    pub n: usize,
    /// u_k(n, t).
    pub gap: f64,
    /// d_n(t) = max_{s≤t} max_{i∈Λ_n} |q_i^{(n)}(s) − q_i(0)| + |p_i^{(n)}(s) − p_i(0)|.
    pub displacement: f64,
    /// φ_n(t,x) = Q(x)·log(e + n) + t⁴.
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Observation radius k.
    pub k: usize,
    /// Comparison time t.
    pub t: f64,
    /// Q of the initial data on the largest box.
    pub q_initial: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of ln u_k against n; needs ≥ 2 positive gaps.
    pub log_slope: Option<f64>,
    /// Smallest swept n from which u_k(n′,t) ≤ 2^{−(n′−k)} holds for every
    /// larger swept n′.
    pub empirical_n_k: Option<usize>,
}

/// Sweeps truncation radii `radii` (each with k ≤ n < n_max) on initial data
/// defined on the largest box `outer`.
pub fn convergence_study(
    outer: &Lattice,
    pot: &Potential,
    initial: &PhaseState,
    k: usize,
    radii: &[usize],
    t: f64,
    dt: f64,
) -> Result<ConvergenceReport> {
    initial.check_on(outer)?;
    if radii.is_empty() {
        return Err(Error::InvalidConfig("no truncation radii given".into()));
    }
    for &n in radii {
        if n < k || n + 1 > outer.radius() {
            return Err(Error::InvalidConfig(format!(
                "truncation radius {n} must satisfy k = {k} <= n < n_max = {}",
                outer.radius()
            )));
        }
    }
    let q_initial = q_statistic(outer, pot, initial)?.value;
    let mut rows = Vec::with_capacity(radii.len());
    for &n in radii {
        let (gap, displacement) = truncation_gap(outer, pot, initial, n, k, t, dt).map_err(|e| Error::Truncation {
            radius: n,
            source: Box::new(e),
        })?;
        let phi = q_initial * math::ln(math::E + n as f64) + t * t * t * t;
        rows.push(ConvergenceRow {
            n,
            gap,
            displacement,
            phi,
        });
    }

    let positive: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.gap > 0.0)
        .map(|r| (r.n as f64, math::ln(r.gap)))
        .collect();
    let log_slope = if positive.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = positive.into_iter().unzip();
        stats::linear_fit(&x, &y).map(|f| f.slope)
    } else {
        None
    };

    let mut sorted = rows.clone();
    sorted.sort_by_key(|r| r.n);
    let mut empirical_n_k = None;
    for r in sorted.iter().rev() {
        let target = math::powf(2.0, -((r.n - k) as f64));
        if r.gap <= target {
            empirical_n_k = Some(r.n);
        } else {
            break;
        }
    }

    Ok(ConvergenceReport {
        k,
        t,
        q_initial,
        rows,
        log_slope,
        empirical_n_k,
    })
}

/// (u_k(n,t), d_n(t)) for one truncation radius n < n_max.
pub fn truncation_gap(
    outer: &Lattice,
    pot: &Potential,
    initial: &PhaseState,
    n: usize,
    k: usize,
    t: f64,
    dt: f64,
) -> Result<(f64, f64)> {
    if k > n || n + 1 > outer.radius() {
        return Err(Error::InvalidConfig(format!(
            "need k <= n < n_max, got k = {k}, n = {n}, n_max = {}",
            outer.radius()
        )));
    }
    let steps = steps_for(t, dt)?;
    let big = Lattice::new(outer.spec().with_radius(n + 1))?;
    let small = Lattice::new(outer.spec().with_radius(n))?;
    let embed = big.embedding_of(&small)?;
    let observed: Vec<usize> = {
        let obs = Lattice::new(outer.spec().with_radius(k))?;
        small.embedding_of(&obs)?
    };

    // Bonds of Λ_n sites that leave Λ_n but stay inside Λ_{n+1}.
    let mut outer_bonds: Vec<(usize, usize)> = Vec::new();
    let mut small_of_big = vec![usize::MAX; big.len()];
    for (i, &b) in embed.iter().enumerate() {
        small_of_big[b] = i;
    }
    for (i, &b) in embed.iter().enumerate() {
        for &j in big.neighbor_indices(b) {
            if small_of_big[j as usize] == usize::MAX {
                outer_bonds.push((i, j as usize));
            }
        }
    }

    let start = initial.restrict(outer, &big)?;
    let q0: Vec<f64> = embed.iter().map(|&b| start.q[b]).collect();
    let p0: Vec<f64> = embed.iter().map(|&b| start.p[b]).collect();
    let mut base = Verlet::new(&big, pot, start, dt)?;

    let len = small.len();
    let mut dq = vec![0.0; len];
    let mut dp = vec![0.0; len];
    let mut g = vec![0.0; len];
    let coupling = outer.coupling();
    let half = 0.5 * dt;

    let gap_force = |yq: &[f64], dq: &[f64], g: &mut [f64]| {
        for i in 0..len {
            let y = yq[embed[i]];
            let mut lap = 0.0;
            for &j in small.neighbor_indices(i) {
                lap += dq[i] - dq[j as usize];
            }
            g[i] = -pot.first_increment(y, dq[i]) - coupling * lap;
        }
        for &(i, b) in &outer_bonds {
            g[i] += coupling * (yq[embed[i]] - yq[b]);
        }
    };

    let mut displacement: f64 = 0.0;
    gap_force(base.q(), &dq, &mut g);
    for step in 1..=steps {
        for i in 0..len {
            dp[i] += half * g[i];
            dq[i] += dt * dp[i];
        }
        base.step()?;
        gap_force(base.q(), &dq, &mut g);
        let y = base.state();
        for i in 0..len {
            dp[i] += half * g[i];
            if !dp[i].is_finite() || !dq[i].is_finite() {
                return Err(Error::BlowUp {
                    site: i,
                    step,
                    time: step as f64 * dt,
                });
            }
            let b = embed[i];
            let moved = (y.q[b] + dq[i] - q0[i]).abs() + (y.p[b] + dp[i] - p0[i]).abs();
            displacement = displacement.max(moved);
        }
    }
    let gap = observed.iter().map(|&i| dq[i].abs() + dp[i].abs()).fold(0.0, f64::max);
    Ok((gap, displacement))
}
