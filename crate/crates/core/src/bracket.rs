//! Poisson brackets {f_i, Φ_t g_j} through the Jacobian blocks.

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Site};
use crate::math;
use crate::state::PhaseState;
use crate::tangent::{block_norm, JacobianField};

/// A one-site observable f(q, p).
pub trait Observable {
    fn value(&self, q: f64, p: f64) -> f64;

    /// (∂f/∂q, ∂f/∂p).
    fn gradient(&self, q: f64, p: f64) -> (f64, f64);

    /// sup over (q, p) of max(|∂f/∂q|, |∂f/∂p|), if known.
    fn gradient_bound(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Position;

#[derive(Debug, Clone, Copy, Default)]
pub struct Momentum;

#[derive(Debug, Clone, Copy, Default)]
pub struct TanhPosition;

#[derive(Debug, Clone, Copy, Default)]
pub struct TanhMomentum;

impl Observable for Position {
    fn value(&self, q: f64, _p: f64) -> f64 {
        q
    }
    fn gradient(&self, _q: f64, _p: f64) -> (f64, f64) {
        (1.0, 0.0)
    }
    fn gradient_bound(&self) -> Option<f64> {
        Some(1.0)
    }
}

impl Observable for Momentum {
    fn value(&self, _q: f64, p: f64) -> f64 {
        p
    }
    fn gradient(&self, _q: f64, _p: f64) -> (f64, f64) {
        (0.0, 1.0)
    }
    fn gradient_bound(&self) -> Option<f64> {
        Some(1.0)
    }
}

fn sech2(x: f64) -> f64 {
    let t = math::tanh(x);
    1.0 - t * t
}

impl Observable for TanhPosition {
    fn value(&self, q: f64, _p: f64) -> f64 {
        math::tanh(q)
    }
    fn gradient(&self, q: f64, _p: f64) -> (f64, f64) {
        (sech2(q), 0.0)
    }
    fn gradient_bound(&self) -> Option<f64> {
        Some(1.0)
    }
}

impl Observable for TanhMomentum {
    fn value(&self, _q: f64, p: f64) -> f64 {
        math::tanh(p)
    }
    fn gradient(&self, _q: f64, p: f64) -> (f64, f64) {
        (0.0, sech2(p))
    }
    fn gradient_bound(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// {f_i, Φ_t g_j}(x) by the chain rule:
///
/// ∂f/∂q_i·(∂g/∂q·∂q_j/∂p_i + ∂g/∂p·∂p_j/∂p_i) − ∂f/∂p_i·(∂g/∂q·∂q_j/∂q_i + ∂g/∂p·∂p_j/∂q_i)
///
/// with ∇f taken at `initial` (site i) and ∇g at `state_t` (site j). The field
/// must have been computed for source i. When both observables declare
/// gradient bounds, |result| ≤ 4·‖∇f‖∞·‖∇g‖∞·‖Δ_j‖ is checked.
#[allow(clippy::too_many_arguments)]
pub fn poisson_bracket(
    f: &dyn Observable,
    g: &dyn Observable,
    i: &Site,
    j: &Site,
    lattice: &Lattice,
    field: &JacobianField,
    initial: &PhaseState,
    state_t: &PhaseState,
) -> Result<f64> {
    initial.check_on(lattice)?;
    state_t.check_on(lattice)?;
    let ii = lattice.index_of(i)?;
    let jj = lattice.index_of(j)?;
    if field.source != ii {
        return Err(Error::SourceMismatch {
            expected: ii,
            found: field.source,
        });
    }
    if field.blocks.len() != lattice.len() {
        return Err(Error::StateShape {
            expected: lattice.len(),
            found: field.blocks.len(),
        });
    }
    let (fq, fp) = f.gradient(initial.q[ii], initial.p[ii]);
    let (gq, gp) = g.gradient(state_t.q[jj], state_t.p[jj]);
    let [[qq, qp], [pq, pp]] = field.blocks[jj];
    let value = fq * (gq * qp + gp * pp) - fp * (gq * qq + gp * pq);
    if let (Some(bf), Some(bg)) = (f.gradient_bound(), g.gradient_bound()) {
        let bound = 4.0 * bf * bg * block_norm(&field.blocks[jj]);
        if value.abs() > bound * (1.0 + 1e-12) {
            return Err(Error::BracketBound { value, bound });
        }
    }
    Ok(value)
}
