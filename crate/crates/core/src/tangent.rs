//! Exact tangent flow of the discrete Verlet map.
//!
//! Two tangent vectors are carried alongside the base trajectory: the
//! derivative of the state with respect to q_{i0}(0) and with respect to
//! p_{i0}(0). Their j-components are the entries of the 2×2 Jacobian block
//!
//! ```text
//! Δ_j(t) = [ ∂q_j(t)/∂q_{i0}  ∂q_j(t)/∂p_{i0} ]
//!          [ ∂p_j(t)/∂q_{i0}  ∂p_j(t)/∂p_{i0} ]
//! ```
//!
//! The tangent step is the derivative of one Verlet step, with the force
//! linearization B(q) (B_jj = −U″(q_j) − #neighbours·K, B_jh = K for bonded
//! h). It is therefore consistent with the simulated flow to roundoff and
//! conserves the symplectic product of the two columns.

use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::{IntegratorConfig, Verlet};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, Site};
use crate::math;
use crate::potential::Potential;
use crate::state::PhaseState;

/// Per-site perturbation (δq_j, δp_j).
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub dq: Vec<f64>,
    pub dp: Vec<f64>,
}

impl TangentVector {
    pub fn zeros(len: usize) -> Self {
        TangentVector {
            dq: vec![0.0; len],
            dp: vec![0.0; len],
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        TangentVector {
            dq: self.dq.iter().map(|x| a * x).collect(),
            dp: self.dp.iter().map(|x| a * x).collect(),
        }
    }

    fn is_finite(&self) -> bool {
        self.dq.iter().chain(&self.dp).all(|x| x.is_finite())
    }

    fn max_finite_abs(&self) -> f64 {
        self.dq
            .iter()
            .chain(&self.dp)
            .filter(|x| x.is_finite())
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// The Jacobian columns with respect to the source site's (q, p).
#[derive(Debug, Clone, PartialEq)]
pub struct TangentPair {
    source: usize,
    /// ∂x(t)/∂q_{i0}(0).
    pub from_q: TangentVector,
    /// ∂x(t)/∂p_{i0}(0).
    pub from_p: TangentVector,
}

impl TangentPair {
    /// Unit perturbations of q and p at the source (flat index).
    pub fn canonical(len: usize, source: usize) -> Self {
        let mut from_q = TangentVector::zeros(len);
        let mut from_p = TangentVector::zeros(len);
        from_q.dq[source] = 1.0;
        from_p.dp[source] = 1.0;
        TangentPair { source, from_q, from_p }
    }

    pub fn from_vectors(source: usize, from_q: TangentVector, from_p: TangentVector) -> Self {
        TangentPair { source, from_q, from_p }
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn len(&self) -> usize {
        self.from_q.dq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Δ_j as `[[dq/dq0, dq/dp0], [dp/dq0, dp/dp0]]`.
    pub fn block(&self, j: usize) -> [[f64; 2]; 2] {
        [
            [self.from_q.dq[j], self.from_p.dq[j]],
            [self.from_q.dp[j], self.from_p.dp[j]],
        ]
    }
}

/// S = Σ_j (δq_j^{(q)} δp_j^{(p)} − δp_j^{(q)} δq_j^{(p)}); equal to 1 for the
/// canonical pair and conserved by the tangent flow.
pub fn symplectic_product(pair: &TangentPair) -> f64 {
    let (a, b) = (&pair.from_q, &pair.from_p);
    let mut s = 0.0;
    for j in 0..a.dq.len() {
        s += a.dq[j] * b.dp[j] - a.dp[j] * b.dq[j];
    }
    s
}

/// Entry B_{j,h} of the force linearization at `state`.
pub fn b_entry(lattice: &Lattice, pot: &Potential, state: &PhaseState, j: &Site, h: &Site) -> Result<f64> {
    state.check_on(lattice)?;
    let ji = lattice.index_of(j)?;
    let hi = lattice.index_of(h)?;
    let nbrs = lattice.neighbor_indices(ji);
    Ok(if ji == hi {
        -(pot.second(state.q[ji]) + nbrs.len() as f64 * lattice.coupling())
    } else if nbrs.contains(&(hi as u32)) {
        lattice.coupling()
    } else {
        0.0
    })
}

/// out = B(q)·v.
fn apply_linearization(lattice: &Lattice, pot: &Potential, q: &[f64], v: &[f64], out: &mut [f64]) {
    let k = lattice.coupling();
    for i in 0..v.len() {
        let mut lap = 0.0;
        for &j in lattice.neighbor_indices(i) {
            lap += v[i] - v[j as usize];
        }
        out[i] = -pot.second(q[i]) * v[i] - k * lap;
    }
}

/// Advances a tangent pair by the exact derivative of one Verlet step taken
/// from positions `q_before` to `q_after`:
/// δp ← δp + (dt/2)·B(q_before)δq; δq ← δq + dt·δp; δp ← δp + (dt/2)·B(q_after)δq.
pub fn tangent_step(
    lattice: &Lattice,
    pot: &Potential,
    q_before: &[f64],
    q_after: &[f64],
    tangent: &TangentPair,
    dt: f64,
) -> Result<TangentPair> {
    let len = lattice.len();
    if q_before.len() != len || q_after.len() != len || tangent.len() != len {
        return Err(Error::StateShape {
            expected: len,
            found: tangent.len().min(q_before.len()).min(q_after.len()),
        });
    }
    let mut next = tangent.clone();
    let mut scratch = vec![0.0; len];
    let half = 0.5 * dt;
    for v in [&mut next.from_q, &mut next.from_p] {
        apply_linearization(lattice, pot, q_before, &v.dq, &mut scratch);
        for i in 0..len {
            v.dp[i] += half * scratch[i];
            v.dq[i] += dt * v.dp[i];
        }
        apply_linearization(lattice, pot, q_after, &v.dq, &mut scratch);
        for i in 0..len {
            v.dp[i] += half * scratch[i];
        }
    }
    if !next.from_q.is_finite() || !next.from_p.is_finite() {
        return Err(tangent_overflow(&next, 1, dt));
    }
    Ok(next)
}

fn tangent_overflow(pair: &TangentPair, step: usize, dt: f64) -> Error {
    let m = pair.from_q.max_finite_abs().max(pair.from_p.max_finite_abs());
    Error::TangentBlowUp {
        step,
        time: step as f64 * dt,
        max_log10: if m > 0.0 { math::log10(m) } else { f64::NEG_INFINITY },
    }
}

/// Jacobian blocks Δ_j(t) for every site at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianField {
    pub t: f64,
    /// Flat index of the perturbed site i0.
    pub source: usize,
    pub blocks: Vec<[[f64; 2]; 2]>,
    /// Uniform norm: max absolute entry of each block.
    pub norms: Vec<f64>,
}

impl JacobianField {
    pub fn from_pair(t: f64, pair: &TangentPair) -> Self {
        let blocks: Vec<[[f64; 2]; 2]> = (0..pair.len()).map(|j| pair.block(j)).collect();
        let norms = blocks.iter().map(block_norm).collect();
        JacobianField {
            t,
            source: pair.source(),
            blocks,
            norms,
        }
    }
}

/// Max absolute entry of a 2×2 block.
pub fn block_norm(b: &[[f64; 2]; 2]) -> f64 {
    b[0][0].abs().max(b[0][1].abs()).max(b[1][0].abs()).max(b[1][1].abs())
}

/// Base trajectory and tangent pair advanced in lockstep.
#[derive(Debug, Clone)]
pub struct TangentFlow<'a> {
    lattice: &'a Lattice,
    pot: &'a Potential,
    base: Verlet<'a>,
    pair: TangentPair,
    // B(q)·δq for the current base positions, per column.
    lin_q: Vec<f64>,
    lin_p: Vec<f64>,
}

impl<'a> TangentFlow<'a> {
    pub fn new(lattice: &'a Lattice, pot: &'a Potential, initial: PhaseState, source: &Site, dt: f64) -> Result<Self> {
        let src = lattice.index_of(source)?;
        let base = Verlet::new(lattice, pot, initial, dt)?;
        let pair = TangentPair::canonical(lattice.len(), src);
        let mut lin_q = vec![0.0; lattice.len()];
        let mut lin_p = vec![0.0; lattice.len()];
        apply_linearization(lattice, pot, base.q(), &pair.from_q.dq, &mut lin_q);
        apply_linearization(lattice, pot, base.q(), &pair.from_p.dq, &mut lin_p);
        Ok(TangentFlow {
            lattice,
            pot,
            base,
            pair,
            lin_q,
            lin_p,
        })
    }

    pub fn state(&self) -> &PhaseState {
        self.base.state()
    }

    pub fn pair(&self) -> &TangentPair {
        &self.pair
    }

    pub fn time(&self) -> f64 {
        self.base.time()
    }

    pub fn steps_taken(&self) -> usize {
        self.base.steps_taken()
    }

    pub fn field(&self) -> JacobianField {
        JacobianField::from_pair(self.time(), &self.pair)
    }

    pub fn step(&mut self) -> Result<()> {
        let dt = self.base.dt();
        let half = 0.5 * dt;
        let len = self.lattice.len();
        for (v, lin) in [
            (&mut self.pair.from_q, &self.lin_q),
            (&mut self.pair.from_p, &self.lin_p),
        ] {
            for i in 0..len {
                v.dp[i] += half * lin[i];
                v.dq[i] += dt * v.dp[i];
            }
        }
        self.base.step()?;
        let q = self.base.q();
        for (v, lin) in [
            (&mut self.pair.from_q, &mut self.lin_q),
            (&mut self.pair.from_p, &mut self.lin_p),
        ] {
            apply_linearization(self.lattice, self.pot, q, &v.dq, lin);
            for i in 0..len {
                v.dp[i] += half * lin[i];
            }
        }
        if !self.pair.from_q.is_finite() || !self.pair.from_p.is_finite() {
            return Err(tangent_overflow(&self.pair, self.steps_taken(), dt));
        }
        Ok(())
    }

    pub fn advance(&mut self, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }
}

/// Jacobian fields of Φ_t with respect to x_{i0} on the recording grid of
/// `cfg`, starting with the identity-at-source field at t = 0.
pub fn jacobian_field(
    lattice: &Lattice,
    pot: &Potential,
    initial: &PhaseState,
    source: &Site,
    cfg: &IntegratorConfig,
) -> Result<Vec<JacobianField>> {
    cfg.validate()?;
    let mut flow = TangentFlow::new(lattice, pot, initial.clone(), source, cfg.dt)?;
    let steps = cfg.steps();
    let mut out = vec![flow.field()];
    while flow.steps_taken() < steps {
        flow.step()?;
        if flow.steps_taken() % cfg.record_stride == 0 {
            out.push(flow.field());
        }
    }
    Ok(out)
}
