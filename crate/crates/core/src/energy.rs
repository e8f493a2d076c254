//! Force field and energy observables of the truncated lattice.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::{Cube, Lattice, Site, MAX_DIM};
use crate::potential::Potential;
use crate::state::PhaseState;

/// F_i = −U′(q_i) − K Σ_{j ∈ Λ_n, |j−i|=1} (q_i − q_j), without checks.
#[inline]
pub(crate) fn force_at(lattice: &Lattice, pot: &Potential, q: &[f64], i: usize) -> f64 {
    let qi = q[i];
    let mut coupling = 0.0;
    for &j in lattice.neighbor_indices(i) {
        coupling += qi - q[j as usize];
    }
    -pot.first(qi) - lattice.coupling() * coupling
}

/// Fills `out` with the force on every site.
pub(crate) fn forces_into(lattice: &Lattice, pot: &Potential, q: &[f64], out: &mut [f64]) {
    for (i, f) in out.iter_mut().enumerate() {
        *f = force_at(lattice, pot, q, i);
    }
}

/// Force (acceleration) on one site.
pub fn force(lattice: &Lattice, pot: &Potential, state: &PhaseState, site: &Site) -> Result<f64> {
    state.check_on(lattice)?;
    let i = lattice.index_of(site)?;
    let f = force_at(lattice, pot, &state.q, i);
    if f.is_finite() {
        Ok(f)
    } else {
        Err(Error::ForceOverflow { site: *site })
    }
}

/// Forces on all sites, in storage order.
pub fn forces(lattice: &Lattice, pot: &Potential, state: &PhaseState) -> Result<Vec<f64>> {
    state.check_on(lattice)?;
    let mut out = vec![0.0; lattice.len()];
    forces_into(lattice, pot, &state.q, &mut out);
    if let Some(i) = out.iter().position(|f| !f.is_finite()) {
        return Err(Error::ForceOverflow {
            site: lattice.site_of(i),
        });
    }
    Ok(out)
}

/// Total energy Σ_i [p_i²/2 + U(q_i)] + (K/2) Σ_{bonds in Λ_n} (q_i − q_j)².
pub fn hamiltonian(lattice: &Lattice, pot: &Potential, state: &PhaseState) -> Result<f64> {
    state.check_on(lattice)?;
    let h = hamiltonian_unchecked(lattice, pot, &state.q, &state.p);
    if h.is_finite() {
        Ok(h)
    } else {
        Err(Error::EnergyOverflow)
    }
}

pub(crate) fn hamiltonian_unchecked(lattice: &Lattice, pot: &Potential, q: &[f64], p: &[f64]) -> f64 {
    let half_k = 0.5 * lattice.coupling();
    let mut h = 0.0;
    for i in 0..q.len() {
        h += 0.5 * p[i] * p[i] + pot.value(q[i]);
        for &j in lattice.neighbor_indices(i) {
            let j = j as usize;
            if j > i {
                let d = q[i] - q[j];
                h += half_k * d * d;
            }
        }
    }
    h
}

/// W_{ν,k}: Σ_{i∈Λ_{ν,k}} {p_i²/2 + U(q_i) + 1} + Σ_{i,j∈Λ_{ν,k}, |i−j|=1} (K/4)(q_i − q_j)².
///
/// The pair sum runs over ordered pairs, so every bond inside the cube
/// contributes (K/2)(q_i − q_j)².
pub fn local_energy(lattice: &Lattice, pot: &Potential, state: &PhaseState, cube: &Cube) -> Result<f64> {
    state.check_on(lattice)?;
    let sites = lattice.cube_indices(cube)?;
    let mut inside = vec![false; lattice.len()];
    for &i in &sites {
        inside[i] = true;
    }
    let quarter_k = 0.25 * lattice.coupling();
    let mut w = 0.0;
    for &i in &sites {
        let (q, p) = (state.q[i], state.p[i]);
        w += 0.5 * p * p + pot.value(q) + 1.0;
        for &j in lattice.neighbor_indices(i) {
            let j = j as usize;
            if inside[j] {
                let d = q - state.q[j];
                w += quarter_k * d * d;
            }
        }
    }
    if w.is_finite() {
        Ok(w)
    } else {
        Err(Error::EnergyOverflow)
    }
}

/// dW_{ν,k}/dt = −K Σ* (q_i − q_j) p_i over the bonds with i ∈ Λ_{ν,k} and
/// j ∈ Λ_n ∖ Λ_{ν,k}.
pub fn energy_flux(lattice: &Lattice, state: &PhaseState, cube: &Cube) -> Result<f64> {
    state.check_on(lattice)?;
    let sites = lattice.cube_indices(cube)?;
    let mut inside = vec![false; lattice.len()];
    for &i in &sites {
        inside[i] = true;
    }
    let mut flux = 0.0;
    for &i in &sites {
        for &j in lattice.neighbor_indices(i) {
            let j = j as usize;
            if !inside[j] {
                flux += (state.q[i] - state.q[j]) * state.p[i];
            }
        }
    }
    Ok(-lattice.coupling() * flux)
}

/// Value of the Q statistic together with the cube attaining it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QStatistic {
    pub value: f64,
    pub cube: Cube,
}

/// Q(x) = sup over admissible cubes of W_{ν,k}/(2k+1)^d, restricted to cubes
/// inside the box. Ties keep the first cube in enumeration order.
pub fn q_statistic(lattice: &Lattice, pot: &Potential, state: &PhaseState) -> Result<QStatistic> {
    state.check_on(lattice)?;
    let table = EnergyTable::new(lattice, pot, state);
    let mut best: Option<QStatistic> = None;
    for cube in lattice.admissible_cubes() {
        let density = table.local_energy(&cube) / cube.volume() as f64;
        if best.is_none_or(|b| density > b.value) {
            best = Some(QStatistic { value: density, cube });
        }
    }
    let best = best.ok_or(Error::NoAdmissibleCube {
        radius: lattice.radius(),
    })?;
    if best.value.is_finite() {
        Ok(best)
    } else {
        Err(Error::EnergyOverflow)
    }
}

/// Summed-area tables answering W_{ν,k} queries in O(2^d · d).
///
/// One table holds the site terms p²/2 + U + 1; one table per axis holds the
/// bond energy (K/2)(q_i − q_{i+e_l})² stored at the lower endpoint i.
pub struct EnergyTable<'a> {
    lattice: &'a Lattice,
    sites: SummedArea,
    bonds: Vec<SummedArea>,
}

impl<'a> EnergyTable<'a> {
    pub fn new(lattice: &'a Lattice, pot: &Potential, state: &PhaseState) -> Self {
        let site_terms: Vec<f64> = state
            .q
            .iter()
            .zip(&state.p)
            .map(|(&q, &p)| 0.5 * p * p + pot.value(q) + 1.0)
            .collect();
        let half_k = 0.5 * lattice.coupling();
        let side = lattice.side();
        let bonds = (0..lattice.dim())
            .map(|axis| {
                let stride = lattice.stride(axis);
                let terms: Vec<f64> = (0..lattice.len())
                    .map(|i| {
                        if lattice.axis_offset(i, axis) + 1 < side {
                            let d = state.q[i] - state.q[i + stride];
                            half_k * d * d
                        } else {
                            0.0
                        }
                    })
                    .collect();
                SummedArea::new(lattice.dim(), side, &terms)
            })
            .collect();
        EnergyTable {
            lattice,
            sites: SummedArea::new(lattice.dim(), side, &site_terms),
            bonds,
        }
    }

    /// W of a cube that must fit in the box.
    pub fn local_energy(&self, cube: &Cube) -> f64 {
        let (lo, hi) = self.lattice.cube_bounds(cube);
        let mut w = self.sites.sum(&lo, &hi);
        for (axis, table) in self.bonds.iter().enumerate() {
            if hi[axis] > lo[axis] {
                let mut h = hi;
                h[axis] -= 1;
                w += table.sum(&lo, &h);
            }
        }
        w
    }
}

/// d-dimensional inclusive prefix sums with one layer of zero padding.
struct SummedArea {
    dim: usize,
    side: usize,
    data: Vec<f64>,
}

impl SummedArea {
    fn new(dim: usize, side: usize, values: &[f64]) -> Self {
        let ps = side + 1;
        let mut data = vec![0.0; ps.pow(dim as u32)];
        let mut coords = [0usize; MAX_DIM];
        for (idx, &v) in values.iter().enumerate() {
            let mut rem = idx;
            for l in (0..dim).rev() {
                coords[l] = rem % side;
                rem /= side;
            }
            data[Self::padded(dim, ps, &coords, 1)] = v;
        }
        // running sums along each axis in turn
        for axis in 0..dim {
            let stride = ps.pow((dim - 1 - axis) as u32);
            for i in 0..data.len() {
                if !(i / stride).is_multiple_of(ps) {
                    data[i] += data[i - stride];
                }
            }
        }
        SummedArea { dim, side, data }
    }

    #[inline]
    fn padded(dim: usize, ps: usize, coords: &[usize; MAX_DIM], shift: usize) -> usize {
        (0..dim).fold(0, |acc, l| acc * ps + coords[l] + shift)
    }

    /// Sum over the inclusive offset box [lo, hi].
    fn sum(&self, lo: &[usize; MAX_DIM], hi: &[usize; MAX_DIM]) -> f64 {
        let ps = self.side + 1;
        let mut total = 0.0;
        for corner in 0..(1usize << self.dim) {
            let mut c = [0usize; MAX_DIM];
            let mut low_count = 0;
            for l in 0..self.dim {
                if corner >> l & 1 == 1 {
                    c[l] = lo[l];
                    low_count += 1;
                } else {
                    c[l] = hi[l] + 1;
                }
            }
            let v = self.data[Self::padded(self.dim, ps, &c, 0)];
            if low_count % 2 == 0 {
                total += v;
            } else {
                total -= v;
            }
        }
        total
    }
}
