use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::Lattice;

/// Positions and momenta on every site of a box, in the lattice's flat order.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhaseState {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::StateShape {
                expected: q.len(),
                found: p.len(),
            });
        }
        let s = PhaseState { q, p };
        s.check_finite()?;
        Ok(s)
    }

    pub fn zeros(len: usize) -> Self {
        PhaseState {
            q: vec![0.0; len],
            p: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self
            .q
            .iter()
            .zip(&self.p)
            .position(|(q, p)| !q.is_finite() || !p.is_finite())
        {
            Some(site) => Err(Error::NonFiniteState { site }),
            None => Ok(()),
        }
    }

    /// Checks shape against the lattice and finiteness of every entry.
    pub fn check_on(&self, lattice: &Lattice) -> Result<()> {
        if self.q.len() != lattice.len() || self.p.len() != lattice.len() {
            return Err(Error::StateShape {
                expected: lattice.len(),
                found: self.q.len().min(self.p.len()),
            });
        }
        self.check_finite()
    }

    /// Restriction to a smaller concentric box.
    pub fn restrict(&self, outer: &Lattice, inner: &Lattice) -> Result<PhaseState> {
        self.check_on(outer)?;
        let map = outer.embedding_of(inner)?;
        Ok(PhaseState {
            q: map.iter().map(|&j| self.q[j]).collect(),
            p: map.iter().map(|&j| self.p[j]).collect(),
        })
    }

    /// The state with every site sent to its mirror image i -> -i.
    pub fn reflected(&self, lattice: &Lattice) -> PhaseState {
        // Row-major order over a symmetric box reverses under reflection.
        debug_assert_eq!(self.len(), lattice.len());
        PhaseState {
            q: self.q.iter().rev().copied().collect(),
            p: self.p.iter().rev().copied().collect(),
        }
    }

    /// The state with all momenta negated.
    pub fn time_reversed(&self) -> PhaseState {
        PhaseState {
            q: self.q.clone(),
            p: self.p.iter().map(|p| -p).collect(),
        }
    }

    /// Max-abs distance between two states of equal shape.
    pub fn max_abs_diff(&self, other: &PhaseState) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .chain(self.p.iter().zip(&other.p))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
