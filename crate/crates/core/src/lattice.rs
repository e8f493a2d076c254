//! Box geometry Λ_n = {-n..n}^d with free boundary.
//!
//! Sites are stored in a flat array in row-major multi-index order: the last
//! coordinate varies fastest and coordinate `c` maps to offset `c + n`. This
//! ordering is part of the public contract; serialized states rely on it.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// A lattice point of Z^d, d ≤ 3.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    coords: [i64; MAX_DIM],
    dim: u8,
}

impl Site {
    /// Builds a site from its coordinates. Panics if more than three are given.
    pub fn new(coords: &[i64]) -> Self {
        assert!(
            !coords.is_empty() && coords.len() <= MAX_DIM,
            "site dimension must be 1..=3"
        );
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Site {
            coords: c,
            dim: coords.len() as u8,
        }
    }

    pub fn origin(dim: usize) -> Self {
        Site::new(&[0; MAX_DIM][..dim])
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    /// ℓ1 norm |i|.
    pub fn l1_norm(&self) -> u64 {
        self.coords().iter().map(|c| c.unsigned_abs()).sum()
    }

    /// ℓ1 distance |i - j|.
    pub fn l1_distance(&self, other: &Site) -> u64 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| (a - b).unsigned_abs())
            .sum()
    }

    /// Reflection i -> -i.
    pub fn reflected(&self) -> Site {
        let mut s = *self;
        for c in &mut s.coords {
            *c = -*c;
        }
        s
    }

    fn max_abs(&self) -> u64 {
        self.coords().iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dim == 1 {
            return write!(f, "{}", self.coords[0]);
        }
        f.write_str("(")?;
        for (l, c) in self.coords().iter().enumerate() {
            if l > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

/// Geometry and coupling of the truncated lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    /// Spatial dimension d.
    pub dim: usize,
    /// Box radius n: the box is {-n..n}^d.
    pub radius: usize,
    /// Nearest-neighbour coupling K.
    pub coupling: f64,
}

impl LatticeSpec {
    pub fn new(dim: usize, radius: usize, coupling: f64) -> Result<Self> {
        let spec = LatticeSpec { dim, radius, coupling };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_DIM).contains(&self.dim) {
            return Err(Error::InvalidLattice(format!("dimension {} not in 1..=3", self.dim)));
        }
        if self.radius < 1 {
            return Err(Error::InvalidLattice("box radius must be >= 1".into()));
        }
        // K = 0 is accepted: the decoupled chain is the reference case for
        // several diagnostics.
        if !(self.coupling >= 0.0) || !self.coupling.is_finite() {
            return Err(Error::InvalidLattice(format!(
                "coupling K = {} must be finite and non-negative",
                self.coupling
            )));
        }
        Ok(())
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn site_count(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn with_radius(&self, radius: usize) -> LatticeSpec {
        LatticeSpec { radius, ..*self }
    }
}

/// Cube Λ_{ν,k} of center ν and side 2k+1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cube {
    pub center: Site,
    pub radius: usize,
}

impl Cube {
    pub fn new(center: Site, radius: usize) -> Self {
        Cube { center, radius }
    }

    /// Number of sites (2k+1)^d.
    pub fn volume(&self) -> usize {
        (2 * self.radius + 1).pow(self.center.dim() as u32)
    }
}

/// A box together with its precomputed neighbour table.
#[derive(Debug, Clone)]
pub struct Lattice {
    spec: LatticeSpec,
    side: usize,
    len: usize,
    strides: [usize; MAX_DIM],
    // CSR neighbour lists: for each axis, -e_l then +e_l.
    nbr_start: Vec<u32>,
    nbr: Vec<u32>,
}

impl Lattice {
    pub fn new(spec: LatticeSpec) -> Result<Self> {
        spec.validate()?;
        let side = spec.side();
        let len = spec.site_count();
        if len > u32::MAX as usize {
            return Err(Error::InvalidLattice(format!("{len} sites is too many")));
        }
        let mut strides = [0; MAX_DIM];
        let mut s = 1;
        for l in (0..spec.dim).rev() {
            strides[l] = s;
            s *= side;
        }
        let mut lattice = Lattice {
            spec,
            side,
            len,
            strides,
            nbr_start: Vec::with_capacity(len + 1),
            nbr: Vec::with_capacity(len * 2 * spec.dim),
        };
        for idx in 0..len {
            lattice.nbr_start.push(lattice.nbr.len() as u32);
            for l in 0..spec.dim {
                let off = (idx / strides[l]) % side;
                if off > 0 {
                    lattice.nbr.push((idx - strides[l]) as u32);
                }
                if off + 1 < side {
                    lattice.nbr.push((idx + strides[l]) as u32);
                }
            }
        }
        lattice.nbr_start.push(lattice.nbr.len() as u32);
        Ok(lattice)
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn radius(&self) -> usize {
        self.spec.radius
    }

    pub fn coupling(&self) -> f64 {
        self.spec.coupling
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Number of sites (2n+1)^d.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, site: &Site) -> bool {
        site.dim() == self.dim() && site.max_abs() <= self.radius() as u64
    }

    /// Flat index of a site.
    pub fn index_of(&self, site: &Site) -> Result<usize> {
        if !self.contains(site) {
            return Err(Error::SiteOutsideBox {
                site: *site,
                radius: self.radius(),
            });
        }
        let n = self.radius() as i64;
        Ok(site
            .coords()
            .iter()
            .zip(&self.strides)
            .map(|(&c, &s)| (c + n) as usize * s)
            .sum())
    }

    /// Site at a flat index. Panics if out of range.
    pub fn site_of(&self, idx: usize) -> Site {
        assert!(idx < self.len, "site index {idx} out of range");
        let n = self.radius() as i64;
        let mut c = [0i64; MAX_DIM];
        for (l, cl) in c.iter_mut().enumerate().take(self.dim()) {
            *cl = ((idx / self.strides[l]) % self.side) as i64 - n;
        }
        Site::new(&c[..self.dim()])
    }

    pub fn check_index(&self, idx: usize) -> Result<()> {
        if idx < self.len {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: idx,
                len: self.len,
            })
        }
    }

    /// Flat indices of the in-box nearest neighbours of a flat index.
    #[inline]
    pub fn neighbor_indices(&self, idx: usize) -> &[u32] {
        let a = self.nbr_start[idx] as usize;
        let b = self.nbr_start[idx + 1] as usize;
        &self.nbr[a..b]
    }

    /// Sites at ℓ1 distance 1 from `site` inside the box; sites beyond the
    /// box are omitted (free boundary).
    pub fn neighbors(&self, site: &Site) -> Result<Vec<Site>> {
        let idx = self.index_of(site)?;
        Ok(self
            .neighbor_indices(idx)
            .iter()
            .map(|&j| self.site_of(j as usize))
            .collect())
    }

    /// Coordinate offset (0..side) of a flat index along one axis.
    #[inline]
    pub(crate) fn axis_offset(&self, idx: usize, axis: usize) -> usize {
        (idx / self.strides[axis]) % self.side
    }

    #[inline]
    pub(crate) fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// ℓ1 distance between two flat indices.
    pub fn distance(&self, a: usize, b: usize) -> usize {
        (0..self.dim())
            .map(|l| self.axis_offset(a, l).abs_diff(self.axis_offset(b, l)))
            .sum()
    }

    pub fn cube_fits(&self, cube: &Cube) -> bool {
        cube.center.dim() == self.dim() && cube.center.max_abs() + cube.radius as u64 <= self.radius() as u64
    }

    pub(crate) fn check_cube(&self, cube: &Cube) -> Result<()> {
        if self.cube_fits(cube) {
            Ok(())
        } else {
            Err(Error::CubeOutsideBox {
                center: cube.center,
                radius: cube.radius,
                box_radius: self.radius(),
            })
        }
    }

    /// Inclusive per-axis offset bounds of a cube that fits in the box.
    pub(crate) fn cube_bounds(&self, cube: &Cube) -> ([usize; MAX_DIM], [usize; MAX_DIM]) {
        let n = self.radius() as i64;
        let k = cube.radius as i64;
        let mut lo = [0; MAX_DIM];
        let mut hi = [0; MAX_DIM];
        for (l, &c) in cube.center.coords().iter().enumerate() {
            lo[l] = (c - k + n) as usize;
            hi[l] = (c + k + n) as usize;
        }
        (lo, hi)
    }

    /// Flat indices of the sites of a cube, in storage order.
    pub fn cube_indices(&self, cube: &Cube) -> Result<Vec<usize>> {
        self.check_cube(cube)?;
        let (lo, hi) = self.cube_bounds(cube);
        let mut out = Vec::with_capacity(cube.volume());
        let d = self.dim();
        let mut cur = lo;
        loop {
            out.push((0..d).map(|l| cur[l] * self.strides[l]).sum());
            // odometer increment, last axis fastest
            let mut l = d;
            loop {
                if l == 0 {
                    return Ok(out);
                }
                l -= 1;
                if cur[l] < hi[l] {
                    cur[l] += 1;
                    break;
                }
                cur[l] = lo[l];
            }
        }
    }

    /// Map from the flat indices of a smaller concentric box into this one.
    pub fn embedding_of(&self, inner: &Lattice) -> Result<Vec<usize>> {
        if inner.dim() != self.dim() || inner.radius() > self.radius() {
            return Err(Error::InvalidLattice(format!(
                "box of radius {} does not embed in box of radius {}",
                inner.radius(),
                self.radius()
            )));
        }
        (0..inner.len()).map(|i| self.index_of(&inner.site_of(i))).collect()
    }

    /// Every cube admissible for the Q statistic: k > log^{1/d}(e + |ν|)
    /// (natural log, strict) and Λ_{ν,k} ⊆ Λ_n. Ordered by ν in storage order,
    /// then by increasing k.
    pub fn admissible_cubes(&self) -> Vec<Cube> {
        let mut out = Vec::new();
        for idx in 0..self.len {
            let nu = self.site_of(idx);
            let k_max = self.radius() as u64 - nu.max_abs();
            let mut k = admissible_min_radius(nu.l1_norm(), self.dim());
            while k as u64 <= k_max {
                out.push(Cube::new(nu, k));
                k += 1;
            }
        }
        out
    }
}

/// Smallest integer k with k > log^{1/d}(e + |ν|).
pub fn admissible_min_radius(nu_l1: u64, dim: usize) -> usize {
    let tau = crate::math::powf(crate::math::ln(crate::math::E + nu_l1 as f64), 1.0 / dim as f64);
    crate::math::floor(tau) as usize + 1
}
