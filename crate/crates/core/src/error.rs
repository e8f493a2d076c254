use alloc::boxed::Box;
use alloc::string::String;

use crate::lattice::Site;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("site {site} lies outside the box of radius {radius}")]
    SiteOutsideBox { site: Site, radius: usize },

    #[error("flat site index {index} out of range for {len} sites")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("cube centered at {center} with radius {radius} is not contained in the box of radius {box_radius}")]
    CubeOutsideBox {
        center: Site,
        radius: usize,
        box_radius: usize,
    },

    #[error("no admissible cube in a box of radius {radius}; use a larger box")]
    NoAdmissibleCube { radius: usize },

    #[error("state has {found} sites but the lattice has {expected}")]
    StateShape { expected: usize, found: usize },

    #[error("non-finite coordinate at site index {site}")]
    NonFiniteState { site: usize },

    #[error("non-finite force at site {site}")]
    ForceOverflow { site: Site },

    #[error("non-finite energy")]
    EnergyOverflow,

    #[error("trajectory blew up at site index {site} on step {step} (t = {time})")]
    BlowUp { site: usize, step: usize, time: f64 },

    #[error("tangent flow overflowed on step {step} (t = {time}); largest finite component ~ 1e{max_log10:.1}")]
    TangentBlowUp { step: usize, time: f64, max_log10: f64 },

    #[error("truncation radius {radius}: {source}")]
    Truncation { radius: usize, source: Box<Error> },

    #[error("lambda = {lambda} overflows exp(lambda * W) (max W = {max_w}); try lambda <= {suggested:.3e}")]
    LambdaTooLarge { lambda: f64, max_w: f64, suggested: f64 },

    #[error("Jacobian field was computed for source index {found}, bracket needs source index {expected}")]
    SourceMismatch { expected: usize, found: usize },

    #[error("bracket {value:e} exceeds the gradient bound {bound:e}")]
    BracketBound { value: f64, bound: f64 },
}
