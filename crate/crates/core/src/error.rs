use alloc::string::String;

use crate::lattice::GroupElement;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("index set is empty")]
    EmptyIndexSet,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("missing coupling constant at site {0}")]
    MissingCoupling(GroupElement),

    #[error("negative coupling constant {value} at site {site}")]
    NegativeCoupling { site: GroupElement, value: f64 },

    #[error("single site deformation is not normalized: periodic sum {sum} at cell vertex {vertex}")]
    UnnormalizedDeformation { vertex: String, sum: f64 },

    #[error("measure must be strictly positive (entry {index} is {value})")]
    NonPositiveMeasure { index: usize, value: f64 },

    #[error("operators are not comparable: {0}")]
    Incompatible(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("eigensolver did not converge (n = {n}, max |entry| = {max_abs})")]
    EigenNonConvergence { n: usize, max_abs: f64 },

    #[error("eigenvalue #{index} is degenerate (gap {gap:e}); perturb the configuration")]
    DegenerateEigenvalue { index: usize, gap: f64 },

    #[error("energy {energy} lies within {distance:e} of an eigenvalue")]
    NearEigenvalue { energy: f64, distance: f64 },

    #[error("test function undefined on the spectrum: {0}")]
    DomainTooSmall(String),

    #[error(
        "alloy-type metric interval [{lo}, {hi}] is not contained in [1/a, a] with a = {a}; \
         eigenvalues near zero are not moved by the conformal coupling"
    )]
    ZeroEnergyCaveat { lo: f64, hi: f64, a: f64 },

    #[error("no Wegner scaling: {0}")]
    NoWegnerScaling(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operation requires a {expected} model")]
    WrongModel { expected: &'static str },
}
