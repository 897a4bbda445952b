use crate::prelude::*;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("polytope has empty interior (chebyshev radius {radius:e})")]
    EmptyInterior { radius: f64 },
    #[error("polytope is unbounded")]
    Unbounded,
    #[error("seed in collision")]
    SeedInCollision,
    #[error("seed outside joint limits")]
    SeedOutsideLimits,
    #[error("seed violates extra constraint {0}")]
    SeedViolatesConstraint(usize),
    #[error("seed not contained in the first region")]
    SeedExcluded,
    #[error("seed inside obstacle")]
    SeedInsideObstacle,
    #[error("seed {seed} lies inside region {region}")]
    SeedInsideRegion { seed: usize, region: usize },
    #[error("ellipsoid center in collision; refine needs a fallback configuration")]
    EllipsoidCenterInCollision,
    #[error("counterexample at ellipse center")]
    CounterexampleAtCenter,
    #[error("point outside polytope")]
    OutsidePolytope,
    #[error("degenerate chord after {0} attempts")]
    DegenerateChord(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
}
