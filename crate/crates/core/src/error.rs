use thiserror::Error;

/// Errors produced across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed domain spec: {0}")]
    MalformedSpec(String),
    #[error("boundary loop is self-intersecting or not positively oriented: {0}")]
    BadBoundary(String),
    #[error("domain meets the degenerate set {{x=0}} but no neighborhood O was supplied (or it is too small)")]
    MissingDegenerateNeighborhood,
    #[error("mesh too coarse: only {0} boundary nodes (need at least 8)")]
    TooCoarse(usize),
    #[error("mesh invariant violated: {0}")]
    BadMesh(String),
    #[error("invalid perturbation field: {0}")]
    BadField(String),
    #[error("bump support intersects the degenerate neighborhood O")]
    BumpIntersectsO,
    #[error("mapped mesh has an inverted (non-positive area) triangle at index {0}")]
    InvertedTriangle(usize),
    #[error("map is not injective on the node set (nodes {0} and {1} collide)")]
    NonInjectiveMap(usize, usize),
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("eigensolver failed to converge within {0} iterations (worst residual {1:.3e})")]
    NonConvergence(usize, f64),
    #[error("matrix factorization failed: {0}")]
    Factorization(String),
    #[error("boundary-form shape derivative refused: domain meets {{x=0}} and the field does not vanish on O")]
    RegularityGate,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("1D oracle did not certify {0} eigenvalues (k-branch cap reached)")]
    OracleCertification(usize),
    #[error("1D oracle did not reach tolerance {requested:.3e} at grid cap (best error estimate {achieved:.3e})")]
    OracleTolerance { requested: f64, achieved: f64 },
    #[error("no sign change of the eigenvalue gap over the supplied bracket")]
    NoSignChange,
}

pub type Result<T> = std::result::Result<T, Error>;
