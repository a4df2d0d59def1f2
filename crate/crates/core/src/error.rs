use thiserror::Error;

pub type Result<T, E = QrnError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum QrnError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("operator is not a projector (idempotence defect {defect:.3e})")]
    NotProjector { defect: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("restriction to the slit is null (Tr(PρP) = {weight:.3e})")]
    NullRestriction { weight: f64 },

    #[error("Lüders branch has zero weight (Tr(Pρ) = {weight:.3e})")]
    ZeroBranch { weight: f64 },

    #[error("hypothesis of {check} not met: {detail}")]
    HypothesisNotMet { check: String, detail: String },

    #[error("slit ]{z1}, {z2}[ violates 2|z2 - z1| <= eps * 2 min(|z1|, |z2|) for eps = {eps}")]
    UnboundedPreconditionViolated { z1: f64, z2: f64, eps: f64 },

    #[error("no sample lies in the intersection of the preparation and persistence regions")]
    EmptyIntersection,

    #[error("operators do not commute (commutator norm {norm:.3e})")]
    NonCommuting { norm: f64 },

    #[error("state preparation failed: {0}")]
    PreparationFailed(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("continuity modulus search failed at r = {r}")]
    ModulusSearchFailed { r: f64 },

    #[error("dimension {dim} exceeds the dense cap of {cap}")]
    DimensionTooLarge { dim: usize, cap: usize },

    #[error("eigendecomposition did not converge")]
    EigenFailure,

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
