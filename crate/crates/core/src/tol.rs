//! Numerical tolerances shared by every module.
//!
//! Theorem checks never use anything looser than [`BOUND_SLACK`]; the
//! looser constants belong to construction and repair steps only.

/// Allowed anti-Hermitian defect before a matrix is rejected.
pub const HERMITIAN: f64 = 1e-12;

/// Negative eigenvalue and trace defect tolerated in a density matrix.
pub const DENSITY: f64 = 1e-10;

/// ‖P² − P‖ bound for projectors.
pub const IDEMPOTENT: f64 = 1e-10;

/// Eigenvalues closer than this are merged into one spectral projector.
pub const DEGENERACY: f64 = 1e-8;

/// Eigenvalues within this distance of an interval endpoint are treated as
/// lying on the boundary and are excluded from the open interval.
pub const BOUNDARY: f64 = 1e-9;

/// Additive slack on every theorem bound.
pub const BOUND_SLACK: f64 = 1e-9;

/// Negative variances above this are clipped to zero before the square root.
pub const VARIANCE_CLIP: f64 = 1e-12;

/// Membership slack for trace-norm balls.
pub const BALL_SLACK: f64 = 1e-12;

/// Weight below which a projector branch is considered empty.
pub const NULL_WEIGHT: f64 = 1e-12;

/// Largest dense dimension any module will build.
pub const MAX_DIM: usize = 4096;
