//! Quantum real numbers on finite-dimensional state spaces.
//!
//! A quantum real number is the function `ρ ↦ Tr(ρM)` restricted to an open
//! region of density matrices. This crate represents regions as seeded
//! samples inside trace-norm balls and provides verifiers for the bounds that
//! tie such numbers to measurement: sharp collimation through a slit,
//! frequency emergence of outcome probabilities, Lüders updates, impulsive
//! pointer registration and the Ehrenfest windows on which quantum averages
//! follow Newtonian dynamics.
//!
//! Modules, bottom-up:
//!
//! * [`linalg`]: dense Hermitian operators, states, spectral calculus, grids.
//! * [`region`]: state regions, QRN evaluation, spreads, sharpness.
//! * [`collimation`]: one-slit bounds and sharp-state generators.
//! * [`born`]: dichotomic experiments, the N-copy average operator, frequencies.
//! * [`luders`]: persistence regions and Lüders-rule propositions.
//! * [`pointer`]: two-particle impulsive measurement and registration.
//! * [`dynamics`]: Ehrenfest gap, windows, trajectories, sharpening ODE.
//! * [`suite`]: the end-to-end verification suite used by `qrn selftest`.

// Guards are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod born;
pub mod collimation;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod luders;
pub mod pointer;
pub mod region;
pub mod report;
pub mod states;
pub mod suite;
pub mod tol;

pub use error::{QrnError, Result};
pub use linalg::{DensityMatrix, Grid, HermitianOperator, OpenInterval, Projector, SpectralDecomposition, C64};
pub use region::{QuantumRealNumber, SlitSpec, SpreadValue, StateRegion};
pub use report::{CheckRecord, TheoremReport};

/// Library version recorded in experiment reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
