//! Numerical tolerances shared across modules.

/// Hermiticity, trace and unit-norm checks.
pub const STATE: f64 = 1e-12;

/// Lower bound accepted for density-matrix eigenvalues.
pub const PSD: f64 = -1e-10;

/// Imaginary residue of a trace beyond which the input is rejected.
pub const IMAGINARY_RESIDUE: f64 = 1e-10;

/// Settings-ensemble frame decomposition and orthonormality.
pub const FRAME: f64 = 1e-10;

/// Correlator magnitudes may exceed one by at most this much.
pub const CORRELATOR_CONTRACT: f64 = 1e-9;

/// `(α±)_k = 0` precondition of the tightened inequalities.
pub const ALPHA_ZERO: f64 = 1e-9;

/// Violation flag threshold on inequality margins.
pub const VIOLATION: f64 = 1e-12;

/// Per-hidden-variable constraint slack.
pub const MODEL_SLACK: f64 = 1e-12;

/// Integrated model margins.
pub const MODEL_MARGIN: f64 = 1e-10;
