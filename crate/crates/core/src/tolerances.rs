//! Numerical thresholds shared across the crate. All are absolute and sized
//! for unit-scale operators in double precision.

/// Smallest eigenvalue accepted as positive semi-definite.
pub const TOL_PSD: f64 = 1e-9;

/// Largest entrywise deviation `|x - x†|` accepted as Hermitian.
pub const TOL_HERMITIAN: f64 = 1e-9;

/// Largest entrywise deviation of `UU†` (or `U²`) from the identity.
pub const TOL_UNITARY: f64 = 1e-9;

/// Trace normalization tolerance for density matrices.
pub const TOL_TRACE: f64 = 1e-9;

/// Guard on the denominator `κ⁻¹ = Tr(ρ Λ̃[1])`.
pub const TOL_DIV: f64 = 1e-12;

/// `|d(ρ)|` above this selects the divergent branch of the analytic limit.
pub const TOL_D: f64 = 1e-10;

/// Hilbert–Schmidt residual below which an operator counts as inside a span.
pub const TOL_SPAN: f64 = 1e-9;

/// Relative singular-value cutoff used when extracting ranks and kernels.
pub const TOL_RANK: f64 = 1e-10;

/// Reporting floor for divergent sequences: the first `n` with `w_n` below it.
pub const DIVERGENCE_FLOOR: f64 = -1e6;

/// Central finite-difference step for delta-method propagation.
pub const FD_STEP: f64 = 1e-5;
