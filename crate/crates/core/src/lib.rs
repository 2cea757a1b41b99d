//! Accessible nonlinear entanglement witnesses.
//!
//! Starting from a linear witness `W = Σ c_i A_i⊗B_i` that an experiment
//! measures term by term, this crate builds the Choi–Jamiołkowski map of
//! `W`, runs the nonlinear improvement recurrence `w_n = w_{n-1} - κ c_{n-1}`
//! (and its closed-form limit for involutive `U`), and certifies when those
//! improvements can be evaluated from the measured expectation values alone.
//!
//! Module map:
//!
//! - [`operator`]: dense multi-partite operators, partial trace/transpose, Paulis.
//! - [`cj_map`]: the extended map `Λ̃_W` and its adjoint as superoperator matrices.
//! - [`witness`]: local decompositions, the measurement map `ρ ↦ (⟨A_i⊗B_i⟩)_i`,
//!   and span membership in the accessible subspace `V`.
//! - [`nonlinear`]: moment matrix, first improvement, iteration, analytic limit.
//! - [`accessibility`]: numerical certificates for evaluating the improvements from data.
//! - [`states`]: the state families used in the worked examples.
//! - [`stats`]: finite-shot simulation, delta-method error bars, detection rates.

pub mod accessibility;
pub mod cj_map;
pub mod error;
pub mod nonlinear;
pub mod operator;
pub mod random;
pub mod states;
pub mod stats;
pub mod subspace;
pub mod tolerances;
pub mod witness;

pub use accessibility::{check_analytic, check_sufficient, AccessibilityCertificate, Verdict};
pub use cj_map::WitnessMap;
pub use error::{Error, Result};
pub use nonlinear::{
    iterate, iterate_restricted, moment_matrix, w_infinity, w_infinity_restricted, w_nl_first,
    AnalyticLimit, IterationConfig, IterationMode, IterationState, LimitOutcome, UnitarySchedule,
};
pub use operator::{DensityMatrix, Operator};
pub use states::StateSpec;
pub use witness::{ExpectationVector, LocalDecomposition, LocalTerm, Provenance};

pub use num_complex::Complex64;
