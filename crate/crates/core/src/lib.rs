//! Certified simulation of Lindblad master equations on truncated bosonic Fock spaces.
//!
//! Every run produces a density matrix on a finite truncation together with a
//! rigorous upper bound `xi` on the trace-norm distance to the untruncated solution.

pub mod error;
pub mod estimators;
pub mod fockspace;
pub mod linalg;
pub mod lindblad;
pub mod operators;
pub mod solver;

pub use error::{Error, Result};
pub use fockspace::{Basis, ShapeStep, TruncationShape};
pub use lindblad::{
    CoefficientFn, DensityState, Generator, HamiltonianTerm, LindbladModel, OperatorExpr,
};
pub use operators::{DenseOperator, LinearForm, PolyOperator};

/// Complex scalar used for every operator entry.
pub type C64 = num_complex::Complex64;

/// Exact rational used for truncation weights and caps.
pub type Rational = num_rational::Ratio<i64>;
