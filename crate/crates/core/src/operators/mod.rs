//! Operators on truncated Fock spaces: dense matrices, polynomial expressions in the
//! ladder operators with exact truncation, and displacement-type unitaries.

mod dense;
mod poly;
mod sparse;
mod unitary;

pub use dense::DenseOperator;
pub use poly::{Letter, PolyOperator, Word};
pub use sparse::SparseOperator;
pub use unitary::{
    cosine_of, displacement_q, displacement_tail, displacement_table, exp_i_linear, rotation, rotation_phases,
    LinearForm, UnitarySpec,
};

use std::sync::Arc;

use crate::error::Result;
use crate::fockspace::Basis;

/// Truncated annihilation operator of `mode`.
pub fn ladder(basis: &Arc<Basis>, mode: usize) -> Result<DenseOperator> {
    PolyOperator::a(basis.mode_count(), mode).materialize(basis)
}

pub fn materialize_poly(q: &PolyOperator, basis: &Arc<Basis>) -> Result<DenseOperator> {
    q.materialize(basis)
}

pub fn trace_norm(m: &DenseOperator) -> Result<f64> {
    m.trace_norm()
}

pub fn herm_part(m: &DenseOperator) -> DenseOperator {
    m.herm_part()
}
