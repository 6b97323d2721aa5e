use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::fockspace::{Basis, TruncationShape};
use crate::linalg;
use crate::C64;

/// Complex square matrix over the basis of a truncation shape (column-major storage).
#[derive(Clone)]
pub struct DenseOperator {
    basis: Arc<Basis>,
    data: Vec<C64>,
}

impl fmt::Debug for DenseOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseOperator({}, dim {})", self.shape(), self.dim())
    }
}

impl PartialEq for DenseOperator {
    fn eq(&self, other: &Self) -> bool {
        self.shape() == other.shape() && self.data == other.data
    }
}

impl DenseOperator {
    pub fn zeros(basis: Arc<Basis>) -> Self {
        let n = basis.dim();
        DenseOperator { basis, data: vec![C64::new(0.0, 0.0); n * n] }
    }

    pub fn on_shape(shape: &TruncationShape) -> Self {
        Self::zeros(Basis::of(shape))
    }

    pub fn identity(basis: Arc<Basis>) -> Self {
        let mut m = Self::zeros(basis);
        for i in 0..m.dim() {
            m.set(i, i, C64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_fn(basis: Arc<Basis>, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let n = basis.dim();
        let mut data = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                data.push(f(i, j));
            }
        }
        DenseOperator { basis, data }
    }

    /// Builds from column-major data.
    pub fn from_col_major(basis: Arc<Basis>, data: Vec<C64>) -> Result<Self> {
        let n = basis.dim();
        if data.len() != n * n {
            return Err(Error::ShapeMismatch(format!("expected {} entries, got {}", n * n, data.len())));
        }
        Ok(DenseOperator { basis, data })
    }

    /// Builds from row-major data.
    pub fn from_row_major(basis: Arc<Basis>, data: &[C64]) -> Result<Self> {
        let n = basis.dim();
        if data.len() != n * n {
            return Err(Error::ShapeMismatch(format!("expected {} entries, got {}", n * n, data.len())));
        }
        Ok(Self::from_fn(basis, |i, j| data[i * n + j]))
    }

    /// Projector onto a single basis state, `|k><k|`.
    pub fn fock_projector(basis: Arc<Basis>, k: &[usize]) -> Result<Self> {
        let i = basis
            .index_of(k)
            .ok_or_else(|| Error::InvalidInput(format!("Fock state {k:?} is outside the shape")))?;
        let mut m = Self::zeros(basis);
        m.set(i, i, C64::new(1.0, 0.0));
        Ok(m)
    }

    pub(crate) fn from_mat(basis: Arc<Basis>, m: &Mat<C64>) -> Self {
        let n = basis.dim();
        debug_assert_eq!(m.nrows(), n);
        let mut data = Vec::with_capacity(n * n);
        for j in 0..n {
            data.extend_from_slice(m.col_as_slice(j));
        }
        DenseOperator { basis, data }
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn shape(&self) -> &TruncationShape {
        self.basis.shape()
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[j * self.dim() + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        let n = self.dim();
        self.data[j * n + i] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: C64) {
        let n = self.dim();
        self.data[j * n + i] += v;
    }

    pub fn col(&self, j: usize) -> &[C64] {
        let n = self.dim();
        &self.data[j * n..(j + 1) * n]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [C64] {
        let n = self.dim();
        &mut self.data[j * n..(j + 1) * n]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn as_mat(&self) -> MatRef<'_, C64> {
        let n = self.dim();
        MatRef::from_column_major_slice(&self.data, n, n)
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<C64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.get(i, j));
            }
        }
        out
    }

    fn check_same(&self, other: &Self) {
        assert!(
            Arc::ptr_eq(&self.basis, &other.basis) || self.shape() == other.shape(),
            "operators live on different shapes: {} vs {}",
            self.shape(),
            other.shape()
        );
    }

    pub fn try_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!("{} vs {}", self.shape(), other.shape())));
        }
        Ok(())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.basis.clone(), |i, j| self.get(j, i).conj())
    }

    pub fn herm_part(&self) -> Self {
        Self::from_fn(self.basis.clone(), |i, j| (self.get(i, j) + self.get(j, i).conj()) * 0.5)
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        DenseOperator { basis: self.basis.clone(), data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        DenseOperator { basis: self.basis.clone(), data: self.data.iter().map(|x| x * s).collect() }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: C64, other: &Self) {
        self.check_same(other);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        self.check_same(other);
        let p = self.as_mat() * other.as_mat();
        Self::from_mat(self.basis.clone(), &p)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest `|M_ij - conj(M_ji)|` relative to the largest entry.
    pub fn hermiticity_defect(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..=j {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst / scale
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.hermiticity_defect() <= rel_tol
    }

    pub fn trace_norm(&self) -> Result<f64> {
        linalg::trace_norm(self)
    }

    /// Trace norm of an operator known to be Hermitian (guarded, see [`linalg::hermitian_trace_norm`]).
    pub fn hermitian_trace_norm(&self) -> Result<f64> {
        linalg::hermitian_trace_norm(self)
    }

    /// Elementwise conjugation by a diagonal unitary: `D M D^dagger` with `D = diag(d)`.
    pub fn conjugate_diagonal(&self, d: &[C64]) -> Self {
        Self::from_fn(self.basis.clone(), |i, j| d[i] * self.get(i, j) * d[j].conj())
    }
}

impl Add for &DenseOperator {
    type Output = DenseOperator;
    fn add(self, rhs: &DenseOperator) -> DenseOperator {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &DenseOperator {
    type Output = DenseOperator;
    fn sub(self, rhs: &DenseOperator) -> DenseOperator {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl AddAssign<&DenseOperator> for DenseOperator {
    fn add_assign(&mut self, rhs: &DenseOperator) {
        self.check_same(rhs);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&DenseOperator> for DenseOperator {
    fn sub_assign(&mut self, rhs: &DenseOperator) {
        self.check_same(rhs);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl Mul for &DenseOperator {
    type Output = DenseOperator;
    fn mul(self, rhs: &DenseOperator) -> DenseOperator {
        self.matmul(rhs)
    }
}

impl Neg for &DenseOperator {
    type Output = DenseOperator;
    fn neg(self) -> DenseOperator {
        self.scale_real(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn adjoint_trace_and_products() {
        let b = Basis::of(&TruncationShape::Rect(vec![1]));
        let m = DenseOperator::from_row_major(b.clone(), &[c(1.0, 0.0), c(2.0, 1.0), c(0.0, -1.0), c(3.0, 0.0)])
            .unwrap();
        assert_eq!(m.get(0, 1), c(2.0, 1.0));
        assert_eq!(m.adjoint().get(0, 1), c(0.0, 1.0));
        assert_eq!(m.trace(), c(4.0, 0.0));
        let id = DenseOperator::identity(b);
        assert_eq!(&m * &id, m);
        let h = m.herm_part();
        assert!(h.is_hermitian(0.0));
        assert_eq!(h.herm_part(), h);
        let anti = &m - &m.adjoint();
        assert!(anti.herm_part().max_abs() < 1e-15);
        assert_eq!(m.to_row_major()[1], c(2.0, 1.0));
    }
}
