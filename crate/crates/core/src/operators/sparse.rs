use std::sync::Arc;

use crate::fockspace::Basis;
use crate::operators::DenseOperator;
use crate::C64;

/// Column-compressed operator over a shape basis. Used internally to apply polynomial
/// operators to dense states without forming dense products.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    basis: Arc<Basis>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseOperator {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and exact zeros dropped.
    pub fn from_triplets(basis: Arc<Basis>, mut trip: Vec<(usize, usize, C64)>) -> Self {
        let n = basis.dim();
        trip.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(trip.len());
        let mut vals: Vec<C64> = Vec::with_capacity(trip.len());
        let mut cols = Vec::with_capacity(trip.len());
        for (i, j, v) in trip {
            if let (Some(&li), Some(&lj)) = (row_idx.last(), cols.last()) {
                if li == i && lj == j {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            row_idx.push(i);
            cols.push(j);
            vals.push(v);
        }
        let mut keep_rows = Vec::with_capacity(row_idx.len());
        let mut keep_vals = Vec::with_capacity(row_idx.len());
        for k in 0..row_idx.len() {
            if vals[k] != C64::new(0.0, 0.0) {
                keep_rows.push(row_idx[k]);
                keep_vals.push(vals[k]);
                col_ptr[cols[k] + 1] += 1;
            }
        }
        for j in 0..n {
            col_ptr[j + 1] += col_ptr[j];
        }
        SparseOperator { basis, col_ptr, row_idx: keep_rows, vals: keep_vals }
    }

    pub fn from_dense(m: &DenseOperator) -> Self {
        let n = m.dim();
        let mut trip = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let v = m.get(i, j);
                if v != C64::new(0.0, 0.0) {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.basis().clone(), trip)
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Nonzeros of column `j` as `(row, value)` pairs in ascending row order.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for j in 0..self.dim() {
            for (i, v) in self.column(j) {
                out.push((i, j, v));
            }
        }
        out
    }

    pub fn to_dense(&self) -> DenseOperator {
        let mut m = DenseOperator::zeros(self.basis.clone());
        for (i, j, v) in self.triplets() {
            m.set(i, j, v);
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let trip = self.triplets().into_iter().map(|(i, j, v)| (j, i, v.conj())).collect();
        Self::from_triplets(self.basis.clone(), trip)
    }

    pub fn scaled(&self, s: C64) -> Self {
        let trip = self.triplets().into_iter().map(|(i, j, v)| (i, j, v * s)).collect();
        Self::from_triplets(self.basis.clone(), trip)
    }

    /// Sparse product `self * other`.
    pub fn mul_sparse(&self, other: &SparseOperator) -> Self {
        let n = self.dim();
        let mut acc = vec![C64::new(0.0, 0.0); n];
        let mut touched = vec![false; n];
        let mut rows = Vec::new();
        let mut trip = Vec::new();
        for j in 0..n {
            for (k, b) in other.column(j) {
                for (i, a) in self.column(k) {
                    if !touched[i] {
                        touched[i] = true;
                        rows.push(i);
                    }
                    acc[i] += a * b;
                }
            }
            rows.sort_unstable();
            for &i in &rows {
                trip.push((i, j, acc[i]));
                acc[i] = C64::new(0.0, 0.0);
                touched[i] = false;
            }
            rows.clear();
        }
        Self::from_triplets(self.basis.clone(), trip)
    }

    /// `out += s * (self * x)`.
    pub fn left_mul_acc(&self, x: &DenseOperator, s: C64, out: &mut DenseOperator) {
        let n = self.dim();
        for c in 0..n {
            let xc = x.col(c);
            let oc = out.col_mut(c);
            for k in 0..n {
                let xk = xc[k];
                if xk == C64::new(0.0, 0.0) {
                    continue;
                }
                let f = s * xk;
                for (i, a) in self.column(k) {
                    oc[i] += a * f;
                }
            }
        }
    }

    /// `out += s * (x * self)`.
    pub fn right_mul_acc(&self, x: &DenseOperator, s: C64, out: &mut DenseOperator) {
        let n = self.dim();
        for j in 0..n {
            for (k, a) in self.column(j) {
                let f = s * a;
                let xc = x.col(k);
                for (o, v) in out.col_mut(j).iter_mut().zip(xc) {
                    *o += v * f;
                }
            }
        }
    }

    pub fn left_mul(&self, x: &DenseOperator) -> DenseOperator {
        let mut out = DenseOperator::zeros(self.basis.clone());
        self.left_mul_acc(x, C64::new(1.0, 0.0), &mut out);
        out
    }

    pub fn right_mul(&self, x: &DenseOperator) -> DenseOperator {
        let mut out = DenseOperator::zeros(self.basis.clone());
        self.right_mul_acc(x, C64::new(1.0, 0.0), &mut out);
        out
    }
}
