//! Independent dense oracles shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use certilind::lindblad::{Generator, HamiltonianTerm, LindbladModel, OperatorExpr};
use certilind::{Basis, DenseOperator, PolyOperator, TruncationShape, C64};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn basis1(n: usize) -> Arc<Basis> {
    Basis::of(&TruncationShape::Rect(vec![n]))
}

/// Row-major square matrix.
#[derive(Clone, Debug)]
pub struct Mat {
    pub n: usize,
    pub a: Vec<C64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat { n, a: vec![c(0.0, 0.0); n * n] }
    }

    pub fn eye(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = c(1.0, 0.0);
        }
        m
    }

    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.a[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.a[i * self.n + j] = v;
    }

    pub fn mul(&self, b: &Mat) -> Mat {
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let x = self.a[i * n + k];
                if x == c(0.0, 0.0) {
                    continue;
                }
                let row = &b.a[k * n..(k + 1) * n];
                let o = &mut out.a[i * n..(i + 1) * n];
                for j in 0..n {
                    o[j] += x * row[j];
                }
            }
        }
        out
    }

    pub fn add_scaled(&self, s: C64, b: &Mat) -> Mat {
        Mat { n: self.n, a: self.a.iter().zip(&b.a).map(|(x, y)| x + s * y).collect() }
    }

    pub fn scale(&self, s: C64) -> Mat {
        Mat { n: self.n, a: self.a.iter().map(|x| s * x).collect() }
    }

    pub fn adjoint(&self) -> Mat {
        let mut m = Mat::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m.a[j * self.n + i] = self.a[i * self.n + j].conj();
            }
        }
        m
    }

    pub fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.at(i, j).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.at(i, j) * v[j]).sum()).collect()
    }

    pub fn from_op(m: &DenseOperator) -> Mat {
        let n = m.dim();
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, m.get(i, j));
            }
        }
        out
    }

    pub fn to_op(&self, basis: Arc<Basis>) -> DenseOperator {
        DenseOperator::from_fn(basis, |i, j| self.at(i, j))
    }

    /// Leading `m x m` block.
    pub fn leading(&self, m: usize) -> Mat {
        let mut out = Mat::zeros(m);
        for i in 0..m {
            for j in 0..m {
                out.set(i, j, self.at(i, j));
            }
        }
        out
    }
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm(m: &Mat) -> Mat {
    let norm = m.norm1();
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.25 {
        s += 1;
    }
    let a = m.scale(c(1.0 / 2f64.powi(s), 0.0));
    let mut term = Mat::eye(m.n);
    let mut sum = Mat::eye(m.n);
    for k in 1..=24 {
        term = term.mul(&a).scale(c(1.0 / k as f64, 0.0));
        sum = sum.add_scaled(c(1.0, 0.0), &term);
    }
    for _ in 0..s {
        sum = sum.mul(&sum);
    }
    sum
}

/// Eigenvalues of a real symmetric matrix (row-major) by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(mut a: Vec<f64>, n: usize) -> Vec<f64> {
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * n + j].powi(2)).sum();
        let diag: f64 = (0..n).map(|i| a[i * n + i].powi(2)).sum();
        if off <= 1e-30 * diag.max(1e-300) || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = cs * akp - sn * akq;
                    a[k * n + q] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = cs * apk - sn * aqk;
                    a[q * n + k] = sn * apk + cs * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

/// Eigenvalues of a complex Hermitian matrix through its real symmetric doubling.
pub fn hermitian_eigenvalues(m: &Mat) -> Vec<f64> {
    let n = m.n;
    let n2 = 2 * n;
    let mut r = vec![0.0; n2 * n2];
    for i in 0..n {
        for j in 0..n {
            let h = (m.at(i, j) + m.at(j, i).conj()) * 0.5;
            r[i * n2 + j] = h.re;
            r[(i + n) * n2 + j + n] = h.re;
            r[(i + n) * n2 + j] = h.im;
            r[i * n2 + j + n] = -h.im;
        }
    }
    let ev = jacobi_eigenvalues(r, n2);
    // each eigenvalue appears twice
    ev.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
}

pub fn hermitian_trace_norm(m: &Mat) -> f64 {
    hermitian_eigenvalues(m).iter().map(|x| x.abs()).sum()
}

/// Trace norm of a rectangular block given as rows of length `cols`, from the eigenvalues
/// `+-sigma` of its Hermitian dilation `[[0, X], [X^dagger, 0]]`.
pub fn rect_trace_norm(rows: &[Vec<C64>], cols: usize) -> f64 {
    let r = rows.len();
    let mut d = Mat::zeros(r + cols);
    for (i, row) in rows.iter().enumerate() {
        for j in 0..cols {
            d.set(i, r + j, row[j]);
            d.set(r + j, i, row[j].conj());
        }
    }
    0.5 * hermitian_trace_norm(&d)
}

pub fn general_trace_norm(m: &Mat) -> f64 {
    let rows: Vec<Vec<C64>> = (0..m.n).map(|i| (0..m.n).map(|j| m.at(i, j)).collect()).collect();
    rect_trace_norm(&rows, m.n)
}

pub fn random_matrix(r: &mut impl Rng, n: usize) -> Mat {
    let mut m = Mat::zeros(n);
    for v in m.a.iter_mut() {
        *v = c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
    }
    m
}

/// Random density matrix `G G^dagger / tr` with a geometric spectrum tilt toward low Fock states
/// when `decay < 1`.
pub fn random_density(r: &mut impl Rng, basis: Arc<Basis>, decay: f64) -> DenseOperator {
    let n = basis.dim();
    let mut g = random_matrix(r, n);
    for i in 0..n {
        let w = decay.powi(basis.multi_index_of(i).iter().sum::<usize>() as i32);
        for j in 0..n {
            g.a[i * n + j] *= w;
        }
    }
    let mut rho = g.mul(&g.adjoint());
    let tr: f64 = (0..n).map(|i| rho.at(i, i).re).sum();
    rho = rho.scale(c(1.0 / tr, 0.0));
    rho.to_op(basis)
}

pub fn random_hermitian(r: &mut impl Rng, basis: Arc<Basis>) -> DenseOperator {
    let n = basis.dim();
    let g = random_matrix(r, n);
    g.add_scaled(c(1.0, 0.0), &g.adjoint()).scale(c(0.5, 0.0)).to_op(basis)
}

/// Superoperator of `L_N` assembled column by column from the generator's action on matrix units;
/// acts on row-major vectorized states.
pub fn superoperator(gen: &Generator, t: f64) -> Mat {
    let b = gen.basis().clone();
    let n = b.dim();
    let nn = n * n;
    let mut s = Mat::zeros(nn);
    for i in 0..n {
        for j in 0..n {
            let mut e = DenseOperator::zeros(b.clone());
            e.set(i, j, c(1.0, 0.0));
            let img = gen.apply(t, &e).unwrap();
            for k in 0..n {
                for l in 0..n {
                    s.set(k * n + l, i * n + j, img.get(k, l));
                }
            }
        }
    }
    s
}

pub fn vectorize(m: &DenseOperator) -> Vec<C64> {
    m.to_row_major()
}

pub fn unvectorize(v: &[C64], basis: Arc<Basis>) -> DenseOperator {
    DenseOperator::from_row_major(basis, v).unwrap()
}

/// `exp(t L_N) rho` through the dense superoperator exponential.
pub fn evolve_exact(gen: &Generator, rho: &DenseOperator, t: f64) -> DenseOperator {
    let s = superoperator(gen, 0.0).scale(c(t, 0.0));
    let e = expm(&s);
    unvectorize(&e.apply(&vectorize(rho)), rho.basis().clone())
}

/// Truncation of `exp(i eta q)` from the exponential of `q` on a much larger space.
pub fn displacement_series(n: usize, eta: f64, factor: usize) -> Mat {
    let big = (n + 1) * factor;
    let mut q = Mat::zeros(big);
    for k in 1..big {
        let v = (k as f64 / 2.0).sqrt();
        q.set(k - 1, k, c(v, 0.0));
        q.set(k, k - 1, c(v, 0.0));
    }
    expm(&q.scale(c(0.0, eta))).leading(n + 1)
}

/// Exact truncation of `p` on `Rect([n])`.
pub fn p_matrix(n: usize) -> Mat {
    let d = n + 1;
    let mut p = Mat::zeros(d);
    for k in 1..d {
        let v = (k as f64 / 2.0).sqrt();
        p.set(k - 1, k, c(0.0, -v));
        p.set(k, k - 1, c(0.0, v));
    }
    p
}

pub fn example_a() -> LindbladModel {
    LindbladModel::new(
        1,
        vec![HamiltonianTerm::constant(1.0, PolyOperator::number(1, 0))],
        vec![OperatorExpr::Poly(PolyOperator::a(1, 0))],
    )
    .unwrap()
}

pub fn example_b(u: f64) -> LindbladModel {
    let h = &PolyOperator::a(1, 0) + &PolyOperator::ad(1, 0);
    LindbladModel::new(1, vec![HamiltonianTerm::constant(u, h)], vec![]).unwrap()
}

pub fn cat_gamma(alpha: f64) -> PolyOperator {
    let a = PolyOperator::a(1, 0);
    &(&a * &a) - &PolyOperator::scalar(1, c(alpha * alpha, 0.0))
}

pub fn squeezed_gamma(alpha: f64, r: f64) -> PolyOperator {
    let b = &(&PolyOperator::a(1, 0) * c(r.cosh(), 0.0)) + &(&PolyOperator::ad(1, 0) * c(r.sinh(), 0.0));
    (&(&b * &b) - &PolyOperator::scalar(1, c(alpha * alpha, 0.0))).simplified()
}

pub fn example_c(alpha: f64) -> LindbladModel {
    LindbladModel::new(1, vec![], vec![OperatorExpr::Poly(cat_gamma(alpha))]).unwrap()
}

pub fn example_d(alpha: f64, r: f64) -> LindbladModel {
    LindbladModel::new(1, vec![], vec![OperatorExpr::Poly(squeezed_gamma(alpha, r))]).unwrap()
}

/// Two-mode buffer exchange `(a^2 - alpha^2) b^dagger + h.c.` with single-photon loss on `b`.
pub fn example_e(alpha: f64) -> LindbladModel {
    let a = PolyOperator::a(2, 0);
    let b = PolyOperator::a(2, 1);
    let x = &(&a * &a) - &PolyOperator::scalar(2, c(alpha * alpha, 0.0));
    let h = &(&x * &b.adjoint()) + &(&b * &x.adjoint());
    LindbladModel::new(2, vec![HamiltonianTerm::constant(1.0, h.simplified())], vec![OperatorExpr::Poly(b)]).unwrap()
}
