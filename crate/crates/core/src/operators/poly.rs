use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fockspace::Basis;
use crate::operators::{DenseOperator, SparseOperator};
use crate::C64;

/// Creation (`dagger = true`) or annihilation operator on one mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter {
    pub mode: usize,
    pub dagger: bool,
}

impl Letter {
    pub fn a(mode: usize) -> Self {
        Letter { mode, dagger: false }
    }

    pub fn ad(mode: usize) -> Self {
        Letter { mode, dagger: true }
    }
}

/// Product of letters, written left to right as in `ad0 * a0`.
pub type Word = Vec<Letter>;

/// Polynomial in the creation and annihilation operators of several modes.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyOperator {
    modes: usize,
    terms: Vec<(C64, Word)>,
}

impl PolyOperator {
    pub fn zero(modes: usize) -> Self {
        PolyOperator { modes, terms: Vec::new() }
    }

    pub fn identity(modes: usize) -> Self {
        Self::scalar(modes, C64::new(1.0, 0.0))
    }

    pub fn scalar(modes: usize, c: C64) -> Self {
        PolyOperator { modes, terms: vec![(c, Vec::new())] }.simplified()
    }

    pub fn word(modes: usize, c: C64, word: Word) -> Self {
        PolyOperator { modes, terms: vec![(c, word)] }.simplified()
    }

    pub fn a(modes: usize, j: usize) -> Self {
        Self::word(modes, C64::new(1.0, 0.0), vec![Letter::a(j)])
    }

    pub fn ad(modes: usize, j: usize) -> Self {
        Self::word(modes, C64::new(1.0, 0.0), vec![Letter::ad(j)])
    }

    /// Position quadrature `(a + a^dagger) / sqrt 2`.
    pub fn q(modes: usize, j: usize) -> Self {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        &(&Self::a(modes, j) + &Self::ad(modes, j)) * s
    }

    /// Momentum quadrature `(a - a^dagger) / (i sqrt 2)`.
    pub fn p(modes: usize, j: usize) -> Self {
        let s = C64::new(0.0, -std::f64::consts::FRAC_1_SQRT_2);
        &(&Self::a(modes, j) - &Self::ad(modes, j)) * s
    }

    pub fn number(modes: usize, j: usize) -> Self {
        Self::word(modes, C64::new(1.0, 0.0), vec![Letter::ad(j), Letter::a(j)])
    }

    pub fn from_terms(modes: usize, terms: Vec<(C64, Word)>) -> Result<Self> {
        if terms.iter().flat_map(|(_, w)| w).any(|l| l.mode >= modes) {
            return Err(Error::InvalidModel(format!("letter refers to a mode beyond {modes}")));
        }
        Ok(PolyOperator { modes, terms }.simplified())
    }

    pub fn mode_count(&self) -> usize {
        self.modes
    }

    pub fn terms(&self) -> &[(C64, Word)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Merges identical words and drops zero coefficients; term order is canonical.
    pub fn simplified(self) -> Self {
        let mut acc: BTreeMap<Word, C64> = BTreeMap::new();
        for (c, w) in self.terms {
            *acc.entry(w).or_insert(C64::new(0.0, 0.0)) += c;
        }
        let terms = acc
            .into_iter()
            .filter(|(_, c)| *c != C64::new(0.0, 0.0))
            .map(|(w, c)| (c, w))
            .collect();
        PolyOperator { modes: self.modes, terms }
    }

    pub fn adjoint(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(c, w)| {
                let w = w.iter().rev().map(|l| Letter { mode: l.mode, dagger: !l.dagger }).collect();
                (c.conj(), w)
            })
            .collect();
        PolyOperator { modes: self.modes, terms }.simplified()
    }

    /// Longest word length.
    pub fn degree(&self) -> usize {
        self.terms.iter().map(|(_, w)| w.len()).max().unwrap_or(0)
    }

    /// Largest net number of quanta a single term adds to each mode (never negative).
    pub fn max_raise(&self) -> Vec<usize> {
        let mut out = vec![0usize; self.modes];
        for (_, w) in &self.terms {
            let net = net_change(self.modes, w);
            for j in 0..self.modes {
                out[j] = out[j].max(net[j].max(0) as usize);
            }
        }
        out
    }

    /// Largest net change (possibly negative) per mode over all terms; `None` for the zero polynomial.
    pub fn max_net(&self) -> Option<Vec<i64>> {
        let mut out: Option<Vec<i64>> = None;
        for (_, w) in &self.terms {
            let net = net_change(self.modes, w);
            out = Some(match out {
                None => net,
                Some(o) => o.iter().zip(&net).map(|(a, b)| *a.max(b)).collect(),
            });
        }
        out
    }

    /// Same polynomial on a larger system, with mode `j` renamed to `j + offset`.
    pub fn with_modes(&self, modes: usize, offset: usize) -> Result<Self> {
        let terms = self
            .terms
            .iter()
            .map(|(c, w)| (*c, w.iter().map(|l| Letter { mode: l.mode + offset, dagger: l.dagger }).collect()))
            .collect();
        Self::from_terms(modes, terms)
    }

    /// Whether the polynomial equals its adjoint term by term.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        let d = self - &self.adjoint();
        d.terms.iter().all(|(c, _)| c.norm() <= tol)
    }

    /// Exact truncation `P Q P`: each word acts on Fock states of the untruncated space
    /// and only the final state is projected, so no intermediate state is ever lost.
    pub fn materialize_sparse(&self, basis: &Arc<Basis>) -> Result<SparseOperator> {
        if basis.mode_count() != self.modes {
            return Err(Error::ShapeMismatch(format!(
                "operator on {} modes, shape on {}",
                self.modes,
                basis.mode_count()
            )));
        }
        let n = basis.dim();
        let mut trip = Vec::new();
        let mut k = vec![0usize; self.modes];
        for col in 0..n {
            for (c, w) in &self.terms {
                k.copy_from_slice(basis.multi_index_of(col));
                let mut amp = *c;
                let mut alive = true;
                for l in w.iter().rev() {
                    if l.dagger {
                        k[l.mode] += 1;
                        amp *= (k[l.mode] as f64).sqrt();
                    } else {
                        if k[l.mode] == 0 {
                            alive = false;
                            break;
                        }
                        amp *= (k[l.mode] as f64).sqrt();
                        k[l.mode] -= 1;
                    }
                }
                if alive {
                    if let Some(row) = basis.index_of(&k) {
                        trip.push((row, col, amp));
                    }
                }
            }
        }
        Ok(SparseOperator::from_triplets(basis.clone(), trip))
    }

    pub fn materialize(&self, basis: &Arc<Basis>) -> Result<DenseOperator> {
        Ok(self.materialize_sparse(basis)?.to_dense())
    }
}

fn net_change(modes: usize, w: &Word) -> Vec<i64> {
    let mut net = vec![0i64; modes];
    for l in w {
        net[l.mode] += if l.dagger { 1 } else { -1 };
    }
    net
}

impl Add for &PolyOperator {
    type Output = PolyOperator;
    fn add(self, rhs: &PolyOperator) -> PolyOperator {
        assert_eq!(self.modes, rhs.modes, "mode count mismatch");
        let terms = self.terms.iter().chain(&rhs.terms).cloned().collect();
        PolyOperator { modes: self.modes, terms }.simplified()
    }
}

impl Sub for &PolyOperator {
    type Output = PolyOperator;
    fn sub(self, rhs: &PolyOperator) -> PolyOperator {
        self + &(-rhs)
    }
}

impl Neg for &PolyOperator {
    type Output = PolyOperator;
    fn neg(self) -> PolyOperator {
        self * C64::new(-1.0, 0.0)
    }
}

impl Mul for &PolyOperator {
    type Output = PolyOperator;
    fn mul(self, rhs: &PolyOperator) -> PolyOperator {
        assert_eq!(self.modes, rhs.modes, "mode count mismatch");
        let mut terms = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for (c1, w1) in &self.terms {
            for (c2, w2) in &rhs.terms {
                let mut w = w1.clone();
                w.extend_from_slice(w2);
                terms.push((c1 * c2, w));
            }
        }
        PolyOperator { modes: self.modes, terms }.simplified()
    }
}

impl Mul<C64> for &PolyOperator {
    type Output = PolyOperator;
    fn mul(self, s: C64) -> PolyOperator {
        let terms = self.terms.iter().map(|(c, w)| (c * s, w.clone())).collect();
        PolyOperator { modes: self.modes, terms }.simplified()
    }
}

impl fmt::Display for PolyOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (t, (c, w)) in self.terms.iter().enumerate() {
            if t > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({}{:+}i)", c.re, c.im)?;
            if w.is_empty() {
                write!(f, "*id")?;
            }
            for l in w {
                write!(f, "*{}{}", if l.dagger { "ad" } else { "a" }, l.mode)?;
            }
        }
        Ok(())
    }
}
