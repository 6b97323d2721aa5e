//! Finite truncations of the multi-mode Fock space and maps between nested truncations.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::linalg;
use crate::operators::DenseOperator;
use crate::{Rational, C64};

/// Which multi-index Fock states span a truncated subspace.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TruncationShape {
    /// All `(k_1..k_m)` with `k_j <= caps[j]`.
    Rect(Vec<usize>),
    /// All `(k_1..k_m)` with `sum_j weights[j] * k_j <= cap`.
    WeightedTotal { weights: Vec<Rational>, cap: Rational },
}

/// Increment used by [`TruncationShape::grow`] and [`TruncationShape::shrink`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShapeStep {
    PerMode(Vec<usize>),
    Cap(Rational),
}

impl ShapeStep {
    /// A step of `n` in every direction (per mode for Rect, on the cap for weighted shapes).
    pub fn uniform(shape: &TruncationShape, n: usize) -> ShapeStep {
        match shape {
            TruncationShape::Rect(caps) => ShapeStep::PerMode(vec![n; caps.len()]),
            TruncationShape::WeightedTotal { .. } => ShapeStep::Cap(Rational::from_integer(n as i64)),
        }
    }
}

impl TruncationShape {
    pub fn rect(caps: Vec<usize>) -> Result<Self> {
        if caps.is_empty() {
            return Err(Error::InvalidShape("at least one mode is required".into()));
        }
        Ok(TruncationShape::Rect(caps))
    }

    pub fn weighted(weights: Vec<Rational>, cap: Rational) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidShape("at least one mode is required".into()));
        }
        if weights.iter().any(|w| *w <= Rational::zero()) {
            return Err(Error::InvalidShape("weights must be positive".into()));
        }
        if cap < Rational::zero() {
            return Err(Error::InvalidShape("cap must be non-negative".into()));
        }
        Ok(TruncationShape::WeightedTotal { weights, cap })
    }

    pub fn mode_count(&self) -> usize {
        match self {
            TruncationShape::Rect(caps) => caps.len(),
            TruncationShape::WeightedTotal { weights, .. } => weights.len(),
        }
    }

    /// Shape predicate.
    pub fn admits(&self, k: &[usize]) -> bool {
        if k.len() != self.mode_count() {
            return false;
        }
        match self {
            TruncationShape::Rect(caps) => k.iter().zip(caps).all(|(a, b)| a <= b),
            TruncationShape::WeightedTotal { weights, cap } => {
                let mut total = Rational::zero();
                for (w, &kj) in weights.iter().zip(k) {
                    total += *w * Rational::from_integer(kj as i64);
                    if total > *cap {
                        return false;
                    }
                }
                true
            }
        }
    }

    fn grade(&self, k: &[usize]) -> Rational {
        match self {
            TruncationShape::Rect(_) => Rational::from_integer(k.iter().sum::<usize>() as i64),
            TruncationShape::WeightedTotal { weights, .. } => weights
                .iter()
                .zip(k)
                .map(|(w, &kj)| *w * Rational::from_integer(kj as i64))
                .sum(),
        }
    }

    /// Largest occupation each mode can reach inside the shape.
    pub fn bounding_box(&self) -> Vec<usize> {
        match self {
            TruncationShape::Rect(caps) => caps.clone(),
            TruncationShape::WeightedTotal { weights, cap } => weights
                .iter()
                .map(|w| (*cap / *w).floor().to_integer().max(0) as usize)
                .collect(),
        }
    }

    /// Every basis multi-index, in graded lexicographic order.
    pub fn enumerate(&self) -> Vec<Vec<usize>> {
        let bbox = self.bounding_box();
        let mut out = Vec::new();
        let mut k = vec![0usize; bbox.len()];
        loop {
            if self.admits(&k) {
                out.push(k.clone());
            }
            let mut j = bbox.len();
            loop {
                if j == 0 {
                    let mut keyed: Vec<(Rational, Vec<usize>)> =
                        out.into_iter().map(|k| (self.grade(&k), k)).collect();
                    keyed.sort_by(|a, b| match a.0.cmp(&b.0) {
                        Ordering::Equal => a.1.cmp(&b.1),
                        o => o,
                    });
                    return keyed.into_iter().map(|(_, k)| k).collect();
                }
                j -= 1;
                if k[j] < bbox[j] {
                    k[j] += 1;
                    break;
                }
                k[j] = 0;
            }
        }
    }

    pub fn dimension(&self) -> usize {
        self.enumerate().len()
    }

    /// Whether every basis state of `self` lies inside `big`.
    pub fn contained_in(&self, big: &TruncationShape) -> Result<bool> {
        if self.mode_count() != big.mode_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} modes vs {} modes",
                self.mode_count(),
                big.mode_count()
            )));
        }
        if let (TruncationShape::Rect(a), TruncationShape::Rect(b)) = (self, big) {
            return Ok(a.iter().zip(b).all(|(x, y)| x <= y));
        }
        Ok(self.enumerate().iter().all(|k| big.admits(k)))
    }

    pub fn grow(&self, step: &ShapeStep) -> Result<TruncationShape> {
        match (self, step) {
            (TruncationShape::Rect(caps), ShapeStep::PerMode(n)) if n.len() == caps.len() => {
                Ok(TruncationShape::Rect(caps.iter().zip(n).map(|(c, d)| c + d).collect()))
            }
            (TruncationShape::WeightedTotal { weights, cap }, ShapeStep::Cap(n))
                if *n >= Rational::zero() =>
            {
                Ok(TruncationShape::WeightedTotal { weights: weights.clone(), cap: *cap + *n })
            }
            _ => Err(Error::ShapeMismatch(format!("step {step:?} does not fit shape {self}"))),
        }
    }

    pub fn shrink(&self, step: &ShapeStep) -> Result<TruncationShape> {
        match (self, step) {
            (TruncationShape::Rect(caps), ShapeStep::PerMode(n)) if n.len() == caps.len() => {
                let mut out = Vec::with_capacity(caps.len());
                for (c, d) in caps.iter().zip(n) {
                    out.push(c.checked_sub(*d).ok_or(Error::InvalidShrink)?);
                }
                Ok(TruncationShape::Rect(out))
            }
            (TruncationShape::WeightedTotal { weights, cap }, ShapeStep::Cap(n))
                if *n >= Rational::zero() =>
            {
                let cap = *cap - *n;
                if cap < Rational::zero() {
                    return Err(Error::InvalidShrink);
                }
                Ok(TruncationShape::WeightedTotal { weights: weights.clone(), cap })
            }
            _ => Err(Error::ShapeMismatch(format!("step {step:?} does not fit shape {self}"))),
        }
    }

    /// Smallest enlargement of the same kind containing every state reachable by
    /// raising mode `j` at most `margin[j]` times.
    pub fn enlarged(&self, margin: &[usize]) -> TruncationShape {
        match self {
            TruncationShape::Rect(caps) => {
                TruncationShape::Rect(caps.iter().zip(margin).map(|(c, m)| c + m).collect())
            }
            TruncationShape::WeightedTotal { weights, cap } => {
                let extra: Rational = weights
                    .iter()
                    .zip(margin)
                    .map(|(w, &m)| *w * Rational::from_integer(m as i64))
                    .sum();
                TruncationShape::WeightedTotal { weights: weights.clone(), cap: *cap + extra }
            }
        }
    }

    /// Cap as a float, for display and CSV output.
    pub fn size_label(&self) -> String {
        match self {
            TruncationShape::Rect(caps) => {
                caps.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("x")
            }
            TruncationShape::WeightedTotal { cap, .. } => {
                format!("{}", cap.to_f64().unwrap_or(f64::NAN))
            }
        }
    }
}

impl fmt::Display for TruncationShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TruncationShape::Rect(caps) => write!(f, "Rect({caps:?})"),
            TruncationShape::WeightedTotal { weights, cap } => {
                let w: Vec<String> = weights.iter().map(|w| w.to_string()).collect();
                write!(f, "WeightedTotal([{}], {})", w.join(", "), cap)
            }
        }
    }
}

/// Dense index map for a shape.
#[derive(Debug)]
pub struct Basis {
    shape: TruncationShape,
    modes: usize,
    states: Vec<usize>,
    bbox: Vec<usize>,
    strides: Vec<usize>,
    lookup: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl Basis {
    /// Shared basis for `shape`; repeated requests for the same shape return the same allocation.
    pub fn of(shape: &TruncationShape) -> Arc<Basis> {
        static CACHE: OnceLock<Mutex<HashMap<TruncationShape, Arc<Basis>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(b) = cache.lock().unwrap().get(shape) {
            return b.clone();
        }
        let b = Arc::new(Basis::build(shape));
        let mut guard = cache.lock().unwrap();
        if guard.len() > 256 {
            guard.clear();
        }
        guard.entry(shape.clone()).or_insert(b).clone()
    }

    fn build(shape: &TruncationShape) -> Basis {
        let list = shape.enumerate();
        let modes = shape.mode_count();
        let bbox = shape.bounding_box();
        let mut strides = vec![1usize; modes];
        for j in (0..modes.saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * (bbox[j + 1] + 1);
        }
        let total = strides[0] * (bbox[0] + 1);
        let mut lookup = vec![ABSENT; total];
        let mut states = Vec::with_capacity(list.len() * modes);
        for (i, k) in list.iter().enumerate() {
            let flat: usize = k.iter().zip(&strides).map(|(a, s)| a * s).sum();
            lookup[flat] = i as u32;
            states.extend_from_slice(k);
        }
        Basis { shape: shape.clone(), modes, states, bbox, strides, lookup }
    }

    pub fn shape(&self) -> &TruncationShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.states.len() / self.modes
    }

    pub fn mode_count(&self) -> usize {
        self.modes
    }

    pub fn multi_index_of(&self, i: usize) -> &[usize] {
        &self.states[i * self.modes..(i + 1) * self.modes]
    }

    pub fn index_of(&self, k: &[usize]) -> Option<usize> {
        if k.len() != self.modes {
            return None;
        }
        let mut flat = 0;
        for j in 0..self.modes {
            if k[j] > self.bbox[j] {
                return None;
            }
            flat += k[j] * self.strides[j];
        }
        match self.lookup[flat] {
            ABSENT => None,
            i => Some(i as usize),
        }
    }

    /// Position of each of `self`'s states inside `big`.
    pub fn positions_in(&self, big: &Basis) -> Result<Vec<usize>> {
        (0..self.dim())
            .map(|i| big.index_of(self.multi_index_of(i)).ok_or(Error::NotContained))
            .collect()
    }
}

pub fn dimension(shape: &TruncationShape) -> usize {
    shape.dimension()
}

pub fn contains(small: &TruncationShape, big: &TruncationShape) -> Result<bool> {
    small.contained_in(big)
}

/// Zero-padded copy of `m` on the larger shape.
pub fn embed(m: &DenseOperator, big: &TruncationShape) -> Result<DenseOperator> {
    if !m.shape().contained_in(big)? {
        return Err(Error::NotContained);
    }
    let big_basis = Basis::of(big);
    let pos = m.basis().positions_in(&big_basis)?;
    let n = m.dim();
    let mut out = DenseOperator::zeros(big_basis);
    for j in 0..n {
        for i in 0..n {
            out.set(pos[i], pos[j], m.get(i, j));
        }
    }
    Ok(out)
}

/// `P M P` restricted to `small`, together with `||M - P M P||_1`.
pub fn project(m: &DenseOperator, small: &TruncationShape) -> Result<(DenseOperator, f64)> {
    if !small.contained_in(m.shape())? {
        return Err(Error::NotContained);
    }
    let small_basis = Basis::of(small);
    let pos = small_basis.positions_in(m.basis())?;
    let n = small_basis.dim();
    let mut out = DenseOperator::zeros(small_basis);
    let mut tail = m.clone();
    let mut removed = vec![true; m.dim()];
    for j in 0..n {
        removed[pos[j]] = false;
        for i in 0..n {
            out.set(i, j, m.get(pos[i], pos[j]));
            tail.set(pos[i], pos[j], C64::new(0.0, 0.0));
        }
    }
    let discarded = if tail.max_abs() == 0.0 {
        0.0
    } else if tail.is_hermitian(1e-10) {
        linalg::hermitian_trace_norm_arrow(&tail, &removed)?
    } else {
        linalg::trace_norm(&tail)?
    };
    Ok((out, discarded))
}
