//! Lindblad models, their growth margins and the truncated generator `L_N`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fockspace::{self, Basis, TruncationShape};
use crate::linalg;
use crate::operators::{
    cosine_of, exp_i_linear, rotation_phases, DenseOperator, LinearForm, PolyOperator,
    SparseOperator,
};
use crate::C64;

type CoeffEval = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Real scalar coefficient `u(t)` with optional bounds on `|u|` and `|u'|` over the run.
#[derive(Clone)]
pub struct CoefficientFn {
    label: String,
    constant: Option<f64>,
    eval: CoeffEval,
    sup: Option<f64>,
    dsup: Option<f64>,
}

impl fmt::Debug for CoefficientFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CoefficientFn({}, sup={:?}, dsup={:?})", self.label, self.sup, self.dsup)
    }
}

impl PartialEq for CoefficientFn {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label
            && self.constant == other.constant
            && self.sup == other.sup
            && self.dsup == other.dsup
    }
}

impl CoefficientFn {
    pub fn constant(c: f64) -> Self {
        CoefficientFn {
            label: format!("{c}"),
            constant: Some(c),
            eval: Arc::new(move |_| c),
            sup: Some(c.abs()),
            dsup: Some(0.0),
        }
    }

    /// Time-dependent coefficient; `label` is the textual form used when the model is written out.
    pub fn new(
        label: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sup: Option<f64>,
        dsup: Option<f64>,
    ) -> Self {
        CoefficientFn { label: label.into(), constant: None, eval: Arc::new(eval), sup, dsup }
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }

    pub fn sup(&self) -> Option<f64> {
        self.sup
    }

    pub fn dsup(&self) -> Option<f64> {
        self.dsup
    }

    /// Checks the declared bounds against `|u|` on a grid and against difference
    /// quotients between grid points (each is a value of `u'` by the mean value theorem).
    pub fn validate_bounds(&self, t_final: f64) -> Result<()> {
        if self.constant.is_some() {
            return Ok(());
        }
        let n = 2000;
        let h = t_final / n as f64;
        let mut prev = self.eval(0.0);
        for k in 0..=n {
            let t = k as f64 * h;
            let v = self.eval(t);
            if !v.is_finite() {
                return Err(Error::InvalidModel(format!("coefficient {} is not finite at t = {t}", self.label)));
            }
            if let Some(s) = self.sup {
                if v.abs() > s * (1.0 + 1e-12) + 1e-300 {
                    return Err(Error::InvalidModel(format!(
                        "coefficient {} exceeds its declared sup {s} at t = {t}",
                        self.label
                    )));
                }
            }
            if k > 0 {
                if let Some(d) = self.dsup {
                    let q = (v - prev).abs() / h;
                    if q > d * (1.0 + 1e-6) + 1e-9 {
                        return Err(Error::InvalidModel(format!(
                            "coefficient {} changes faster than its declared dsup {d} near t = {t}",
                            self.label
                        )));
                    }
                }
            }
            prev = v;
        }
        Ok(())
    }
}

/// Operator content of a Hamiltonian term or a dissipator.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorExpr {
    Poly(PolyOperator),
    /// `Gamma_k = R^k (A e^{i eta q}(Id - eps p) - Id) R^{-k}` on mode 0.
    GkpGamma { k: i64, amplitude: f64, eta: f64, eps: f64 },
    /// `cos(O)` for a real linear combination `O` of quadratures.
    Cosine(LinearForm),
}

impl OperatorExpr {
    pub fn mode_count(&self) -> Option<usize> {
        match self {
            OperatorExpr::Poly(p) => Some(p.mode_count()),
            OperatorExpr::Cosine(f) => Some(f.mode_count()),
            OperatorExpr::GkpGamma { .. } => None,
        }
    }

    pub fn is_poly(&self) -> bool {
        matches!(self, OperatorExpr::Poly(_))
    }

    /// Exact truncation `P X P` on the basis.
    pub fn truncate(&self, basis: &Arc<Basis>) -> Result<OpMatrix> {
        match self {
            OperatorExpr::Poly(p) => Ok(OpMatrix::Sparse(p.materialize_sparse(basis)?)),
            OperatorExpr::Cosine(f) => Ok(OpMatrix::Dense(cosine_of(basis, f)?)),
            OperatorExpr::GkpGamma { k, amplitude, eta, eps } => {
                Ok(OpMatrix::Dense(gkp_gamma_truncated(basis, *k, *amplitude, *eta, *eps)?))
            }
        }
    }
}

/// `Q = A (Id - eps p)`, the polynomial factor of the GKP dissipators.
pub fn gkp_q_poly(amplitude: f64, eps: f64) -> PolyOperator {
    let id = PolyOperator::identity(1);
    let p = PolyOperator::p(1, 0);
    &(&id - &(&p * C64::new(eps, 0.0))) * C64::new(amplitude, 0.0)
}

/// Exact truncation of `Gamma_k` on a single-mode rectangular basis.
pub fn gkp_gamma_truncated(basis: &Arc<Basis>, k: i64, amplitude: f64, eta: f64, eps: f64) -> Result<DenseOperator> {
    let caps = match basis.shape() {
        TruncationShape::Rect(c) if c.len() == 1 => c[0],
        s => return Err(Error::InvalidModel(format!("GKP dissipators need a single-mode Rect shape, got {s}"))),
    };
    let up = Basis::of(&TruncationShape::Rect(vec![caps + 1]));
    let q = gkp_q_poly(amplitude, eps).materialize(&up)?;
    let u = exp_i_linear(&up, &LinearForm::position(1, 0, eta))?;
    let uq = &u * &q;
    let n = basis.dim();
    let mut g = DenseOperator::from_fn(basis.clone(), |i, j| uq.get(i, j));
    for i in 0..n {
        g.add_at(i, i, C64::new(-1.0, 0.0));
    }
    Ok(g.conjugate_diagonal(&rotation_phases(basis, k)))
}

/// A truncated operator in whichever storage suits it.
#[derive(Debug, Clone)]
pub enum OpMatrix {
    Sparse(SparseOperator),
    Dense(DenseOperator),
}

impl OpMatrix {
    pub fn to_dense(&self) -> DenseOperator {
        match self {
            OpMatrix::Sparse(s) => s.to_dense(),
            OpMatrix::Dense(d) => d.clone(),
        }
    }

    pub fn adjoint(&self) -> OpMatrix {
        match self {
            OpMatrix::Sparse(s) => OpMatrix::Sparse(s.adjoint()),
            OpMatrix::Dense(d) => OpMatrix::Dense(d.adjoint()),
        }
    }

    pub fn mul(&self, other: &OpMatrix) -> OpMatrix {
        match (self, other) {
            (OpMatrix::Sparse(a), OpMatrix::Sparse(b)) => OpMatrix::Sparse(a.mul_sparse(b)),
            (a, b) => OpMatrix::Dense(&a.to_dense() * &b.to_dense()),
        }
    }

    /// `out += s * self * x`.
    pub fn left_mul_acc(&self, x: &DenseOperator, s: C64, out: &mut DenseOperator) {
        match self {
            OpMatrix::Sparse(m) => m.left_mul_acc(x, s, out),
            OpMatrix::Dense(m) => out.axpy(s, &(m * x)),
        }
    }

    /// `out += s * x * self`.
    pub fn right_mul_acc(&self, x: &DenseOperator, s: C64, out: &mut DenseOperator) {
        match self {
            OpMatrix::Sparse(m) => m.right_mul_acc(x, s, out),
            OpMatrix::Dense(m) => out.axpy(s, &(x * m)),
        }
    }

    pub fn left_mul(&self, x: &DenseOperator) -> DenseOperator {
        let mut out = DenseOperator::zeros(x.basis().clone());
        self.left_mul_acc(x, C64::new(1.0, 0.0), &mut out);
        out
    }

    pub fn right_mul(&self, x: &DenseOperator) -> DenseOperator {
        let mut out = DenseOperator::zeros(x.basis().clone());
        self.right_mul_acc(x, C64::new(1.0, 0.0), &mut out);
        out
    }

    /// Calls `f(row, col)` for every structurally nonzero entry.
    pub fn for_each_nonzero(&self, mut f: impl FnMut(usize, usize)) {
        match self {
            OpMatrix::Sparse(s) => {
                for (i, j, _) in s.triplets() {
                    f(i, j)
                }
            }
            OpMatrix::Dense(d) => {
                for j in 0..d.dim() {
                    for i in 0..d.dim() {
                        if d.get(i, j) != C64::new(0.0, 0.0) {
                            f(i, j)
                        }
                    }
                }
            }
        }
    }
}

/// `u(t) * H_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianTerm {
    pub coeff: CoefficientFn,
    pub op: OperatorExpr,
}

impl HamiltonianTerm {
    pub fn new(coeff: CoefficientFn, op: OperatorExpr) -> Self {
        HamiltonianTerm { coeff, op }
    }

    pub fn constant(c: f64, op: PolyOperator) -> Self {
        HamiltonianTerm { coeff: CoefficientFn::constant(c), op: OperatorExpr::Poly(op) }
    }
}

/// Shape-independent description of `L(rho) = -i[H(t), rho] + sum_k D_{Gamma_k}(rho)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladModel {
    pub modes: usize,
    pub hamiltonian: Vec<HamiltonianTerm>,
    pub dissipators: Vec<OperatorExpr>,
    pub params: BTreeMap<String, f64>,
}

/// Enlargement guaranteeing `L(rho_N) = L_{N+d}(rho_N)` for polynomial models.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrowthMargin {
    /// `max(d_H, 2 max_k d_{Gamma_k})` from the degrees alone.
    pub uniform: usize,
    /// Sharper per-mode margin from the net number of quanta each term can add.
    pub per_mode: Vec<usize>,
}

impl LindbladModel {
    pub fn new(
        modes: usize,
        hamiltonian: Vec<HamiltonianTerm>,
        dissipators: Vec<OperatorExpr>,
    ) -> Result<Self> {
        let m = LindbladModel { modes, hamiltonian, dissipators, params: BTreeMap::new() };
        m.validate()?;
        Ok(m)
    }

    pub fn with_params(mut self, params: BTreeMap<String, f64>) -> Self {
        self.params = params;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes == 0 {
            return Err(Error::InvalidModel("a model needs at least one mode".into()));
        }
        for (i, term) in self.hamiltonian.iter().enumerate() {
            match &term.op {
                OperatorExpr::Poly(p) => {
                    let scale = p.terms().iter().map(|(c, _)| c.norm()).fold(1.0, f64::max);
                    if !p.is_hermitian(1e-12 * scale) {
                        return Err(Error::InvalidModel(format!("Hamiltonian term {i} is not Hermitian")));
                    }
                }
                OperatorExpr::Cosine(_) => {}
                OperatorExpr::GkpGamma { .. } => {
                    return Err(Error::InvalidModel(format!(
                        "Hamiltonian term {i}: GKP operators are only allowed as dissipators"
                    )))
                }
            }
        }
        for (i, op) in self.hamiltonian.iter().map(|t| &t.op).chain(&self.dissipators).enumerate() {
            match op.mode_count() {
                Some(m) if m != self.modes => {
                    return Err(Error::InvalidModel(format!(
                        "operator {i} acts on {m} modes but the model has {}",
                        self.modes
                    )))
                }
                None if self.modes != 1 => {
                    return Err(Error::InvalidModel("GKP dissipators require a single-mode model".into()))
                }
                _ => {}
            }
        }
        if let Some(OperatorExpr::GkpGamma { k, .. }) =
            self.dissipators.iter().find(|d| matches!(d, OperatorExpr::GkpGamma { k, .. } if !(0..4).contains(k)))
        {
            return Err(Error::InvalidModel(format!("GKP rotation index {k} is outside 0..3")));
        }
        Ok(())
    }

    pub fn is_polynomial(&self) -> bool {
        self.hamiltonian.iter().all(|t| t.op.is_poly()) && self.dissipators.iter().all(|d| d.is_poly())
    }

    pub fn is_time_dependent(&self) -> bool {
        self.hamiltonian.iter().any(|t| t.coeff.as_constant().is_none())
    }

    /// Copy containing only the polynomial terms.
    pub fn polynomial_part(&self) -> LindbladModel {
        LindbladModel {
            modes: self.modes,
            hamiltonian: self.hamiltonian.iter().filter(|t| t.op.is_poly()).cloned().collect(),
            dissipators: self.dissipators.iter().filter(|d| d.is_poly()).cloned().collect(),
            params: self.params.clone(),
        }
    }

    /// Growth margin, or `None` when a non-polynomial expression makes it unbounded.
    pub fn growth_margin(&self) -> Option<GrowthMargin> {
        let mut uniform = 0;
        let mut per_mode = vec![0usize; self.modes];
        for term in &self.hamiltonian {
            let OperatorExpr::Poly(h) = &term.op else { return None };
            uniform = uniform.max(h.degree());
            for (m, r) in per_mode.iter_mut().zip(h.max_raise()) {
                *m = (*m).max(r);
            }
        }
        for d in &self.dissipators {
            let OperatorExpr::Poly(g) = d else { return None };
            uniform = uniform.max(2 * g.degree());
            for (m, r) in per_mode.iter_mut().zip(dissipator_margin(g)) {
                *m = (*m).max(r);
            }
        }
        Some(GrowthMargin { uniform, per_mode })
    }
}

/// Per-mode enlargement under which `Gamma rho Gamma^dagger` and `Gamma^dagger Gamma rho`
/// computed from truncations agree with the untruncated expressions.
pub fn dissipator_margin(g: &PolyOperator) -> Vec<usize> {
    let m = g.mode_count();
    let raise = g.max_raise();
    let (Some(up), Some(down)) = (g.max_net(), g.adjoint().max_net()) else { return vec![0; m] };
    (0..m).map(|j| raise[j].max((up[j] + down[j]).max(0) as usize)).collect()
}

pub fn growth_margin(model: &LindbladModel) -> Option<GrowthMargin> {
    model.growth_margin()
}

/// Combines models acting on disjoint groups of modes, then appends coupling terms
/// written for the combined system.
pub fn tensor_assemble(parts: &[LindbladModel], coupling: Vec<HamiltonianTerm>) -> Result<LindbladModel> {
    let modes: usize = parts.iter().map(|p| p.modes).sum();
    let mut hamiltonian = Vec::new();
    let mut dissipators = Vec::new();
    let mut params = BTreeMap::new();
    let mut offset = 0;
    let shift = |op: &OperatorExpr, offset: usize| -> Result<OperatorExpr> {
        Ok(match op {
            OperatorExpr::Poly(p) => OperatorExpr::Poly(p.with_modes(modes, offset)?),
            OperatorExpr::Cosine(f) => {
                let mut q = vec![0.0; modes];
                let mut p = vec![0.0; modes];
                q[offset..offset + f.mode_count()].copy_from_slice(&f.q);
                p[offset..offset + f.mode_count()].copy_from_slice(&f.p);
                OperatorExpr::Cosine(LinearForm::new(q, p)?)
            }
            g @ OperatorExpr::GkpGamma { .. } => {
                if modes != 1 {
                    return Err(Error::InvalidModel("GKP dissipators require a single-mode model".into()));
                }
                g.clone()
            }
        })
    };
    for part in parts {
        for t in &part.hamiltonian {
            hamiltonian.push(HamiltonianTerm { coeff: t.coeff.clone(), op: shift(&t.op, offset)? });
        }
        for d in &part.dissipators {
            dissipators.push(shift(d, offset)?);
        }
        for (k, v) in &part.params {
            if let Some(old) = params.insert(k.clone(), *v) {
                if old != *v {
                    return Err(Error::InvalidModel(format!("parameter {k} has conflicting values")));
                }
            }
        }
        offset += part.modes;
    }
    hamiltonian.extend(coupling);
    let model = LindbladModel { modes, hamiltonian, dissipators, params };
    model.validate()?;
    Ok(model)
}

#[derive(Debug, Clone)]
struct DissTerm {
    gamma: OpMatrix,
    gamma_dag: OpMatrix,
    k: OpMatrix,
}

/// Truncated Lindbladian `L_N` of a model on one basis, with all operators materialized.
#[derive(Debug, Clone)]
pub struct Generator {
    basis: Arc<Basis>,
    ham: Vec<(CoefficientFn, OpMatrix)>,
    diss: Vec<DissTerm>,
}

impl Generator {
    pub fn new(model: &LindbladModel, basis: &Arc<Basis>) -> Result<Self> {
        if basis.mode_count() != model.modes {
            return Err(Error::ShapeMismatch(format!(
                "model has {} modes, shape {} has {}",
                model.modes,
                basis.shape(),
                basis.mode_count()
            )));
        }
        let mut ham = Vec::new();
        for t in &model.hamiltonian {
            ham.push((t.coeff.clone(), t.op.truncate(basis)?));
        }
        let mut diss = Vec::new();
        for d in &model.dissipators {
            let gamma = d.truncate(basis)?;
            let gamma_dag = gamma.adjoint();
            let k = gamma_dag.mul(&gamma);
            diss.push(DissTerm { gamma, gamma_dag, k });
        }
        Ok(Generator { basis: basis.clone(), ham, diss })
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn shape(&self) -> &TruncationShape {
        self.basis.shape()
    }

    fn check(&self, rho: &DenseOperator) -> Result<()> {
        if rho.shape() != self.shape() {
            return Err(Error::ShapeMismatch(format!("state on {}, generator on {}", rho.shape(), self.shape())));
        }
        Ok(())
    }

    fn add_commutator(op: &OpMatrix, u: f64, rho: &DenseOperator, out: &mut DenseOperator) {
        if u == 0.0 {
            return;
        }
        op.left_mul_acc(rho, C64::new(0.0, -u), out);
        op.right_mul_acc(rho, C64::new(0.0, u), out);
    }

    fn add_dissipators(&self, rho: &DenseOperator, out: &mut DenseOperator) {
        let half = C64::new(-0.5, 0.0);
        for d in &self.diss {
            let g_rho = d.gamma.left_mul(rho);
            d.gamma_dag.right_mul_acc(&g_rho, C64::new(1.0, 0.0), out);
            d.k.left_mul_acc(rho, half, out);
            d.k.right_mul_acc(rho, half, out);
        }
    }

    /// `L_N(t, rho)`.
    pub fn apply(&self, t: f64, rho: &DenseOperator) -> Result<DenseOperator> {
        self.check(rho)?;
        let mut out = DenseOperator::zeros(self.basis.clone());
        for (c, h) in &self.ham {
            Self::add_commutator(h, c.eval(t), rho, &mut out);
        }
        self.add_dissipators(rho, &mut out);
        Ok(out)
    }

    /// Dissipators plus constant-coefficient Hamiltonian terms.
    pub fn apply_static(&self, rho: &DenseOperator) -> Result<DenseOperator> {
        self.check(rho)?;
        let mut out = DenseOperator::zeros(self.basis.clone());
        for (c, h) in &self.ham {
            if let Some(u) = c.as_constant() {
                Self::add_commutator(h, u, rho, &mut out);
            }
        }
        self.add_dissipators(rho, &mut out);
        Ok(out)
    }

    /// Indices of Hamiltonian terms with time-dependent coefficients.
    pub fn time_dependent_terms(&self) -> Vec<usize> {
        (0..self.ham.len()).filter(|&i| self.ham[i].0.as_constant().is_none()).collect()
    }

    pub fn coefficient(&self, i: usize) -> &CoefficientFn {
        &self.ham[i].0
    }

    /// `-i[H_i, rho]` without the coefficient.
    pub fn apply_hamiltonian_term(&self, i: usize, rho: &DenseOperator) -> Result<DenseOperator> {
        self.check(rho)?;
        let mut out = DenseOperator::zeros(self.basis.clone());
        Self::add_commutator(&self.ham[i].1, 1.0, rho, &mut out);
        Ok(out)
    }

    /// Whether any operator of this generator couples index `i` and index `j`.
    pub fn coupling_mask(&self, outside: &[bool]) -> Vec<bool> {
        let mut mask = outside.to_vec();
        let mut mark = |i: usize, j: usize| {
            if outside[i] && !outside[j] {
                mask[j] = true;
            }
            if outside[j] && !outside[i] {
                mask[i] = true;
            }
        };
        for (_, h) in &self.ham {
            h.for_each_nonzero(&mut mark);
        }
        for d in &self.diss {
            d.gamma.for_each_nonzero(&mut mark);
            d.k.for_each_nonzero(&mut mark);
        }
        mask
    }

    /// Superoperator matrix of `L_N(t)` acting on column-stacked states (for small dimensions).
    pub fn superoperator(&self, t: f64) -> Result<Vec<C64>> {
        let n = self.basis.dim();
        let nn = n * n;
        let mut s = vec![C64::new(0.0, 0.0); nn * nn];
        for col in 0..nn {
            let mut e = DenseOperator::zeros(self.basis.clone());
            e.as_mut_slice()[col] = C64::new(1.0, 0.0);
            let img = self.apply(t, &e)?;
            for (row, v) in img.as_slice().iter().enumerate() {
                s[row * nn + col] = *v;
            }
        }
        Ok(s)
    }
}

/// `L_N(t, rho)` on the shape of `rho`.
pub fn apply_truncated(model: &LindbladModel, t: f64, rho: &DenseOperator) -> Result<DenseOperator> {
    Generator::new(model, rho.basis())?.apply(t, rho)
}

/// Shape on which `L(rho_N)` is represented exactly.
pub fn exact_shape(model: &LindbladModel, shape: &TruncationShape) -> Result<TruncationShape> {
    let margin = model.growth_margin().ok_or_else(|| {
        Error::InvalidModel("exact application needs a polynomial model".into())
    })?;
    Ok(shape.enlarged(&margin.per_mode))
}

/// `L(rho_N)`, realized on the shape grown by the growth margin.
pub fn apply_exact_embedded(model: &LindbladModel, t: f64, rho: &DenseOperator) -> Result<DenseOperator> {
    let big = exact_shape(model, rho.shape())?;
    let rho_big = fockspace::embed(rho, &big)?;
    Generator::new(model, rho_big.basis())?.apply(t, &rho_big)
}

/// Density matrix at a time.
#[derive(Debug, Clone)]
pub struct DensityState {
    pub rho: DenseOperator,
    pub time: f64,
}

impl DensityState {
    pub fn new(rho: DenseOperator, time: f64) -> Self {
        DensityState { rho, time }
    }

    /// Soft checks of the density-matrix invariants; returns human-readable warnings.
    pub fn check(&self, expected_trace: f64, check_psd: bool) -> Vec<String> {
        let mut warnings = Vec::new();
        let defect = self.rho.hermiticity_defect();
        if defect > 1e-10 {
            warnings.push(format!("t={}: relative Hermiticity defect {defect:e}", self.time));
        }
        let tr = self.rho.trace();
        if (tr.re - expected_trace).abs() > 1e-8 || tr.im.abs() > 1e-8 {
            warnings.push(format!("t={}: trace {} differs from {expected_trace}", self.time, tr));
        }
        if check_psd {
            match linalg::hermitian_eigenvalues(&self.rho) {
                Ok(ev) => {
                    if let Some(&low) = ev.first() {
                        if low < -1e-8 {
                            warnings.push(format!("t={}: smallest eigenvalue {low:e}", self.time));
                        }
                    }
                }
                Err(e) => warnings.push(format!("t={}: eigenvalue check failed: {e}", self.time)),
            }
        }
        warnings
    }
}
