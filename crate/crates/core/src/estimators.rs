//! Certified error bounds: truncation defects, the accumulated estimator `xi`, and
//! time-discretization bounds for Taylor and explicit Euler steps.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fockspace::{self, Basis, TruncationShape};
use crate::lindblad::{
    dissipator_margin, gkp_q_poly, Generator, LindbladModel, OperatorExpr,
};
use crate::linalg;
use crate::operators::{displacement_tail, exp_i_linear, rotation_phases, DenseOperator, LinearForm, PolyOperator};
use crate::C64;
use faer::Mat;

/// Category of a ledger entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LedgerKind {
    SpaceDefect,
    ShrinkJump,
    InitProjection,
    TimeTaylor,
    TimeEuler,
}

impl LedgerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LedgerKind::SpaceDefect => "space_defect",
            LedgerKind::ShrinkJump => "shrink_jump",
            LedgerKind::InitProjection => "init_projection",
            LedgerKind::TimeTaylor => "time_taylor",
            LedgerKind::TimeEuler => "time_euler",
        }
    }
}

impl fmt::Display for LedgerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    pub time: f64,
    pub kind: LedgerKind,
    pub value: f64,
}

/// Append-only record of every contribution to the certified bound `xi`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EstimatorLedger {
    xi: f64,
    entries: Vec<LedgerEntry>,
}

impl EstimatorLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn total(&self, kind: LedgerKind) -> f64 {
        self.entries.iter().filter(|e| e.kind == kind).fold(0.0, |s, e| s + e.value)
    }

    pub fn push(&mut self, time: f64, kind: LedgerKind, value: f64) -> Result<()> {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::InvalidInput(format!("ledger value {value} for {kind} is not a finite non-negative number")));
        }
        if let Some(last) = self.entries.last() {
            if time < last.time {
                return Err(Error::InvalidInput(format!("ledger time {time} precedes {}", last.time)));
            }
        }
        self.entries.push(LedgerEntry { time, kind, value });
        self.xi += value;
        Ok(())
    }
}

/// Rectangle-rule update `xi += dt * defect` at the accepted endpoint `t_new`.
pub fn xi_step(ledger: &mut EstimatorLedger, t_new: f64, defect: f64, dt: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("time step {dt} must be positive")));
    }
    ledger.push(t_new, LedgerKind::SpaceDefect, dt * defect)
}

pub fn global_time_bound(per_step: &[f64]) -> f64 {
    per_step.iter().sum()
}

struct GenericPlan {
    small: Generator,
    big: Option<(Generator, Vec<usize>, Vec<bool>)>,
}

/// Evaluates `||(L - L_N) rho_N||_1` for a model, caching the operators of every shape seen.
///
/// The polynomial part is measured exactly on the grown shape; GKP dissipators and cosine
/// Hamiltonian terms add their dedicated bounds through the triangle inequality.
pub struct SpaceEstimator {
    poly: LindbladModel,
    margin: Vec<usize>,
    cosine_terms: Vec<(usize, LinearForm)>,
    gkp: Vec<(i64, f64, f64, f64)>,
    coeffs: Vec<crate::lindblad::CoefficientFn>,
    plans: HashMap<TruncationShape, Arc<GenericPlan>>,
}

impl SpaceEstimator {
    pub fn new(model: &LindbladModel) -> Result<Self> {
        let poly = model.polynomial_part();
        let margin = poly
            .growth_margin()
            .map(|m| m.per_mode)
            .unwrap_or_else(|| vec![0; model.modes]);
        let mut cosine_terms = Vec::new();
        let coeffs = model.hamiltonian.iter().map(|t| t.coeff.clone()).collect();
        for (i, t) in model.hamiltonian.iter().enumerate() {
            if let OperatorExpr::Cosine(f) = &t.op {
                cosine_terms.push((i, f.clone()));
            }
        }
        let mut gkp = Vec::new();
        for d in &model.dissipators {
            match d {
                OperatorExpr::GkpGamma { k, amplitude, eta, eps } => gkp.push((*k, *amplitude, *eta, *eps)),
                OperatorExpr::Cosine(_) => {
                    return Err(Error::InvalidModel("no defect estimator for cosine dissipators".into()))
                }
                OperatorExpr::Poly(_) => {}
            }
        }
        Ok(SpaceEstimator { poly, margin, cosine_terms, gkp, coeffs, plans: HashMap::new() })
    }

    pub fn margin(&self) -> &[usize] {
        &self.margin
    }

    fn plan(&mut self, basis: &Arc<Basis>) -> Result<Arc<GenericPlan>> {
        if let Some(p) = self.plans.get(basis.shape()) {
            return Ok(p.clone());
        }
        let small = Generator::new(&self.poly, basis)?;
        let big_shape = basis.shape().enlarged(&self.margin);
        let big = if &big_shape == basis.shape() {
            None
        } else {
            let bb = Basis::of(&big_shape);
            let gen = Generator::new(&self.poly, &bb)?;
            let pos = basis.positions_in(&bb)?;
            let mut outside = vec![true; bb.dim()];
            for &p in &pos {
                outside[p] = false;
            }
            let mask = gen.coupling_mask(&outside);
            Some((gen, pos, mask))
        };
        let plan = Arc::new(GenericPlan { small, big });
        if self.plans.len() > 64 {
            self.plans.clear();
        }
        self.plans.insert(basis.shape().clone(), plan.clone());
        Ok(plan)
    }

    /// Defect of the polynomial part only; `l_rho` may carry an already computed `L_N(t, rho)`
    /// of the polynomial part.
    pub fn polynomial_defect(&mut self, t: f64, rho: &DenseOperator, l_rho: Option<&DenseOperator>) -> Result<f64> {
        let asym = rho.hermiticity_defect();
        if asym > linalg::HERMITIAN_GUARD {
            return Err(Error::NotHermitian(asym));
        }
        let plan = self.plan(rho.basis())?;
        let Some((big, pos, mask)) = &plan.big else { return Ok(0.0) };
        let small_img = match l_rho {
            Some(l) => l.clone(),
            None => plan.small.apply(t, rho)?,
        };
        let n = rho.dim();
        let mut rho_big = DenseOperator::zeros(big.basis().clone());
        for j in 0..n {
            for i in 0..n {
                rho_big.set(pos[i], pos[j], rho.get(i, j));
            }
        }
        let mut d = big.apply(t, &rho_big)?;
        for j in 0..n {
            for i in 0..n {
                d.add_at(pos[i], pos[j], -small_img.get(i, j));
            }
        }
        linalg::hermitian_trace_norm_arrow(&d.herm_part(), mask)
    }

    /// Whether `L_N` of the polynomial part equals `L_N` of the whole model.
    pub fn is_polynomial(&self) -> bool {
        self.cosine_terms.is_empty() && self.gkp.is_empty()
    }

    /// Certified bound on `||(L - L_N)(t) rho||_1`.
    pub fn defect(&mut self, t: f64, rho: &DenseOperator, l_rho: Option<&DenseOperator>) -> Result<f64> {
        let l_poly = if self.is_polynomial() { l_rho } else { None };
        let mut total = self.polynomial_defect(t, rho, l_poly)?;
        for (i, form) in &self.cosine_terms {
            let u = self.coeffs[*i].eval(t);
            if u != 0.0 {
                total += 2.0 * u.abs() * cosine_defect(form, rho)?;
            }
        }
        for &(k, amp, eta, eps) in &self.gkp {
            let phases = rotation_phases(rho.basis(), -k);
            total += gkp_f(amp, eta, eps, &rho.conjugate_diagonal(&phases))?;
        }
        Ok(total)
    }
}

/// `||(L - L_N)(t) rho_N||_1` for a polynomial model, realized exactly on the grown shape.
pub fn space_defect_generic(model: &LindbladModel, t: f64, rho: &DenseOperator) -> Result<f64> {
    if !model.is_polynomial() {
        return Err(Error::InvalidModel("the generic defect needs a polynomial model".into()));
    }
    SpaceEstimator::new(model)?.polynomial_defect(t, rho, None)
}

fn single_mode_cap(rho: &DenseOperator) -> Result<usize> {
    match rho.shape() {
        TruncationShape::Rect(c) if c.len() == 1 => Ok(c[0]),
        s => Err(Error::InvalidInput(format!("expected a single-mode Rect shape, got {s}"))),
    }
}

/// `(rho^2)_{ab}` for Hermitian `rho`.
fn rho_sq(rho: &DenseOperator, a: usize, b: usize) -> C64 {
    // (rho^2)_{ab} = sum_k conj(rho_{ka}) rho_{kb}
    rho.col(a).iter().zip(rho.col(b)).map(|(x, y)| x.conj() * y).sum()
}

/// Drive defect `2|u| sqrt(N+1) sqrt(<N|rho^2|N>)` for `H = u (a + a^dagger)`.
pub fn defect_drive_closed_form(u: f64, rho: &DenseOperator) -> Result<f64> {
    let n = single_mode_cap(rho)?;
    let r = rho_sq(rho, n, n).re.max(0.0);
    Ok(2.0 * u.abs() * ((n + 1) as f64).sqrt() * r.sqrt())
}

/// Two-photon-loss defect for `Gamma = a^2 - alpha^2 Id`:
/// `alpha^2 sqrt(N+1) tr sqrt(rho (N |N-1><N-1| + (N+2) |N><N|) rho)`.
pub fn defect_cat_closed_form(alpha: f64, rho: &DenseOperator) -> Result<f64> {
    let n = single_mode_cap(rho)?;
    let nf = n as f64;
    let pref = alpha * alpha * (nf + 1.0).sqrt();
    if pref == 0.0 {
        return Ok(0.0);
    }
    let g_hi = rho_sq(rho, n, n).re.max(0.0);
    if n == 0 {
        return Ok(pref * (2.0 * g_hi).sqrt());
    }
    // tr sqrt(rho A rho) = tr sqrt(A^{1/2} rho^2 A^{1/2}), a 2x2 problem on rows N-1, N.
    let g_lo = rho_sq(rho, n - 1, n - 1).re.max(0.0);
    let g_off = rho_sq(rho, n - 1, n);
    let m11 = nf * g_lo;
    let m22 = (nf + 2.0) * g_hi;
    let m12 = (nf * (nf + 2.0)).sqrt() * g_off.norm();
    let tr = m11 + m22;
    let det = (m11 * m22 - m12 * m12).max(0.0);
    // sqrt(l1) + sqrt(l2) = sqrt(l1 + l2 + 2 sqrt(l1 l2))
    Ok(pref * (tr + 2.0 * det.sqrt()).max(0.0).sqrt())
}

/// `||(D_Gamma - D_{Gamma_N}) rho_N||_1` assembled from its block decomposition over
/// `H_N` and its complement.
pub fn dissipator_defect_blocks(gamma: &PolyOperator, rho: &DenseOperator) -> Result<f64> {
    let raise = gamma.max_raise();
    let lower = gamma.adjoint().max_raise();
    let margin: Vec<usize> = dissipator_margin(gamma)
        .iter()
        .zip(raise.iter().zip(&lower))
        .map(|(m, (r, l))| *m.max(r).max(l))
        .collect();
    let work = rho.shape().enlarged(&margin);
    let wb = Basis::of(&work);
    let pos = rho.basis().positions_in(&wb)?;
    let nw = wb.dim();
    let mut inside = vec![false; nw];
    for &p in &pos {
        inside[p] = true;
    }
    let g = gamma.materialize(&wb)?;
    let mask = |m: &DenseOperator, rows_in: Option<bool>, cols_in: Option<bool>| {
        DenseOperator::from_fn(wb.clone(), |i, j| {
            let ok_r = rows_in.map_or(true, |r| inside[i] == r);
            let ok_c = cols_in.map_or(true, |c| inside[j] == c);
            if ok_r && ok_c {
                m.get(i, j)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    };
    let rho_w = fockspace::embed(rho, &work)?;
    let g_n = mask(&g, Some(true), Some(true));
    let d = mask(&g, Some(false), Some(true));
    let e = mask(&g, Some(true), Some(false));
    let k = mask(&(&g.adjoint() * &d), Some(false), None);
    let gg = &g_n.adjoint() * &e;
    let dd = &d.adjoint() * &d;
    let half = C64::new(0.5, 0.0);
    let mut total = &(&d * &rho_w) * &d.adjoint();
    total -= &(&dd * &rho_w).scale(half);
    total -= &(&rho_w * &dd).scale(half);
    total += &(&(&g_n * &rho_w) * &d.adjoint());
    total -= &(&rho_w * &(&k.adjoint() + &gg)).scale(half);
    total += &(&(&d * &rho_w) * &g_n.adjoint());
    total -= &(&(&k + &gg.adjoint()) * &rho_w).scale(half);
    linalg::hermitian_trace_norm(&total)
}

fn restrict_rows(m: &DenseOperator, keep: impl Fn(usize) -> bool) -> DenseOperator {
    DenseOperator::from_fn(m.basis().clone(), |i, j| if keep(i) { m.get(i, j) } else { C64::new(0.0, 0.0) })
}

/// Off-block norm `||P_1^perp U M||_1` of a unitary known through its truncation `U_2` to
/// `shape_2`, for `M` supported on `shape_2` and `shape_1` inside `shape_2`:
/// `tr sqrt(M^dagger (Id - U_2^dagger U_2) M) + ||(P_2 - P_1) U_2 M||_1`.
pub fn unitary_offblock_norm(u2: &DenseOperator, m: &DenseOperator, shape1: &TruncationShape) -> Result<f64> {
    u2.try_same_shape(m)?;
    if !shape1.contained_in(u2.shape())? {
        return Err(Error::NotContained);
    }
    let um = u2 * m;
    let mut gram = DenseOperator::identity(m.basis().clone());
    gram -= &(&u2.adjoint() * u2);
    let first = linalg::psd_sqrt_times(&gram, m)?;
    let b1 = Basis::of(shape1);
    let b2 = u2.basis();
    let mut in1 = vec![false; b2.dim()];
    for p in b1.positions_in(b2)? {
        in1[p] = true;
    }
    let tail = restrict_rows(&um, |i| !in1[i]);
    let second = if tail.max_abs() == 0.0 { 0.0 } else { linalg::trace_norm(&tail)? };
    Ok(first + second)
}

/// Bound on `||(D_U - D_{U_N}) rho_N||_1` for a unitary `U` known through `U_N`:
/// `2||(Id - U_N^dagger U_N) rho||_1 + 2||P^perp U rho U_N^dagger||_1 + tr rho - tr(U_N rho U_N^dagger)`.
pub fn unitary_dissipator_bound(u_n: &DenseOperator, rho: &DenseOperator) -> Result<f64> {
    u_n.try_same_shape(rho)?;
    let id = DenseOperator::identity(rho.basis().clone());
    let defect = &id - &(&u_n.adjoint() * u_n);
    let first = linalg::trace_norm(&(&defect * rho))?;
    let m = rho * &u_n.adjoint();
    let second = unitary_offblock_norm(u_n, &m, rho.shape())?;
    let third = rho.trace().re - (&(u_n * rho) * &u_n.adjoint()).trace().re;
    Ok(2.0 * first + 2.0 * second + third.max(0.0))
}

fn grown_single(rho: &DenseOperator, extra: usize) -> Result<Arc<Basis>> {
    let n = single_mode_cap(rho)?;
    Ok(Basis::of(&TruncationShape::Rect(vec![n + extra])))
}

/// The estimate `f(rho)` for `Gamma_0 = A e^{i eta q}(Id - eps p) - Id`.
pub fn gkp_f(amplitude: f64, eta: f64, eps: f64, rho: &DenseOperator) -> Result<f64> {
    let n_shape = rho.shape().clone();
    let b1 = grown_single(rho, 1)?;
    let b2 = grown_single(rho, 2)?;
    let shape1 = b1.shape().clone();
    let q_poly = gkp_q_poly(amplitude, eps);
    let rho1 = fockspace::embed(rho, &shape1)?;
    let rho2 = fockspace::embed(rho, b2.shape())?;
    let q1 = q_poly.materialize(&b1)?;
    let u1 = exp_i_linear(&b1, &LinearForm::position(1, 0, eta))?;
    let pos: Vec<usize> = rho.basis().positions_in(&b1)?;
    let mut in_n = vec![false; b1.dim()];
    for &p in &pos {
        in_n[p] = true;
    }
    let keep_n = |m: &DenseOperator| restrict_rows(m, |i| in_n[i]);

    // T1: trace lost by projecting U X U^dagger back to H_N, X = Q rho Q^dagger on H_{N+1}.
    let x = &(&q1 * &rho1) * &q1.adjoint();
    let pux = keep_n(&(&u1 * &x));
    let t1 = x.trace().re - (&pux * &keep_n(&u1).adjoint()).trace().re;

    // T2: 2 ||P^perp U X U^dagger P||_1 through the unitary lemma with margin N+1.
    let m2 = {
        let xu = &x * &u1.adjoint();
        DenseOperator::from_fn(b1.clone(), |i, j| if in_n[j] { xu.get(i, j) } else { C64::new(0.0, 0.0) })
    };
    let t2 = 2.0 * unitary_offblock_norm(&u1, &m2, &n_shape)?;

    // T3: ||(Q^dagger Q - A^dagger A) rho||_1 with A = P U Q P, realized on H_{N+2}.
    let qq = (&q_poly.adjoint() * &q_poly).materialize(&b2)?;
    let a_small = {
        let uq = &u1 * &q1;
        DenseOperator::from_fn(rho.basis().clone(), |i, j| uq.get(pos[i], pos[j]))
    };
    let ata = fockspace::embed(&(&a_small.adjoint() * &a_small), b2.shape())?;
    let t3 = linalg::trace_norm(&(&(&qq - &ata) * &rho2))?;

    // T4: ||P^perp U Q rho||_1.
    let t4 = unitary_offblock_norm(&u1, &(&q1 * &rho1), &n_shape)?;

    // T5: ||P^perp Q U^dagger rho||_1 with Q U^dagger = A U^dagger((1 + eps eta) Id - eps p).
    let shifted = {
        let id = PolyOperator::identity(1);
        let p = PolyOperator::p(1, 0);
        &(&id * C64::new(1.0 + eps * eta, 0.0)) - &(&p * C64::new(eps, 0.0))
    };
    let y = &shifted.materialize(&b1)? * &rho1;
    let t5 = amplitude.abs() * unitary_offblock_norm(&u1.adjoint(), &y, &n_shape)?;

    Ok(t1.max(0.0) + t2 + t3 + t4 + t5)
}

/// Bound on `sum_k ||(D_{Gamma_k} - D_{Gamma_k,N}) rho_N||_1` over the four rotated GKP
/// dissipators, `sum_k f(R^{-k} rho R^k)`.
pub fn gkp_defect_bound(amplitude: f64, eta: f64, eps: f64, rho: &DenseOperator) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..4 {
        let phases = rotation_phases(rho.basis(), -k);
        total += gkp_f(amplitude, eta, eps, &rho.conjugate_diagonal(&phases))?;
    }
    Ok(total)
}

/// `||(cos O - (cos O)_N) rho_N||_1 = ||P^perp cos(O) rho_N||_1`, equal to
/// `(1/2) tr sqrt(rho (2 Id - A^dagger A - A A^dagger + S + S^dagger) rho)` with `A = (e^{iO})_N`,
/// `S = (e^{2iO})_N - A^2`. The radicand is a Gram matrix of rows outside the shape; it is
/// formed from those rows directly (closed-form displacement entries on a box enlarged until the
/// remaining tail is certified below `1e-40`) instead of by cancellation inside the shape.
pub fn cosine_defect(form: &LinearForm, rho: &DenseOperator) -> Result<f64> {
    if form.is_zero() {
        return Ok(0.0);
    }
    let mut caps = rho.shape().bounding_box();
    let mut tail = 0.0;
    for (j, beta) in form.betas().iter().enumerate() {
        let (l, t) = displacement_tail(beta.norm_sqr(), caps[j], 1e-40);
        caps[j] += l;
        tail += t;
    }
    let eb = Basis::of(&TruncationShape::Rect(caps));
    let cos = exp_i_linear(&eb, form)?.herm_part();
    let pos = rho.basis().positions_in(&eb)?;
    let mut inside = vec![false; eb.dim()];
    for &p in &pos {
        inside[p] = true;
    }
    let outside: Vec<usize> = (0..eb.dim()).filter(|&i| !inside[i]).collect();
    let n = rho.dim();
    let block = Mat::from_fn(outside.len(), n, |r, k| cos.get(outside[r], pos[k]));
    let y = &block * rho.as_mat();
    let main = linalg::trace_norm_mat(y.as_ref())?;
    let rest = if tail > 0.0 { (n as f64 * tail).sqrt() * linalg::trace_norm(rho)? } else { 0.0 };
    Ok(main + rest)
}

fn exact_powers(model: &LindbladModel, rho: &DenseOperator, t: f64, count: usize, reach: usize) -> Result<(Generator, Vec<usize>, Vec<DenseOperator>)> {
    let margin = model
        .growth_margin()
        .ok_or_else(|| Error::InvalidModel("time bounds need a polynomial model".into()))?;
    let scaled: Vec<usize> = margin.per_mode.iter().map(|m| m * reach).collect();
    let big = rho.shape().enlarged(&scaled);
    let bb = Basis::of(&big);
    let gen = Generator::new(model, &bb)?;
    let pos = rho.basis().positions_in(&bb)?;
    let mut cur = fockspace::embed(rho, &big)?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        cur = gen.apply(t, &cur)?;
        out.push(cur.clone());
    }
    Ok((gen, pos, out))
}

/// One-step bound for the order-`k` Taylor scheme on a time-invariant polynomial model:
/// `||sum_{j<=k} dt^j/j! (L^j - L_N^j) rho||_1 + dt^{k+1}/(k+1)! ||L^{k+1} rho||_1`.
pub fn taylor_step_bound(model: &LindbladModel, rho: &DenseOperator, dt: f64, k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidInput("Taylor order must be at least 1".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("time step {dt} must be positive")));
    }
    if model.is_time_dependent() {
        return Err(Error::InvalidModel("the Taylor bound needs a time-invariant model".into()));
    }
    let (_, pos, powers) = exact_powers(model, rho, 0.0, k + 1, k + 1)?;
    let small = Generator::new(model, rho.basis())?;
    let mut diff = DenseOperator::zeros(powers[0].basis().clone());
    let mut cur = rho.clone();
    let mut coef = 1.0;
    let n = rho.dim();
    for j in 1..=k {
        coef *= dt / j as f64;
        cur = small.apply(0.0, &cur)?;
        diff.axpy(C64::new(coef, 0.0), &powers[j - 1]);
        for c in 0..n {
            for r in 0..n {
                diff.add_at(pos[r], pos[c], -cur.get(r, c) * coef);
            }
        }
    }
    let first = if diff.max_abs() == 0.0 { 0.0 } else { linalg::hermitian_trace_norm(&diff)? };
    coef *= dt / (k + 1) as f64;
    let last = linalg::hermitian_trace_norm(&powers[k])?;
    Ok(first + coef * last)
}

/// One-step bound for explicit Euler on `L(t) = L_static + sum_h u_h(t) L_h`.
pub fn euler_timedep_step_bound(model: &LindbladModel, rho: &DenseOperator, t_n: f64, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("time step {dt} must be positive")));
    }
    let (gen, pos, powers) = exact_powers(model, rho, t_n, 1, 2)?;
    let x = &powers[0];
    let rho_big = fockspace::embed(rho, gen.shape())?;
    let mut drift = 0.0;
    let mut curvature = linalg::hermitian_trace_norm(&gen.apply_static(x)?)?;
    for h in gen.time_dependent_terms() {
        let c = gen.coefficient(h);
        let (Some(sup), Some(dsup)) = (c.sup(), c.dsup()) else {
            return Err(Error::InvalidInput(format!(
                "coefficient {} lacks the sup/dsup bounds required by the Euler certificate",
                c.label()
            )));
        };
        drift += dt * dsup * linalg::hermitian_trace_norm(&gen.apply_hamiltonian_term(h, &rho_big)?)?;
        curvature += sup * linalg::hermitian_trace_norm(&gen.apply_hamiltonian_term(h, x)?)?;
    }
    let small = Generator::new(model, rho.basis())?.apply(t_n, rho)?;
    let mut d = x.clone();
    let n = rho.dim();
    for c in 0..n {
        for r in 0..n {
            d.add_at(pos[r], pos[c], -small.get(r, c));
        }
    }
    let space = if d.max_abs() == 0.0 { 0.0 } else { linalg::hermitian_trace_norm(&d)? };
    Ok(dt * drift + 0.5 * dt * dt * curvature + dt * space)
}
