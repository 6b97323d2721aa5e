use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fockspace::Basis;
use crate::operators::{DenseOperator, PolyOperator};
use crate::C64;

/// Real linear combination `O = sum_j q[j] q_j + p[j] p_j` of quadratures.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearForm {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl LinearForm {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() || q.is_empty() {
            return Err(Error::InvalidModel("linear form needs equal, non-empty q and p lists".into()));
        }
        if q.iter().chain(&p).any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel("linear form coefficients must be finite".into()));
        }
        Ok(LinearForm { q, p })
    }

    /// `eta * q_mode` on a system of `modes` modes.
    pub fn position(modes: usize, mode: usize, eta: f64) -> Self {
        let mut q = vec![0.0; modes];
        q[mode] = eta;
        LinearForm { q, p: vec![0.0; modes] }
    }

    pub fn mode_count(&self) -> usize {
        self.q.len()
    }

    pub fn scaled(&self, s: f64) -> Self {
        LinearForm {
            q: self.q.iter().map(|x| x * s).collect(),
            p: self.p.iter().map(|x| x * s).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.q.iter().chain(&self.p).all(|x| *x == 0.0)
    }

    /// Displacement amplitude per mode, `e^{iO} = prod_j D(beta_j)`.
    pub fn betas(&self) -> Vec<C64> {
        self.q
            .iter()
            .zip(&self.p)
            .map(|(c, s)| C64::new(-s, *c) * std::f64::consts::FRAC_1_SQRT_2)
            .collect()
    }

    /// Reads a Hermitian degree-one polynomial without constant term.
    pub fn from_poly(op: &PolyOperator) -> Result<Self> {
        let m = op.mode_count();
        let mut mu = vec![C64::new(0.0, 0.0); m];
        let mut nu = vec![C64::new(0.0, 0.0); m];
        for (c, w) in op.terms() {
            match w.as_slice() {
                [l] if l.dagger => nu[l.mode] += c,
                [l] => mu[l.mode] += c,
                _ => {
                    return Err(Error::InvalidModel(
                        "cosine argument must be a real linear combination of q and p".into(),
                    ))
                }
            }
        }
        let mut q = vec![0.0; m];
        let mut p = vec![0.0; m];
        for j in 0..m {
            if (nu[j] - mu[j].conj()).norm() > 1e-12 * (1.0 + nu[j].norm()) {
                return Err(Error::InvalidModel("cosine argument must be Hermitian".into()));
            }
            // mu a + conj(mu) ad = c q + s p with c = sqrt2 Re mu, s = -sqrt2 Im mu
            q[j] = std::f64::consts::SQRT_2 * mu[j].re;
            p[j] = -std::f64::consts::SQRT_2 * mu[j].im;
        }
        LinearForm::new(q, p)
    }

    pub fn to_poly(&self) -> PolyOperator {
        let m = self.mode_count();
        let mut out = PolyOperator::zero(m);
        for j in 0..m {
            out = &out + &(&PolyOperator::q(m, j) * C64::new(self.q[j], 0.0));
            out = &out + &(&PolyOperator::p(m, j) * C64::new(self.p[j], 0.0));
        }
        out
    }
}

fn ln_gamma_int(n: usize) -> f64 {
    (1..n).map(|k| (k as f64).ln()).sum()
}

/// Smallest margin `l` such that every column `n <= nmax` of the displacement `D(beta)`,
/// `|beta|^2 = x`, carries at most `target` squared norm in rows beyond `nmax + l`, together with
/// the certified bound on that tail mass. Uses `|L_n^k(x)| <= C(n+k, n) e^{x/2}`.
pub fn displacement_tail(x: f64, nmax: usize, target: f64) -> (usize, f64) {
    if x == 0.0 {
        return (0, 0.0);
    }
    let bound = |l: usize| {
        let mut worst: f64 = 0.0;
        for n in 0..=nmax {
            let k0 = nmax + l + 1 - n;
            let ratio = x * (n + k0 + 1) as f64 / ((k0 + 1) as f64).powi(2);
            if ratio >= 1.0 {
                return f64::INFINITY;
            }
            let ln_t = k0 as f64 * x.ln() + ln_gamma_int(n + k0 + 1) - ln_gamma_int(n + 1) - 2.0 * ln_gamma_int(k0 + 1);
            worst = worst.max(ln_t.exp() / (1.0 - ratio));
        }
        worst
    };
    let mut l = 1;
    loop {
        let b = bound(l);
        if b <= target {
            return (l, b);
        }
        l += 1;
    }
}

/// Normalized associated Laguerre functions
/// `g_n(alpha, x) = sqrt(n!/(n+alpha)!) x^{alpha/2} e^{-x/2} L_n^{alpha}(x)` for `n = 0..count`.
fn normalized_laguerre(alpha: usize, x: f64, count: usize) -> Vec<f64> {
    let mut out = vec![0.0; count];
    if count == 0 {
        return out;
    }
    if x == 0.0 {
        if alpha == 0 {
            out.iter_mut().for_each(|v| *v = 1.0);
        }
        return out;
    }
    let a = alpha as f64;
    let mut log_scale = 0.5 * a * x.ln() - 0.5 * x - 0.5 * ln_gamma_int(alpha + 1);
    let mut prev = 0.0f64;
    let mut cur = 1.0f64;
    let emit = |m: f64, ls: f64| -> f64 {
        if m == 0.0 {
            return 0.0;
        }
        let l = m.abs().ln() + ls;
        if l < -690.0 {
            0.0
        } else {
            m.signum() * l.exp()
        }
    };
    out[0] = emit(cur, log_scale);
    for n in 0..count - 1 {
        let nf = n as f64;
        let next = if n == 0 {
            (1.0 + a - x) / (1.0 + a).sqrt() * cur
        } else {
            ((2.0 * nf + 1.0 + a - x) * cur - (nf * (nf + a)).sqrt() * prev)
                / ((nf + 1.0) * (nf + 1.0 + a)).sqrt()
        };
        prev = cur;
        cur = next;
        let big = prev.abs().max(cur.abs());
        if big > 1e100 || (big < 1e-100 && big > 0.0) {
            let s = big.ln();
            prev /= big;
            cur /= big;
            log_scale += s;
        }
        out[n + 1] = emit(cur, log_scale);
    }
    for v in out.iter_mut() {
        if v.abs() < 1e-300 {
            *v = 0.0;
        }
    }
    out
}

/// Row-major table of `<m|D(beta)|n>` for `m, n <= kmax`.
pub fn displacement_table(beta: C64, kmax: usize) -> Vec<C64> {
    let size = kmax + 1;
    let mut t = vec![C64::new(0.0, 0.0); size * size];
    let x = beta.norm_sqr();
    let (phase, phase_neg) = if x == 0.0 {
        (C64::new(1.0, 0.0), C64::new(1.0, 0.0))
    } else {
        let u = beta / beta.norm();
        (u, -u.conj())
    };
    for off in 0..size {
        let g = normalized_laguerre(off, x, size - off);
        let pp = phase.powu(off as u32);
        let pn = phase_neg.powu(off as u32);
        for (n, gv) in g.iter().enumerate() {
            let m = n + off;
            t[m * size + n] = pp * gv;
            if off > 0 {
                t[n * size + m] = pn * gv;
            }
        }
    }
    t
}

/// Exact truncation of `e^{iO}` to the basis.
pub fn exp_i_linear(basis: &Arc<Basis>, form: &LinearForm) -> Result<DenseOperator> {
    if form.mode_count() != basis.mode_count() {
        return Err(Error::ShapeMismatch("linear form and shape have different mode counts".into()));
    }
    let bbox = basis.shape().bounding_box();
    let betas = form.betas();
    let tables: Vec<Vec<C64>> = betas.iter().zip(&bbox).map(|(b, &k)| displacement_table(*b, k)).collect();
    let sizes: Vec<usize> = bbox.iter().map(|k| k + 1).collect();
    Ok(DenseOperator::from_fn(basis.clone(), |i, j| {
        let (mi, mj) = (basis.multi_index_of(i), basis.multi_index_of(j));
        let mut v = C64::new(1.0, 0.0);
        for mode in 0..tables.len() {
            v *= tables[mode][mi[mode] * sizes[mode] + mj[mode]];
            if v == C64::new(0.0, 0.0) {
                break;
            }
        }
        v
    }))
}

/// Truncation of `e^{i eta q}` on mode 0.
pub fn displacement_q(basis: &Arc<Basis>, eta: f64) -> Result<DenseOperator> {
    exp_i_linear(basis, &LinearForm::position(basis.mode_count(), 0, eta))
}

/// Phases `i^{k n_0}` of the rotation `R^k = e^{i k pi n_0 / 2}`.
pub fn rotation_phases(basis: &Basis, k: i64) -> Vec<C64> {
    let units = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)];
    (0..basis.dim())
        .map(|i| {
            let n = basis.multi_index_of(i)[0] as i64;
            units[(k * n).rem_euclid(4) as usize]
        })
        .collect()
}

pub fn rotation(basis: &Arc<Basis>, k: i64) -> DenseOperator {
    let d = rotation_phases(basis, k);
    let mut m = DenseOperator::zeros(basis.clone());
    for (i, v) in d.into_iter().enumerate() {
        m.set(i, i, v);
    }
    m
}

/// Truncation of `cos(O) = (e^{iO} + e^{-iO}) / 2`.
pub fn cosine_of(basis: &Arc<Basis>, form: &LinearForm) -> Result<DenseOperator> {
    let u = exp_i_linear(basis, form)?;
    Ok(u.herm_part())
}

/// Unitaries with closed-form truncations.
#[derive(Debug, Clone, PartialEq)]
pub enum UnitarySpec {
    DisplacementQ(f64),
    Rotation(i64),
    ExpLinear(LinearForm),
}

impl UnitarySpec {
    pub fn truncate(&self, basis: &Arc<Basis>) -> Result<DenseOperator> {
        match self {
            UnitarySpec::DisplacementQ(eta) => displacement_q(basis, *eta),
            UnitarySpec::Rotation(k) => Ok(rotation(basis, *k)),
            UnitarySpec::ExpLinear(f) => exp_i_linear(basis, f),
        }
    }

    pub fn inverse(&self) -> UnitarySpec {
        match self {
            UnitarySpec::DisplacementQ(eta) => UnitarySpec::DisplacementQ(-eta),
            UnitarySpec::Rotation(k) => UnitarySpec::Rotation(-k),
            UnitarySpec::ExpLinear(f) => UnitarySpec::ExpLinear(f.scaled(-1.0)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::TruncationShape;

    #[test]
    fn vacuum_overlap_and_identity() {
        let b = Basis::of(&TruncationShape::Rect(vec![10]));
        let eta = 1.3;
        let u = displacement_q(&b, eta).unwrap();
        assert!((u.get(0, 0) - C64::new((-eta * eta / 4.0).exp(), 0.0)).norm() < 1e-15);
        let id = displacement_q(&b, 0.0).unwrap();
        assert!((&id - &DenseOperator::identity(b.clone())).max_abs() == 0.0);
    }

    #[test]
    fn columns_are_contractions() {
        let b = Basis::of(&TruncationShape::Rect(vec![40]));
        let u = displacement_q(&b, 2.0 * std::f64::consts::PI.sqrt()).unwrap();
        for j in 0..b.dim() {
            let norm: f64 = u.col(j).iter().map(|x| x.norm_sqr()).sum();
            assert!(norm <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn rotation_properties() {
        let b = Basis::of(&TruncationShape::Rect(vec![7]));
        let id = DenseOperator::identity(b.clone());
        assert_eq!(rotation(&b, 0), id);
        assert_eq!(rotation(&b, 4), id);
        let r = rotation(&b, 1);
        assert!((&(&r * &r.adjoint()) - &id).max_abs() < 1e-15);
        assert_eq!(r.get(3, 3), C64::new(0.0, -1.0));
    }

    #[test]
    fn linear_form_poly_roundtrip() {
        let f = LinearForm::new(vec![0.7, -0.2], vec![1.1, 0.4]).unwrap();
        let back = LinearForm::from_poly(&f.to_poly()).unwrap();
        for (x, y) in f.q.iter().chain(&f.p).zip(back.q.iter().chain(&back.p)) {
            assert!((x - y).abs() < 1e-14);
        }
        assert!(LinearForm::from_poly(&PolyOperator::number(1, 0)).is_err());
    }

    #[test]
    fn large_index_entries_stay_finite() {
        let t = displacement_table(C64::new(0.0, 0.05), 150);
        assert!(t.iter().all(|v| v.re.is_finite() && v.im.is_finite()));
        let t = displacement_table(C64::new(0.0, 9.0), 150);
        assert!(t.iter().all(|v| v.re.is_finite() && v.im.is_finite()));
    }
}
