//! Trace norms and small dense decompositions.

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};
use crate::operators::DenseOperator;
use crate::C64;

/// Relative symmetry defect tolerated before the Hermitian path refuses its input.
pub const HERMITIAN_GUARD: f64 = 1e-10;

/// Radicand eigenvalues below `-PSD_FAIL * max(1, |lambda|_max)` are treated as errors.
pub const PSD_FAIL: f64 = 1e-8;

fn check_finite(m: MatRef<'_, C64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::Linalg("non-finite matrix entry".into()));
            }
        }
    }
    Ok(())
}

/// Sum of singular values of an arbitrary complex matrix.
pub fn trace_norm_mat(m: MatRef<'_, C64>) -> Result<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0.0);
    }
    check_finite(m)?;
    let s = m
        .singular_values()
        .map_err(|e| Error::Linalg(format!("singular value decomposition failed: {e:?}")))?;
    Ok(s.iter().sum())
}

pub fn trace_norm(m: &DenseOperator) -> Result<f64> {
    trace_norm_mat(m.as_mat())
}

fn hermitian_defect_mat(m: MatRef<'_, C64>) -> f64 {
    let n = m.nrows();
    let mut scale: f64 = 0.0;
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            scale = scale.max(m[(i, j)].norm());
        }
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

fn symmetrized(m: MatRef<'_, C64>) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// Eigenvalues of the symmetrized matrix `(M + M^dagger) / 2`, ascending.
pub fn hermitian_eigenvalues_mat(m: MatRef<'_, C64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    check_finite(m)?;
    let h = symmetrized(m);
    let mut ev = h
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Linalg(format!("eigendecomposition failed: {e:?}")))?;
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(ev)
}

pub fn hermitian_eigenvalues(m: &DenseOperator) -> Result<Vec<f64>> {
    hermitian_eigenvalues_mat(m.as_mat())
}

/// Trace norm of a Hermitian matrix as the sum of absolute eigenvalues.
pub fn hermitian_trace_norm_mat(m: MatRef<'_, C64>) -> Result<f64> {
    let defect = hermitian_defect_mat(m);
    if defect > HERMITIAN_GUARD {
        return Err(Error::NotHermitian(defect));
    }
    Ok(hermitian_eigenvalues_mat(m)?.iter().map(|x| x.abs()).sum())
}

pub fn hermitian_trace_norm(m: &DenseOperator) -> Result<f64> {
    hermitian_trace_norm_mat(m.as_mat())
}

/// `tr sqrt(R)` for a radicand that is positive semidefinite in exact arithmetic.
pub fn psd_sqrt_trace_mat(r: MatRef<'_, C64>) -> Result<f64> {
    let ev = hermitian_eigenvalues_mat(r)?;
    let top = ev.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let floor = -PSD_FAIL * top.max(1.0);
    let mut s = 0.0;
    for &l in &ev {
        if l < floor {
            return Err(Error::NotPsd(l));
        }
        s += l.max(0.0).sqrt();
    }
    Ok(s)
}

pub fn psd_sqrt_trace(r: &DenseOperator) -> Result<f64> {
    psd_sqrt_trace_mat(r.as_mat())
}

/// `tr sqrt(M^dagger G M) = ||G^{1/2} M||_1` for `G` positive semidefinite in exact arithmetic,
/// evaluated through the spectral square root of `G` so that small eigenvalues of `G` are not
/// squared once more.
pub fn psd_sqrt_times(g: &DenseOperator, m: &DenseOperator) -> Result<f64> {
    g.try_same_shape(m)?;
    if g.dim() == 0 {
        return Ok(0.0);
    }
    check_finite(g.as_mat())?;
    let h = symmetrized(g.as_mat());
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let n = g.dim();
    let top = (0..n).fold(0.0f64, |a, i| a.max(s[i].re.abs()));
    let floor = -PSD_FAIL * top.max(1.0);
    let mut roots = Vec::with_capacity(n);
    for i in 0..n {
        let l = s[i].re;
        if l < floor {
            return Err(Error::NotPsd(l));
        }
        roots.push(l.max(0.0).sqrt());
    }
    let mut x: Mat<C64> = evd.U().adjoint() * m.as_mat();
    for i in 0..n {
        for j in 0..n {
            x[(i, j)] *= roots[i];
        }
    }
    trace_norm_mat(x.as_ref())
}

/// Trace norm of a Hermitian matrix whose rows and columns outside `boundary` meet
/// only inside the boundary block.
///
/// Writing the indices as `B` (boundary) and `C` (rest), the matrix with its `CC`
/// block removed has range inside `span(e_B) + range(M_CB)`, so its trace norm is
/// evaluated exactly on a compressed space of dimension at most `2|B|`. Whatever is
/// left in the `CC` block is added through `||X||_1 <= sqrt(rank) ||X||_F`, so the
/// result is an upper bound that is exact when that block vanishes.
pub fn hermitian_trace_norm_arrow(m: &DenseOperator, boundary: &[bool]) -> Result<f64> {
    let n = m.dim();
    let b_idx: Vec<usize> = (0..n).filter(|&i| boundary[i]).collect();
    let c_idx: Vec<usize> = (0..n).filter(|&i| !boundary[i]).collect();
    let (nb, nc) = (b_idx.len(), c_idx.len());
    if 2 * nb >= n || nc == 0 {
        return hermitian_trace_norm(m);
    }
    let defect = m.hermiticity_defect();
    if defect > HERMITIAN_GUARD {
        return Err(Error::NotHermitian(defect));
    }
    check_finite(m.as_mat())?;

    let mut cc_frob = 0.0;
    for &j in &c_idx {
        for &i in &c_idx {
            cc_frob += m.get(i, j).norm_sqr();
        }
    }
    let cc_frob = cc_frob.sqrt();
    let cc_bound = if cc_frob == 0.0 { 0.0 } else { (nc as f64).sqrt() * cc_frob };

    let mbb = Mat::from_fn(nb, nb, |i, j| m.get(b_idx[i], b_idx[j]));
    let mcb = Mat::from_fn(nc, nb, |i, j| m.get(c_idx[i], b_idx[j]));
    if mcb.norm_max() == 0.0 {
        return Ok(hermitian_trace_norm_mat(mbb.as_ref())? + cc_bound);
    }
    let q = mcb.qr().compute_thin_Q();
    let k = q.ncols();
    let qm = q.adjoint() * &mcb;
    let mut small = Mat::<C64>::zeros(nb + k, nb + k);
    for j in 0..nb {
        for i in 0..nb {
            small[(i, j)] = mbb[(i, j)];
        }
        for i in 0..k {
            small[(nb + i, j)] = qm[(i, j)];
            small[(j, nb + i)] = qm[(i, j)].conj();
        }
    }
    let ev = small
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Linalg(format!("eigendecomposition failed: {e:?}")))?;
    Ok(ev.iter().map(|x| x.abs()).sum::<f64>() + cc_bound)
}
