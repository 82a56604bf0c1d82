//! Dense complex matrix kernels: pseudo-inverse, null-space projector and a
//! rank-partitioned SVD.
//!
//! All rank decisions use a tolerance relative to the largest singular value.
//! Singular vectors are phase-normalized so that the first nonzero entry of
//! every left singular vector is real and nonnegative, which makes results
//! reproducible across runs.

use nalgebra::{DMatrix, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

/// Default relative rank tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Builds a matrix from row-major data, rejecting NaN and infinities.
pub fn from_row_major(rows: usize, cols: usize, data: &[Complex64]) -> Result<ComplexMatrix> {
    if data.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "expected {} entries for a {rows}x{cols} matrix, got {}",
            rows * cols,
            data.len()
        )));
    }
    let m = ComplexMatrix::from_row_slice(rows, cols, data);
    ensure_finite(&m)?;
    Ok(m)
}

pub fn ensure_finite(m: &ComplexMatrix) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

fn check_tol(tol: f64) -> Result<()> {
    if tol.is_finite() && tol >= 0.0 {
        Ok(())
    } else {
        Err(Error::Tolerance(tol))
    }
}

fn check_nonempty(a: &ComplexMatrix, what: &str) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::Dimension(format!(
            "{what}: empty {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

pub fn frobenius(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn frobenius_sq(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// Bidiagonal SVD from nalgebra, verified against the input. The library
/// occasionally returns inaccurate factors for rank-deficient matrices; those
/// cases are recomputed with one-sided Jacobi.
fn checked_svd(a: &ComplexMatrix) -> (ComplexMatrix, Vec<f64>, ComplexMatrix) {
    let svd = SVD::new(a.clone(), true, true);
    let u = svd.u.expect("U requested");
    let vt = svd.v_t.expect("V^T requested");
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    if factors_ok(a, &u, &s, &vt) {
        return (u, s, vt);
    }
    let (u, s, v) = jacobi_svd(a);
    (u, s, v.adjoint())
}

fn factors_ok(a: &ComplexMatrix, u: &ComplexMatrix, s: &[f64], vt: &ComplexMatrix) -> bool {
    let tol = 32.0 * f64::EPSILON * a.nrows().max(a.ncols()) as f64;
    let scale = frobenius(a);
    if !s.iter().all(|x| x.is_finite()) {
        return false;
    }
    let mut us = u.clone();
    for (j, mut col) in us.column_iter_mut().enumerate() {
        col *= Complex64::from(s[j]);
    }
    let k = s.len();
    let eye = ComplexMatrix::identity(k, k);
    frobenius(&(us * vt - a)) <= tol * scale.max(f64::MIN_POSITIVE)
        && frobenius(&(u.adjoint() * u - &eye)) <= tol * (k as f64).sqrt()
        && frobenius(&(vt * vt.adjoint() - &eye)) <= tol * (k as f64).sqrt()
}

/// One-sided (Hestenes) Jacobi SVD. Returns `(U, s, V)` with `A = U diag(s) V^H`,
/// `U` m×k and `V` n×k orthonormal, `k = min(m, n)`; `s` is unsorted.
fn jacobi_svd(a: &ComplexMatrix) -> (ComplexMatrix, Vec<f64>, ComplexMatrix) {
    let (m, n) = a.shape();
    if m < n {
        let (u, s, v) = jacobi_svd(&a.adjoint());
        return (v, s, u);
    }
    let mut w = a.clone();
    let mut v = ComplexMatrix::identity(n, n);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = w.column(p).iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = w.column(q).iter().map(|z| z.norm_sqr()).sum();
                let gamma: Complex64 = w.column(p).iter().zip(w.column(q).iter()).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g <= f64::EPSILON * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut w, &mut v] {
                    for r in 0..mat.nrows() {
                        let x = mat[(r, p)];
                        let y = mat[(r, q)] * phase.conj();
                        mat[(r, p)] = x * c - y * s;
                        mat[(r, q)] = x * s + y * c;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let s: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let smax = s.iter().copied().fold(0.0, f64::max);
    let mut u = ComplexMatrix::zeros(m, n);
    let mut missing = Vec::new();
    for j in 0..n {
        if s[j] > f64::EPSILON * smax * n as f64 && s[j] > 0.0 {
            u.set_column(j, &(w.column(j) / Complex64::from(s[j])));
        } else {
            missing.push(j);
        }
    }
    // complete U with unit vectors orthogonalized against the columns so far
    let mut e = 0;
    for j in missing {
        loop {
            let mut cand = ComplexMatrix::zeros(m, 1);
            cand[(e % m, 0)] = Complex64::new(1.0, 0.0);
            e += 1;
            for _ in 0..2 {
                for c in 0..n {
                    let col = u.column(c);
                    let proj: Complex64 = col.iter().zip(cand.iter()).map(|(x, y)| x.conj() * y).sum();
                    for r in 0..m {
                        cand[(r, 0)] -= col[r] * proj;
                    }
                }
            }
            let nrm = cand.norm();
            if nrm > 1e-6 {
                u.set_column(j, &(cand.column(0) / Complex64::from(nrm)));
                break;
            }
        }
    }
    (u, s, v)
}

/// Thin SVD with singular values sorted descending and the phase convention
/// applied. Returns `(U, s, V)` with `A = U diag(s) V^H`, `U` m×k, `V` n×k,
/// `k = min(m, n)`.
fn sorted_thin_svd(a: &ComplexMatrix) -> (ComplexMatrix, Vec<f64>, ComplexMatrix) {
    let (m, n) = a.shape();
    let k = m.min(n);
    let (u_raw, s_raw, vt_raw) = checked_svd(a);

    let mut order: Vec<usize> = (0..k).collect();
    // stable: ties keep decomposition order
    order.sort_by(|&i, &j| s_raw[j].total_cmp(&s_raw[i]));

    let mut u = ComplexMatrix::zeros(m, k);
    let mut v = ComplexMatrix::zeros(n, k);
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        s.push(s_raw[src]);
        u.set_column(dst, &u_raw.column(src));
        // v_t row src holds conj(v_src)
        for r in 0..n {
            v[(r, dst)] = vt_raw[(src, r)].conj();
        }
        let phase = leading_phase(u.column(dst).iter().copied());
        if let Some(ph) = phase {
            let c = ph.conj();
            for r in 0..m {
                u[(r, dst)] *= c;
            }
            for r in 0..n {
                v[(r, dst)] *= c;
            }
        }
    }
    (u, s, v)
}

/// Unit phase of the first entry whose magnitude is non-negligible relative to
/// the vector norm.
fn leading_phase<I: Iterator<Item = Complex64> + Clone>(it: I) -> Option<Complex64> {
    let norm = it.clone().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return None;
    }
    it.into_iter()
        .find(|z| z.norm() > 1e-12 * norm)
        .map(|z| z / z.norm())
}

fn rank_of(s: &[f64], tol: f64) -> usize {
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().take_while(|&&x| x > tol * smax).count(),
        _ => 0,
    }
}

/// Moore–Penrose pseudo-inverse; singular values at or below `tol·σ_max` are
/// treated as zero.
pub fn pinv(a: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    check_tol(tol)?;
    check_nonempty(a, "pinv")?;
    let (u, s, v) = sorted_thin_svd(a);
    let r = rank_of(&s, tol);
    let (m, n) = a.shape();
    let mut out = ComplexMatrix::zeros(n, m);
    for idx in 0..r {
        let inv = 1.0 / s[idx];
        let vc = v.column(idx);
        let uc = u.column(idx);
        for j in 0..m {
            let uj = uc[j].conj() * inv;
            for i in 0..n {
                out[(i, j)] += vc[i] * uj;
            }
        }
    }
    Ok(out)
}

/// Orthogonal projector onto the null space of `a`: `I − A⁺A`.
pub fn null_projector(a: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    check_tol(tol)?;
    let n = a.ncols();
    if n == 0 {
        return Err(Error::Dimension("null_projector: matrix has no columns".into()));
    }
    let mut out = ComplexMatrix::identity(n, n);
    if a.nrows() == 0 {
        return Ok(out);
    }
    let (_, s, v) = sorted_thin_svd(a);
    let r = rank_of(&s, tol);
    for idx in 0..r {
        let vc = v.column(idx);
        for j in 0..n {
            let vj = vc[j].conj();
            for i in 0..n {
                out[(i, j)] -= vc[i] * vj;
            }
        }
    }
    Ok(out)
}

/// Rank-partitioned SVD `A = U·diag(s[..rank])·V1^H`.
#[derive(Debug, Clone)]
pub struct SvdPartition {
    /// Left singular vectors for the retained directions (m×rank).
    pub u: ComplexMatrix,
    /// All `min(m, n)` singular values, descending.
    pub singulars: Vec<f64>,
    pub rank: usize,
    /// Orthonormal basis of the row space (n×rank).
    pub v_row: ComplexMatrix,
    /// Orthonormal basis of the null space (n×(n−rank)).
    pub v_null: ComplexMatrix,
}

impl SvdPartition {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let mut us = self.u.clone();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= Complex64::from(self.singulars[j]);
        }
        us * self.v_row.adjoint()
    }
}

pub fn svd_partition(a: &ComplexMatrix, tol: f64) -> Result<SvdPartition> {
    check_tol(tol)?;
    check_nonempty(a, "svd_partition")?;
    let (m, n) = a.shape();
    let (u, singulars, v_full) = if m >= n {
        sorted_thin_svd(a)
    } else {
        // pad with zero rows so the decomposition yields a complete V
        let mut padded = ComplexMatrix::from_element(n, n, ZERO);
        padded.view_mut((0, 0), (m, n)).copy_from(a);
        let (u_pad, s_pad, v_pad) = sorted_thin_svd(&padded);
        let u = u_pad.rows(0, m).into_owned();
        let s = s_pad[..m].to_vec();
        (u, s, v_pad)
    };
    let rank = rank_of(&singulars, tol);
    let mut v_null = v_full.columns(rank, n - rank).into_owned();
    for j in 0..v_null.ncols() {
        if let Some(ph) = leading_phase(v_null.column(j).iter().copied()) {
            let mut col = v_null.column_mut(j);
            col *= ph.conj();
        }
    }
    Ok(SvdPartition {
        u: u.columns(0, rank).into_owned(),
        singulars,
        rank,
        v_row: v_full.columns(0, rank).into_owned(),
        v_null,
    })
}

/// Singular values only, descending.
pub fn singular_values(a: &ComplexMatrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Orthonormal basis for the column space of `a` (numerical rank by `tol`).
pub fn column_basis(a: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    check_tol(tol)?;
    if a.ncols() == 0 || a.nrows() == 0 {
        return Ok(ComplexMatrix::zeros(a.nrows(), 0));
    }
    let (u, s, _) = sorted_thin_svd(a);
    let r = rank_of(&s, tol);
    Ok(u.columns(0, r).into_owned())
}

/// Stacks matrices with equal column counts vertically.
pub fn vstack(blocks: &[&ComplexMatrix]) -> Result<ComplexMatrix> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    if blocks.iter().any(|b| b.ncols() != cols) {
        return Err(Error::Dimension("vstack: column counts differ".into()));
    }
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = ComplexMatrix::zeros(rows, cols);
    let mut r0 = 0;
    for b in blocks {
        out.view_mut((r0, 0), (b.nrows(), cols)).copy_from(*b);
        r0 += b.nrows();
    }
    Ok(out)
}

/// Concatenates matrices with equal row counts horizontally.
pub fn hstack(blocks: &[&ComplexMatrix]) -> Result<ComplexMatrix> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    if blocks.iter().any(|b| b.nrows() != rows) {
        return Err(Error::Dimension("hstack: row counts differ".into()));
    }
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = ComplexMatrix::zeros(rows, cols);
    let mut c0 = 0;
    for b in blocks {
        out.view_mut((0, c0), (rows, b.ncols())).copy_from(*b);
        c0 += b.ncols();
    }
    Ok(out)
}

/// `A·A^H`, Hermitian by construction.
pub fn gram_rows(a: &ComplexMatrix) -> ComplexMatrix {
    let m = a.nrows();
    // columns of A^H are contiguous, and g_ij = <(A^H)_i, (A^H)_j>
    let at = a.adjoint();
    let mut g = ComplexMatrix::zeros(m, m);
    for j in 0..m {
        let cj = at.column(j);
        for i in 0..j {
            let v = at.column(i).dotc(&cj);
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
        g[(j, j)] = Complex64::new(cj.norm_squared(), 0.0);
    }
    g
}
