//! Dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, SVD};
pub use num_complex::Complex64 as C64;

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Relative eigenvalue / singular value floor used by all solvers.
pub const REL_FLOOR: f64 = 1e-12;

#[inline]
pub fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

/// Kronecker product of two column vectors, `a ⊗ b`.
pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    let mut out = CVec::zeros(a.len() * b.len());
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i * b.len() + j] = ai * bj;
        }
    }
    out
}

/// Kronecker product of two matrices.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            for p in 0..br {
                for q in 0..bc {
                    out[(i * br + p, j * bc + q)] = s * b[(p, q)];
                }
            }
        }
    }
    out
}

/// Squared Frobenius norm.
pub fn fro2(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Squared Euclidean norm of a complex vector.
pub fn norm2(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `a^H b`.
#[inline]
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Outcome of a floored solve.
#[derive(Debug, Clone)]
pub struct Solved {
    pub x: CVec,
    /// True when some directions were discarded by the eigenvalue floor.
    pub floored: bool,
}

/// Solves the Hermitian positive semi-definite system `a x = b`.
///
/// Cholesky is tried first; on failure the eigen-decomposition is used and
/// eigenvalues below `REL_FLOOR * max` are dropped (minimum-norm solution).
pub fn solve_hermitian(a: &CMat, b: &CVec) -> Solved {
    let n = a.nrows();
    if n == 0 {
        return Solved { x: CVec::zeros(0), floored: false };
    }
    let sym = hermitian_part(a);
    let max_diag = sym.diagonal().iter().map(|z| z.re).fold(0.0, f64::max);
    if max_diag > 0.0 {
        if let Some(ch) = Cholesky::new(sym.clone()) {
            let l = ch.l();
            let min_piv = l.diagonal().iter().map(|z| z.re * z.re).fold(f64::INFINITY, f64::min);
            if min_piv > REL_FLOOR * max_diag {
                return Solved { x: ch.solve(b), floored: false };
            }
        }
    }
    let eig = SymmetricEigen::new(sym);
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let floor = REL_FLOOR * lmax;
    let utb = eig.eigenvectors.adjoint() * b;
    let mut scaled = CVec::zeros(n);
    let mut floored = false;
    for i in 0..n {
        let lam = eig.eigenvalues[i];
        if lam > floor && lam > 0.0 {
            scaled[i] = utb[i] / lam;
        } else {
            floored = true;
        }
    }
    Solved { x: &eig.eigenvectors * scaled, floored }
}

/// `(a + a^H) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).map(|z| z * 0.5)
}

/// Minimum-norm least-squares solution of `a x ≈ b` via SVD.
pub fn lstsq(a: &CMat, b: &CVec) -> Solved {
    if a.ncols() == 0 {
        return Solved { x: CVec::zeros(0), floored: false };
    }
    let svd = SVD::new(a.clone(), true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = (REL_FLOOR * smax).max(f64::MIN_POSITIVE);
    let floored = svd.singular_values.iter().any(|&s| s <= eps);
    let x = svd.solve(b, eps).unwrap_or_else(|_| CVec::zeros(a.ncols()));
    Solved { x, floored }
}

/// Ratio of smallest to largest singular value (0 for an empty or zero matrix).
pub fn inverse_condition(a: &CMat) -> f64 {
    if a.ncols() == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let s = a.clone().singular_values();
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if smax == 0.0 {
        0.0
    } else {
        smin / smax
    }
}

/// Inverse principal square root of a Hermitian positive-definite matrix.
///
/// Returns `None` when the smallest eigenvalue falls below
/// `REL_FLOOR * largest`, together with the observed ratio.
pub fn inv_sqrt_hermitian(a: &CMat) -> Result<CMat, f64> {
    let eig = SymmetricEigen::new(hermitian_part(a));
    let lmax = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = if lmax > 0.0 { lmin / lmax } else { 0.0 };
    if !(lmax > 0.0) || ratio < REL_FLOOR {
        return Err(ratio);
    }
    let d = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| C64::new(1.0 / l.sqrt(), 0.0)),
    );
    let u = &eig.eigenvectors;
    Ok(u * CMat::from_diagonal(&d) * u.adjoint())
}

/// Scales column `j` of `m` by `s[j]` in place.
pub fn scale_columns(m: &mut CMat, s: &[C64]) {
    for (j, &sj) in s.iter().enumerate() {
        for z in m.column_mut(j).iter_mut() {
            *z *= sj;
        }
    }
}
