//! Thin dense complex linear-algebra layer over `faer`.
//!
//! Everything in the crate works on `CMat` (column-major complex matrices) and
//! `CVec` (complex column vectors). Decompositions that can fail inside faer
//! are mapped onto [`Error::Numerical`].

use faer::{Col, Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = Mat<C64>;
pub type CVec = Col<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[inline]
pub fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

pub fn vec_from_slice(v: &[C64]) -> CVec {
    Col::from_fn(v.len(), |i| v[i])
}

pub fn vec_to_vec(v: &CVec) -> Vec<C64> {
    (0..v.nrows()).map(|i| v[i]).collect()
}

/// Stacks column vectors side by side.
pub fn hstack(cols: &[CVec]) -> CMat {
    let rows = cols.first().map_or(0, |c| c.nrows());
    Mat::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

pub fn column(m: &CMat, j: usize) -> CVec {
    Col::from_fn(m.nrows(), |i| m[(i, j)])
}

pub fn diag(v: &[C64]) -> CMat {
    Mat::from_fn(v.len(), v.len(), |i, j| if i == j { v[i] } else { ZERO })
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn scale(m: &CMat, s: C64) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

pub fn scale_vec(v: &CVec, s: C64) -> CVec {
    Col::from_fn(v.nrows(), |i| v[i] * s)
}

pub fn adjoint(m: &CMat) -> CMat {
    m.adjoint().to_owned()
}

pub fn conj_mat(m: &CMat) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].conj())
}

pub fn transpose(m: &CMat) -> CMat {
    m.transpose().to_owned()
}

/// `aᴴ b`.
pub fn dot(a: &CVec, b: &CVec) -> C64 {
    debug_assert_eq!(a.nrows(), b.nrows());
    (0..a.nrows()).map(|i| a[i].conj() * b[i]).sum()
}

pub fn frob(m: &CMat) -> f64 {
    m.norm_l2()
}

pub fn frob_sq(m: &CMat) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc
}

pub fn norm(v: &CVec) -> f64 {
    v.norm_l2()
}

/// Column-major vectorization.
pub fn vectorize(m: &CMat) -> CVec {
    let r = m.nrows();
    Col::from_fn(r * m.ncols(), |k| m[(k % r, k / r)])
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (br, bc) = (b.nrows(), b.ncols());
    Mat::from_fn(a.nrows() * br, a.ncols() * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    let n = b.nrows();
    Col::from_fn(a.nrows() * n, |k| a[k / n] * b[k % n])
}

/// Largest elementwise deviation from Hermitian symmetry.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_part(m: &CMat) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()))
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub struct HermEig {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn herm_eig(m: &CMat) -> Result<HermEig> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "eigendecomposition of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("hermitian eigendecomposition: {e:?}")))?;
    let s = evd.S().column_vector();
    let values = (0..m.nrows()).map(|i| s[i].re).collect();
    Ok(HermEig { values, vectors: evd.U().to_owned() })
}

pub fn herm_eigenvalues(m: &CMat) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("hermitian eigenvalues: {e:?}")))
}

/// Dominant singular triplet `(σ₁, u₁, v₁)`.
pub fn top_singular(m: &CMat) -> Result<(f64, CVec, CVec)> {
    let svd = m
        .svd()
        .map_err(|e| Error::Numerical(format!("svd: {e:?}")))?;
    let s = svd.S().column_vector()[0].re;
    let u = Col::from_fn(m.nrows(), |i| svd.U()[(i, 0)]);
    let v = Col::from_fn(m.ncols(), |i| svd.V()[(i, 0)]);
    Ok((s, u, v))
}

pub fn singular_values(m: &CMat) -> Result<Vec<f64>> {
    Ok(m.singular_values()
        .map_err(|e| Error::Numerical(format!("singular values: {e:?}")))?
        .into_iter()
        .collect())
}

/// Least-squares solution of `a x = b` through the SVD pseudo-inverse.
///
/// Singular values below `rcond · σ_max` count as rank deficiency and are
/// reported as an error rather than silently truncated.
pub fn lstsq(a: &CMat, b: &CMat, rcond: f64) -> Result<CMat> {
    let n = a.ncols();
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "least squares with {} equations and {} right-hand-side rows",
            a.nrows(),
            b.nrows()
        )));
    }
    if a.nrows() < n {
        return Err(Error::RankDeficient(format!(
            "{} equations for {} unknowns",
            a.nrows(),
            n
        )));
    }
    let svd = a
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("svd: {e:?}")))?;
    let s = svd.S().column_vector();
    let smax = s[0].re;
    if !(smax > 0.0) || s[n - 1].re <= rcond * smax {
        return Err(Error::RankDeficient(format!(
            "condition estimate {:e}",
            if smax > 0.0 { s[n - 1].re / smax } else { 0.0 }
        )));
    }
    let uh_b: CMat = svd.U().adjoint() * b;
    let scaled = Mat::from_fn(n, b.ncols(), |i, j| uh_b[(i, j)] / s[i].re);
    Ok(svd.V() * &scaled)
}

/// Roots of `c[0] + c[1] z + … + c[d] zᵈ` from the companion matrix.
pub fn poly_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let mut hi = coeffs.len();
    while hi > 0 && coeffs[hi - 1].norm() == 0.0 {
        hi -= 1;
    }
    if hi <= 1 {
        return Ok(Vec::new());
    }
    let c = &coeffs[..hi];
    let d = c.len() - 1;
    let lead = c[d];
    let comp = Mat::from_fn(d, d, |i, j| {
        if i == 0 {
            -c[d - 1 - j] / lead
        } else if i == j + 1 {
            ONE
        } else {
            ZERO
        }
    });
    comp.eigenvalues()
        .map_err(|e| Error::Numerical(format!("companion eigenvalues: {e:?}")))
}

/// Evaluates a polynomial and its derivative at `z` (Horner).
pub fn poly_eval(coeffs: &[C64], z: C64) -> (C64, C64) {
    let mut p = ZERO;
    let mut dp = ZERO;
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn kron_matches_index_formula() {
        let a = Mat::from_fn(2, 3, |i, j| c(i as f64 + 1.0, j as f64));
        let b = Mat::from_fn(3, 2, |i, j| c(j as f64, -(i as f64)));
        let k = kron(&a, &b);
        assert_eq!((k.nrows(), k.ncols()), (6, 6));
        assert_eq!(k[(4, 3)], a[(1, 1)] * b[(1, 1)]);
        assert_eq!(k[(5, 0)], a[(1, 0)] * b[(2, 0)]);
    }

    #[test]
    fn poly_roots_of_known_quadratic() {
        // (z - 2)(z + i) = z² + (i - 2) z - 2i
        let roots = poly_roots(&[c(0.0, -2.0), c(-2.0, 1.0), ONE]).unwrap();
        assert_eq!(roots.len(), 2);
        for r in roots {
            let (p, _) = poly_eval(&[c(0.0, -2.0), c(-2.0, 1.0), ONE], r);
            assert!(p.norm() < 1e-12);
        }
    }

    #[test]
    fn lstsq_solves_consistent_system() {
        let a = Mat::from_fn(5, 2, |i, j| c((i + j * j) as f64, (i * i * j) as f64 - 1.0));
        let x = Mat::from_fn(2, 1, |i, _| c(1.0 + i as f64, -0.5));
        let b: CMat = &a * &x;
        let xs = lstsq(&a, &b, 1e-12).unwrap();
        assert!(frob(&(&xs - &x)) < 1e-10);
    }

    #[test]
    fn lstsq_flags_rank_deficiency() {
        let a = Mat::from_fn(4, 2, |i, _| c(i as f64, 0.0));
        let b = Mat::from_fn(4, 1, |i, _| c(i as f64, 0.0));
        assert!(matches!(lstsq(&a, &b, 1e-10), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn herm_eig_reconstructs() {
        let a = Mat::from_fn(4, 4, |i, j| c((i * 3 + j) as f64 % 5.0, (i + j) as f64 % 2.0));
        let h = hermitian_part(&a);
        let e = herm_eig(&h).unwrap();
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let d = diag(&e.values.iter().map(|&v| c(v, 0.0)).collect::<Vec<_>>());
        let rec: CMat = &e.vectors * &d * e.vectors.adjoint();
        assert!(frob(&(&rec - &h)) < 1e-12);
    }
}
