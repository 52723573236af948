//! Small complex linear-algebra helpers shared by the metric and solver code.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Forces exact Hermitian symmetry, averaging away floating-point drift.
pub fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Log-determinant of a Hermitian positive-definite matrix via Cholesky.
pub fn lndet_hpd(a: &CMat) -> Option<f64> {
    let chol = a.clone().cholesky()?;
    let l = chol.l();
    let mut acc = 0.0;
    for i in 0..l.nrows() {
        let d = l[(i, i)].re;
        if d <= 0.0 {
            return None;
        }
        acc += d.ln();
    }
    Some(2.0 * acc)
}

/// Real inner product on stacked complex matrices, `Re tr(A^H B)` summed
/// over the slice. This is the Euclidean product over the real and
/// imaginary parts, matching the gradient convention used by the solvers.
pub fn real_inner(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            x.iter()
                .zip(y.iter())
                .map(|(p, q)| (p.conj() * q).re)
                .sum::<f64>()
        })
        .sum()
}

pub fn frob_norm_sq(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Orthonormal basis of the null space of `a` (columns), for a matrix with
/// `cols` columns. An empty `a` yields the identity basis.
///
/// The row space comes from a thin SVD; the null space is completed from
/// canonical vectors by modified Gram-Schmidt with one reorthogonalization
/// pass, which keeps the residual `a * basis` at working precision.
pub fn null_space_basis(a: &CMat, cols: usize) -> CMat {
    if a.nrows() == 0 {
        return CMat::identity(cols, cols);
    }
    assert_eq!(a.ncols(), cols);
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let tol = smax * (a.nrows().max(cols) as f64) * f64::EPSILON * 16.0;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let dim = cols - rank;
    let mut basis = CMat::zeros(cols, dim);
    if dim == 0 {
        return basis;
    }

    // Columns of `row_space` span the orthogonal complement of the kernel.
    let row_space = v_t.rows(0, rank).adjoint();
    let mut found = 0;
    for i in 0..cols {
        if found == dim {
            break;
        }
        let mut v = CVec::zeros(cols);
        v[i] = Complex64::new(1.0, 0.0);
        for _ in 0..2 {
            let proj = &row_space * (row_space.adjoint() * &v);
            v -= proj;
            for j in 0..found {
                let b = basis.column(j).clone_owned();
                let coef: Complex64 = b.iter().zip(v.iter()).map(|(p, q)| p.conj() * q).sum();
                v -= b * coef;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.set_column(found, &(v / Complex64::new(norm, 0.0)));
            found += 1;
        }
    }
    assert_eq!(found, dim, "canonical sweep must complete the basis");
    basis
}

/// Largest eigenvalue of the Hermitian PSD matrix `a`.
pub fn max_eigenvalue_hermitian(a: &CMat) -> f64 {
    let eig = hermitize(a).symmetric_eigen();
    eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max)
}

/// Largest eigenvalue and a unit eigenvector of the Hermitian matrix `a`.
pub fn top_eigenpair_hermitian(a: &CMat) -> (f64, CVec) {
    let eig = hermitize(a).symmetric_eigen();
    let (idx, &val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|(_, x), (_, y)| x.partial_cmp(y).expect("finite eigenvalues"))
        .expect("non-empty matrix");
    (val, eig.eigenvectors.column(idx).clone_owned())
}
