//! Thin complex linear-algebra layer over `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Draws from CN(0, 1): independent real and imaginary parts of variance 1/2.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_normal_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    CVector::from_fn(n, |_, _| complex_normal(rng))
}

pub fn is_hermitian(a: &CMatrix, tol: f64) -> bool {
    a.is_square()
        && (0..a.nrows()).all(|i| (0..=i).all(|j| (a[(i, j)] - a[(j, i)].conj()).norm() <= tol))
}

/// Cholesky factorization that fails on matrices that are not positive
/// definite. nalgebra's complex square root never fails, so an indefinite
/// input shows up as a non-real pivot instead of `None`.
pub fn cholesky(a: CMatrix) -> Option<Cholesky<Complex64, Dyn>> {
    let chol = Cholesky::new(a)?;
    let l = chol.l_dirty();
    let ok = (0..l.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re > 0.0 && d.im.abs() <= 1e-8 * d.re
    });
    ok.then_some(chol)
}

/// Solves `a x = b` for Hermitian positive-definite `a`.
pub fn hermitian_solve(a: CMatrix, b: &CVector, what: &'static str) -> Result<CVector> {
    let chol = cholesky(a).ok_or(Error::NotPositiveDefinite(what))?;
    Ok(chol.solve(b))
}

/// Square-root factor `F` with `F F^H = a` for Hermitian PSD `a`.
///
/// Cholesky when `a` is positive definite; otherwise an eigendecomposition
/// with negative round-off eigenvalues clipped to zero.
pub fn psd_sqrt(a: &CMatrix) -> CMatrix {
    if let Some(chol) = cholesky(a.clone()) {
        return chol.l();
    }
    let eig = SymmetricEigen::new(a.clone());
    let scales = eig.eigenvalues.map(|v| Complex64::new(v.max(0.0).sqrt(), 0.0));
    let mut f = eig.eigenvectors;
    for (j, s) in scales.iter().enumerate() {
        f.column_mut(j).scale_mut(s.re);
    }
    f
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(a: &CMatrix) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.min()
}

pub fn real_to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Relative Frobenius distance `||a - b|| / ||b||`.
pub fn relative_frobenius(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm()
}

/// `x^H y`.
pub fn inner(x: &CVector, y: &CVector) -> Complex64 {
    x.dotc(y)
}

pub fn zero_vector(n: usize) -> CVector {
    CVector::from_element(n, ZERO)
}

pub fn real_vector(values: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(values)
}
