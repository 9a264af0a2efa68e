//! Scalar abstraction.
//!
//! Every numeric routine in the crate is generic over a real field `T`
//! (`f32` or `f64`); complex entries are `num_complex::Complex<T>`. Exact
//! weights live in [`crate::exact`] and are converted at the boundary.

use nalgebra::{DMatrix, RealField};
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar field used for operator entries.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {}

impl<T: RealField + Copy + FromPrimitive + ToPrimitive> Real for T {}

/// Complex scalar over `T`.
pub type C<T> = Complex<T>;

/// Dense complex matrix over `T` (column-major).
pub type CMatrix<T> = DMatrix<Complex<T>>;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("finite literal")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> C<T> {
    Complex::new(re, im)
}

#[inline]
pub fn cabs<T: Real>(z: C<T>) -> T {
    (z.re * z.re + z.im * z.im).sqrt()
}

/// `exp(i phase)`.
#[inline]
pub fn phase<T: Real>(angle: T) -> C<T> {
    Complex::new(angle.cos(), angle.sin())
}

/// Largest entry modulus; zero for an empty matrix.
pub fn max_abs<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(z.re * z.re + z.im * z.im)).sqrt()
}

/// Largest entry modulus of `a - b`.
pub fn max_abs_diff<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> T {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter()
        .zip(b.iter())
        .fold(T::zero(), |acc, (x, y)| {
            let z = *x - *y;
            acc.max(z.re * z.re + z.im * z.im)
        })
        .sqrt()
}

/// Complex product formed from four real products, which take the fast
/// real matrix-multiply path.
pub fn matmul<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    assert_eq!(a.ncols(), b.nrows(), "shape mismatch");
    let (ar, ai) = (a.map(|z| z.re), a.map(|z| z.im));
    let (br, bi) = (b.map(|z| z.re), b.map(|z| z.im));
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    CMatrix::from_fn(a.nrows(), b.ncols(), |r, c| Complex::new(re[(r, c)], im[(r, c)]))
}

/// `a b c`.
pub fn matmul3<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>, c: &CMatrix<T>) -> CMatrix<T> {
    matmul(&matmul(a, b), c)
}

/// Conjugate transpose.
pub fn adjoint<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    m.map(|z| z.conj()).transpose()
}

pub fn identity<T: Real>(n: usize) -> CMatrix<T> {
    CMatrix::identity(n, n)
}

/// Kronecker product `a ⊗ b` with `a`-major indexing.
pub fn kron<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let s = a[(i, j)];
            if s == C::new(T::zero(), T::zero()) {
                continue;
            }
            for q in 0..bc {
                for p in 0..br {
                    out[(i * br + p, j * bc + q)] = s * b[(p, q)];
                }
            }
        }
    }
    out
}

/// Smallest eigenvalue of a Hermitian matrix (the Hermitian part is used).
pub fn min_hermitian_eigenvalue<T: Real>(m: &CMatrix<T>) -> T {
    if m.nrows() == 0 {
        return T::zero();
    }
    let h = hermitian_part(m);
    let eig = nalgebra::SymmetricEigen::new(h);
    let first = eig.eigenvalues[0];
    eig.eigenvalues.iter().fold(first, |acc, v| acc.min(*v))
}

/// `(m + m*) / 2`.
pub fn hermitian_part<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    let half = real::<T>(0.5);
    (m + adjoint(m)).map(|z| z * half)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_product_matches_complex_product() {
        let a = CMatrix::<f64>::from_fn(3, 4, |r, c| Complex::new(r as f64 - 0.5 * c as f64, (r * c) as f64 + 0.25));
        let b = CMatrix::<f64>::from_fn(4, 2, |r, c| Complex::new(0.3 * c as f64 + 1.0, r as f64 - c as f64));
        assert!(max_abs_diff(&matmul(&a, &b), &(&a * &b)) < 1e-14);
    }
}
