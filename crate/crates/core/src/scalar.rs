//! Scalar abstraction and small dense complex-matrix helpers.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::Array2;
use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real floating-point scalar underlying every amplitude in the crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Tolerance used for normalization checks at this precision.
    fn tolerance() -> Self;

    /// Converts an `f64` literal. Never fails for `f32`/`f64`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }
}

impl Real for f64 {
    fn tolerance() -> f64 {
        1e-10
    }
}

impl Real for f32 {
    fn tolerance() -> f32 {
        1e-4
    }
}

/// Dense complex matrix.
pub type CMatrix<T> = Array2<Complex<T>>;

pub(crate) fn c<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::lit(re), T::lit(im))
}

pub(crate) fn cr<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

/// `exp(i * theta)`.
pub fn phase<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

pub fn identity<T: Real>(n: usize) -> CMatrix<T> {
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            Complex::new(T::one(), T::zero())
        } else {
            Complex::new(T::zero(), T::zero())
        }
    })
}

pub fn zeros<T: Real>(rows: usize, cols: usize) -> CMatrix<T> {
    Array2::from_elem((rows, cols), Complex::new(T::zero(), T::zero()))
}

/// Conjugate transpose.
pub fn dagger<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    m.t().mapv(|z| z.conj())
}

/// Elementwise complex conjugate.
pub fn conj<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    m.mapv(|z| z.conj())
}

pub fn trace<T: Real>(m: &CMatrix<T>) -> Complex<T> {
    m.diag().iter().fold(Complex::new(T::zero(), T::zero()), |acc, z| acc + z)
}

/// Kronecker product with `a` as the more significant factor.
pub fn kron<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| {
        a[[i / br, j / bc]] * b[[i % br, j % bc]]
    })
}

/// Largest elementwise modulus of `a - b`; infinite on shape mismatch.
pub fn max_abs_diff<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> T {
    if a.dim() != b.dim() {
        return T::infinity();
    }
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(T::zero(), T::max)
}

pub fn is_unitary<T: Real>(m: &CMatrix<T>, tol: T) -> bool {
    let (r, cols) = m.dim();
    r == cols && max_abs_diff(&m.dot(&dagger(m)), &identity(r)) <= tol
}

pub fn is_hermitian<T: Real>(m: &CMatrix<T>, tol: T) -> bool {
    max_abs_diff(m, &dagger(m)) <= tol
}

/// Commutator `ab - ba`.
pub fn commutator<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a.dot(b) - b.dot(a)
}
