//! Forward-mode differentiation scalars.
//!
//! [`Dual<T>`] carries a value and one directional derivative. Nesting
//! (`Dual<Dual<f64>>`, ...) gives mixed higher derivatives, which is how the
//! connection code obtains second and third derivatives of chart data
//! without special-casing any manifold.

use std::fmt;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, DVector};
use num_traits::{One, Zero};

/// Scalar field usable by chart coefficient functions.
pub trait Scalar:
    nalgebra::Scalar
    + Copy
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
{
    fn from_f64(v: f64) -> Self;
    /// The underlying real value (all infinitesimal parts dropped).
    fn re(&self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;

    fn recip(self) -> Self {
        Self::one() / self
    }

    fn powi(self, n: i32) -> Self {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut acc = Self::one();
        for _ in 0..n {
            acc *= self;
        }
        acc
    }

    fn scale(self, k: f64) -> Self {
        self * Self::from_f64(k)
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn re(&self) -> f64 {
        *self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn recip(self) -> Self {
        1.0 / self
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// `v + eps * d` with `eps^2 = 0`.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct Dual<T> {
    pub v: T,
    pub d: T,
}

impl<T: Scalar> Dual<T> {
    pub fn new(v: T, d: T) -> Self {
        Dual { v, d }
    }

    pub fn constant(v: T) -> Self {
        Dual { v, d: T::zero() }
    }

    pub fn variable(v: T) -> Self {
        Dual { v, d: T::one() }
    }

    #[inline]
    fn chain(self, fv: T, dfv: T) -> Self {
        Dual { v: fv, d: dfv * self.d }
    }
}

impl<T: fmt::Debug> fmt::Debug for Dual<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?} + {:?}e)", self.v, self.d)
    }
}

impl<T: Scalar> Zero for Dual<T> {
    fn zero() -> Self {
        Dual { v: T::zero(), d: T::zero() }
    }
    fn is_zero(&self) -> bool {
        self.v.is_zero() && self.d.is_zero()
    }
}

impl<T: Scalar> One for Dual<T> {
    fn one() -> Self {
        Dual { v: T::one(), d: T::zero() }
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Dual { v: self.v + o.v, d: self.d + o.d }
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Dual { v: self.v - o.v, d: self.d - o.d }
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Dual { v: self.v * o.v, d: self.d * o.v + self.v * o.d }
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let inv = T::one() / o.v;
        let v = self.v * inv;
        Dual { v, d: (self.d - v * o.d) * inv }
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Dual { v: -self.v, d: -self.d }
    }
}

macro_rules! assign_op {
    ($tr:ident, $m:ident, $op:tt) => {
        impl<T: Scalar> $tr for Dual<T> {
            #[inline]
            fn $m(&mut self, o: Self) {
                *self = *self $op o;
            }
        }
    };
}
assign_op!(AddAssign, add_assign, +);
assign_op!(SubAssign, sub_assign, -);
assign_op!(MulAssign, mul_assign, *);
assign_op!(DivAssign, div_assign, /);

impl<T: Scalar> Scalar for Dual<T> {
    fn from_f64(v: f64) -> Self {
        Dual::constant(T::from_f64(v))
    }
    fn re(&self) -> f64 {
        self.v.re()
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.v.ln(), self.v.recip())
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, (s + s).recip())
    }
}

/// Lift a vector of scalars to duals seeded along `dir`.
pub fn seed<T: Scalar>(x: &DVector<T>, dir: &DVector<T>) -> DVector<Dual<T>> {
    DVector::from_iterator(x.len(), x.iter().zip(dir.iter()).map(|(&v, &d)| Dual::new(v, d)))
}

pub fn lift<T: Scalar>(x: &DVector<T>) -> DVector<Dual<T>> {
    x.map(Dual::constant)
}

pub fn vec_parts<T: Scalar>(v: &DVector<Dual<T>>) -> (DVector<T>, DVector<T>) {
    (v.map(|z| z.v), v.map(|z| z.d))
}

pub fn mat_parts<T: Scalar>(m: &DMatrix<Dual<T>>) -> (DMatrix<T>, DMatrix<T>) {
    (m.map(|z| z.v), m.map(|z| z.d))
}

pub fn to_f64_vec<S: Scalar>(v: &DVector<S>) -> DVector<f64> {
    v.map(|z| z.re())
}

pub fn to_f64_mat<S: Scalar>(m: &DMatrix<S>) -> DMatrix<f64> {
    m.map(|z| z.re())
}

pub fn from_f64_vec<S: Scalar>(v: &DVector<f64>) -> DVector<S> {
    v.map(S::from_f64)
}

pub fn from_f64_mat<S: Scalar>(m: &DMatrix<f64>) -> DMatrix<S> {
    m.map(S::from_f64)
}
