//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra as na;
use num_traits as nt;

/// Real floating point type the models are generic over (`f32` or `f64`).
pub trait Real:
    Copy
    + nt::FloatConst
    + nt::FromPrimitive
    + na::RealField
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    const TWO: Self;
    const HALF: Self;
    const INFINITY: Self;
    const NEG_INFINITY: Self;
    const EPSILON: Self;

    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self;

    fn as_f64(self) -> f64;

    fn of_usize(n: usize) -> Self {
        Self::lit(n as f64)
    }

    fn is_nan_value(self) -> bool;

    fn is_infinite_value(self) -> bool;

    fn ln_1p_value(self) -> Self;
}

macro_rules! impl_real {
    ($f:ident) => {
        impl Real for $f {
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;
            const TWO: Self = 2.0;
            const HALF: Self = 0.5;
            const INFINITY: Self = $f::INFINITY;
            const NEG_INFINITY: Self = $f::NEG_INFINITY;
            const EPSILON: Self = $f::EPSILON;

            #[inline]
            fn lit(x: f64) -> Self {
                x as $f
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }

            #[inline]
            fn is_nan_value(self) -> bool {
                $f::is_nan(self)
            }

            #[inline]
            fn is_infinite_value(self) -> bool {
                $f::is_infinite(self)
            }

            #[inline]
            fn ln_1p_value(self) -> Self {
                $f::ln_1p(self)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Complex number over a [`Real`].
pub type Complex<T> = na::Complex<T>;

#[inline]
pub(crate) fn c<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn cr<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::ZERO)
}

/// Modulus `|z|`.
#[inline]
pub fn modulus<T: Real>(z: Complex<T>) -> T {
    na::ComplexField::modulus(z)
}
