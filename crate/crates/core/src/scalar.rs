//! Scalar abstractions shared by every module.
//!
//! [`Real`] is the base floating-point type a problem is posed in (`f32` or
//! `f64`). [`Number`] is anything that behaves like a real for the purposes
//! of evaluating a differentiable function: a plain real or a (possibly
//! nested) [`Dual`](crate::autodiff::Dual) built on top of one.

use std::fmt::{Debug, Display};
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_traits::{FloatConst, FromPrimitive};

/// Base floating point type: f32 or f64.
///
/// Deliberately not a `Float` subtrait: the elementary functions come from
/// [`Number`] so that plain reals and dual numbers share one call syntax.
pub trait Real:
    Number<Base = Self> + PartialOrd + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an f64 literal into this type.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("literal representable")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).expect("usize representable")
    }

    fn to_f64_lossy(self) -> f64;
    fn infinity() -> Self;
    fn epsilon() -> Self;
    fn pi() -> Self;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }
            #[inline]
            fn infinity() -> Self {
                <$t>::INFINITY
            }
            #[inline]
            fn epsilon() -> Self {
                <$t>::EPSILON
            }
            #[inline]
            fn pi() -> Self {
                <$t as FloatConst>::PI()
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Arithmetic plus the elementary functions the differentiation engine
/// supports. Implemented for `f32`, `f64` and `Dual<S>` for any `S: Number`.
pub trait Number:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    type Base: Real;

    fn from_base(v: Self::Base) -> Self;
    /// Innermost primal value.
    fn base(&self) -> Self::Base;
    /// True when every tangent component (at every nesting level) is zero.
    fn is_constant(&self) -> bool;
    /// True when the value and every tangent component are finite.
    fn all_finite(&self) -> bool;

    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, p: Self::Base) -> Self;
    fn abs(self) -> Self;

    #[inline]
    fn zero() -> Self {
        Self::from_base(Self::Base::lit(0.0))
    }

    #[inline]
    fn one() -> Self {
        Self::from_base(Self::Base::lit(1.0))
    }

    #[inline]
    fn cst(v: f64) -> Self {
        Self::from_base(Self::Base::lit(v))
    }

    /// Minimum by primal value; a tie keeps `self` (and its tangent).
    #[inline]
    fn min_of(self, other: Self) -> Self {
        if self.base() <= other.base() {
            self
        } else {
            other
        }
    }

    /// Maximum by primal value; a tie keeps `self` (and its tangent).
    #[inline]
    fn max_of(self, other: Self) -> Self {
        if self.base() >= other.base() {
            self
        } else {
            other
        }
    }

    #[inline]
    fn clamp_to(self, lo: Self::Base, hi: Self::Base) -> Self {
        self.max_of(Self::from_base(lo)).min_of(Self::from_base(hi))
    }
}

macro_rules! impl_number_for_float {
    ($t:ty) => {
        impl Number for $t {
            type Base = $t;

            #[inline]
            fn from_base(v: $t) -> Self {
                v
            }
            #[inline]
            fn base(&self) -> $t {
                *self
            }
            #[inline]
            fn is_constant(&self) -> bool {
                true
            }
            #[inline]
            fn all_finite(&self) -> bool {
                <$t>::is_finite(*self)
            }
            #[inline]
            fn sqrt(self) -> Self {
                <$t>::sqrt(self)
            }
            #[inline]
            fn sin(self) -> Self {
                <$t>::sin(self)
            }
            #[inline]
            fn cos(self) -> Self {
                <$t>::cos(self)
            }
            #[inline]
            fn exp(self) -> Self {
                <$t>::exp(self)
            }
            #[inline]
            fn ln(self) -> Self {
                <$t>::ln(self)
            }
            #[inline]
            fn powi(self, n: i32) -> Self {
                <$t>::powi(self, n)
            }
            #[inline]
            fn powf(self, p: $t) -> Self {
                <$t>::powf(self, p)
            }
            #[inline]
            fn abs(self) -> Self {
                <$t>::abs(self)
            }
        }
    };
}

impl_number_for_float!(f32);
impl_number_for_float!(f64);

/// `‖a − b‖∞` over two slices of reals.
pub fn max_abs_diff<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |m, (x, y)| m.max_of((*x - *y).abs()))
}
