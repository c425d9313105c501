use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::scalar::{Number, Real};

/// Forward-mode dual number `re + eps·ε` with `ε² = 0`.
///
/// The inner type may itself be a dual, which is how higher derivatives are
/// obtained: `Dual<Dual<f64>>` carries a second-order directional derivative
/// in `eps.eps`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Dual<S> {
    pub re: S,
    pub eps: S,
}

impl<S: Number> Dual<S> {
    #[inline]
    pub fn new(re: S, eps: S) -> Self {
        Self { re, eps }
    }

    /// A constant: zero tangent.
    #[inline]
    pub fn constant(re: S) -> Self {
        Self { re, eps: S::zero() }
    }

    /// A seed variable: unit tangent.
    #[inline]
    pub fn variable(re: S) -> Self {
        Self { re, eps: S::one() }
    }

    /// `(f(re), eps·f'(re))`; a zero tangent stays exactly zero even where
    /// `f'` is infinite.
    #[inline]
    fn chain(self, value: S, deriv: S) -> Self {
        let eps = if self.eps == S::zero() {
            self.eps
        } else {
            self.eps * deriv
        };
        Self { re: value, eps }
    }
}

impl<S: Number> Add for Dual<S> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self::new(self.re + rhs.re, self.eps + rhs.eps)
    }
}

impl<S: Number> Sub for Dual<S> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.re - rhs.re, self.eps - rhs.eps)
    }
}

impl<S: Number> Mul for Dual<S> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Self::new(self.re * rhs.re, self.eps * rhs.re + self.re * rhs.eps)
    }
}

impl<S: Number> Div for Dual<S> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let q = self.re / rhs.re;
        Self::new(q, (self.eps - q * rhs.eps) / rhs.re)
    }
}

impl<S: Number> Neg for Dual<S> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.eps)
    }
}

impl<S: Number> AddAssign for Dual<S> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<S: Number> SubAssign for Dual<S> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<S: Number> MulAssign for Dual<S> {
    #[inline]
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<S: Number> Number for Dual<S> {
    type Base = S::Base;

    #[inline]
    fn from_base(v: Self::Base) -> Self {
        Self::constant(S::from_base(v))
    }

    #[inline]
    fn base(&self) -> Self::Base {
        self.re.base()
    }

    #[inline]
    fn is_constant(&self) -> bool {
        self.re.is_constant() && self.eps == S::zero() && self.eps.is_constant()
    }

    #[inline]
    fn all_finite(&self) -> bool {
        self.re.all_finite() && self.eps.all_finite()
    }

    #[inline]
    fn sqrt(self) -> Self {
        let r = self.re.sqrt();
        self.chain(r, S::cst(0.5) / r)
    }

    #[inline]
    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }

    #[inline]
    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }

    #[inline]
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }

    #[inline]
    fn ln(self) -> Self {
        self.chain(self.re.ln(), S::one() / self.re)
    }

    #[inline]
    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::one(),
            1 => self,
            _ => {
                let lower = self.re.powi(n - 1);
                self.chain(lower * self.re, S::cst(n as f64) * lower)
            }
        }
    }

    #[inline]
    fn powf(self, p: Self::Base) -> Self {
        let lower = self.re.powf(p - Self::Base::lit(1.0));
        self.chain(lower * self.re, S::from_base(p) * lower)
    }

    #[inline]
    fn abs(self) -> Self {
        if self.base() < Self::Base::lit(0.0) {
            -self
        } else {
            self
        }
    }
}
