use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::scalar::Real;

/// Arithmetic the expression evaluator needs. Implemented by every [`Real`]
/// and, recursively, by [`Dual`] over any implementor, so nesting
/// `Dual<Dual<T>>` yields exact second derivatives.
pub trait ExprScalar<T: Real>:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    fn constant(c: T) -> Self;
    /// Innermost real part.
    fn re(&self) -> T;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn tanh(self) -> Self;
    /// `self^p` for a constant real exponent.
    fn powf_const(self, p: T) -> Self;

    /// Integer power by repeated squaring.
    fn powi(self, n: i32) -> Self {
        let mut base = self;
        let mut e = n.unsigned_abs();
        let mut acc = Self::constant(T::one());
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            e >>= 1;
            if e > 0 {
                base = base * base;
            }
        }
        if n < 0 {
            Self::constant(T::one()) / acc
        } else {
            acc
        }
    }
}

impl<T: Real> ExprScalar<T> for T {
    #[inline]
    fn constant(c: T) -> Self {
        c
    }
    #[inline]
    fn re(&self) -> T {
        *self
    }
    #[inline]
    fn sin(self) -> Self {
        num_traits::Float::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        num_traits::Float::cos(self)
    }
    #[inline]
    fn exp(self) -> Self {
        num_traits::Float::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        num_traits::Float::ln(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        num_traits::Float::sqrt(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        num_traits::Float::tanh(self)
    }
    #[inline]
    fn powf_const(self, p: T) -> Self {
        num_traits::Float::powf(self, p)
    }
}

/// Forward-mode dual number `re + eps·ε`, `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Dual<S> {
    pub re: S,
    pub eps: S,
}

impl<S> Dual<S> {
    pub fn new(re: S, eps: S) -> Self {
        Self { re, eps }
    }
}

impl<S: Add<Output = S>> Add for Dual<S> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Dual::new(self.re + o.re, self.eps + o.eps)
    }
}

impl<S: Sub<Output = S>> Sub for Dual<S> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Dual::new(self.re - o.re, self.eps - o.eps)
    }
}

impl<S: Copy + Add<Output = S> + Mul<Output = S>> Mul for Dual<S> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Dual::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl<S: Copy + Sub<Output = S> + Mul<Output = S> + Div<Output = S>> Div for Dual<S> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let q = self.re / o.re;
        Dual::new(q, (self.eps - q * o.eps) / o.re)
    }
}

impl<S: Neg<Output = S>> Neg for Dual<S> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Dual::new(-self.re, -self.eps)
    }
}

impl<T: Real, S: ExprScalar<T>> ExprScalar<T> for Dual<S> {
    #[inline]
    fn constant(c: T) -> Self {
        Dual::new(S::constant(c), S::constant(T::zero()))
    }
    #[inline]
    fn re(&self) -> T {
        self.re.re()
    }
    #[inline]
    fn sin(self) -> Self {
        Dual::new(self.re.sin(), self.eps * self.re.cos())
    }
    #[inline]
    fn cos(self) -> Self {
        Dual::new(self.re.cos(), -(self.eps * self.re.sin()))
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual::new(e, self.eps * e)
    }
    #[inline]
    fn ln(self) -> Self {
        Dual::new(self.re.ln(), self.eps / self.re)
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Dual::new(s, self.eps / (s + s))
    }
    #[inline]
    fn tanh(self) -> Self {
        let t = self.re.tanh();
        Dual::new(t, self.eps * (S::constant(T::one()) - t * t))
    }
    #[inline]
    fn powf_const(self, p: T) -> Self {
        let pm1 = self.re.powf_const(p - T::one());
        Dual::new(pm1 * self.re, self.eps * pm1 * S::constant(p))
    }
}

/// Second-order dual: `re.re` value, `re.eps`/`eps.re` first directional
/// derivatives, `eps.eps` mixed second derivative.
pub type Dual2<T> = Dual<Dual<T>>;

impl<T: Real> Dual2<T> {
    pub fn seeded(x: T, a: T, b: T) -> Self {
        Dual::new(Dual::new(x, a), Dual::new(b, T::zero()))
    }
}
