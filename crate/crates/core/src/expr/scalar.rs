//! Numbers the expression evaluator can run on.
//!
//! `f64` gives plain values. `Dual<T>` carries one infinitesimal part and
//! gives an exact first derivative along the seeded direction; nesting
//! (`Dual<Dual<f64>>`) gives mixed second derivatives.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(x: f64) -> Self;
    /// Real part.
    fn value(&self) -> f64;
    /// True when every infinitesimal part is zero.
    fn is_constant(&self) -> bool;
    /// True when every part is finite.
    fn is_finite(&self) -> bool;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tan(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    /// `self^b` for a real constant `b`.
    fn powf_const(&self, b: f64) -> Self;
    /// `atan2(self, x)`.
    fn atan2(&self, x: &Self) -> Self;
}

impl Scalar for f64 {
    fn constant(x: f64) -> Self {
        x
    }
    fn value(&self) -> f64 {
        *self
    }
    fn is_constant(&self) -> bool {
        true
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn tan(&self) -> Self {
        f64::tan(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn powf_const(&self, b: f64) -> Self {
        f64::powf(*self, b)
    }
    fn atan2(&self, x: &Self) -> Self {
        f64::atan2(*self, *x)
    }
}

/// Forward-mode dual number `re + eps·ε`, ε² = 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

impl<T: Scalar> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Dual { re, eps }
    }

    /// A variable seeded with unit derivative.
    pub fn variable(re: T) -> Self {
        Dual { re, eps: T::constant(1.0) }
    }

    fn chain(&self, re: T, dre: T) -> Self {
        Dual { re, eps: self.eps.clone() * dre }
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Dual { re: self.re + rhs.re, eps: self.eps + rhs.eps }
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Dual { re: self.re - rhs.re, eps: self.eps - rhs.eps }
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Dual {
            re: self.re.clone() * rhs.re.clone(),
            eps: self.re * rhs.eps + self.eps * rhs.re,
        }
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let re = self.re.clone() / rhs.re.clone();
        let eps = (self.eps * rhs.re.clone() - self.re * rhs.eps) / (rhs.re.clone() * rhs.re);
        Dual { re, eps }
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual { re: -self.re, eps: -self.eps }
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn constant(x: f64) -> Self {
        Dual { re: T::constant(x), eps: T::constant(0.0) }
    }
    fn value(&self) -> f64 {
        self.re.value()
    }
    fn is_constant(&self) -> bool {
        self.re.is_constant() && self.eps.is_constant() && self.eps.value() == 0.0
    }
    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.eps.is_finite()
    }
    fn sin(&self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    fn cos(&self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    fn tan(&self) -> Self {
        let t = self.re.tan();
        self.chain(t.clone(), T::constant(1.0) + t.clone() * t)
    }
    fn exp(&self) -> Self {
        let e = self.re.exp();
        self.chain(e.clone(), e)
    }
    fn ln(&self) -> Self {
        self.chain(self.re.ln(), T::constant(1.0) / self.re.clone())
    }
    fn sqrt(&self) -> Self {
        let s = self.re.sqrt();
        self.chain(s.clone(), T::constant(0.5) / s)
    }
    fn powi(&self, n: i32) -> Self {
        if n == 0 {
            return Self::constant(1.0);
        }
        let d = T::constant(n as f64) * self.re.powi(n - 1);
        self.chain(self.re.powi(n), d)
    }
    fn powf_const(&self, b: f64) -> Self {
        let d = T::constant(b) * self.re.powf_const(b - 1.0);
        self.chain(self.re.powf_const(b), d)
    }
    fn atan2(&self, x: &Self) -> Self {
        let r2 = x.re.clone() * x.re.clone() + self.re.clone() * self.re.clone();
        let eps = (x.re.clone() * self.eps.clone() - self.re.clone() * x.eps.clone()) / r2;
        Dual { re: self.re.atan2(&x.re), eps }
    }
}
