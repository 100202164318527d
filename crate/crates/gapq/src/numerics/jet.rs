//! Truncated-Taylor scalars ("jets").
//!
//! A [`Jet`] stores the coefficients `c_k = f^(k)(x0) / k!` of a function
//! expanded at some point, truncated at a fixed order. Arithmetic on jets is
//! exact truncated power-series algebra, so pushing a jet through any chain
//! of operations yields the Taylor coefficients of the composite function.
//! This is how every Laplace-Stieltjes transform in this crate is
//! differentiated: evaluate it once at `s = Jet::variable(0.0, k)` and read
//! the coefficients.
//!
//! Order rules: an order-0 jet is an exact constant and broadcasts against
//! any order. Two jets of different nonzero orders never meet in a correct
//! program; mixing them is a panic, not a silent truncation.

use num_complex::Complex64;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::NumericsError;

#[derive(Clone, PartialEq)]
pub struct Jet {
    /// Taylor coefficients, `c[k] = f^(k)/k!`. Never empty.
    c: Vec<Complex64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet[")?;
        for (k, c) in self.c.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{:.6e}{:+.6e}i", c.re, c.im)?;
        }
        write!(f, "]")
    }
}

impl Jet {
    /// Exact constant (order 0).
    pub fn constant(v: impl Into<Complex64>) -> Self {
        Jet { c: vec![v.into()] }
    }

    /// Constant padded with explicit zero derivatives up to `order`.
    pub fn constant_at(v: impl Into<Complex64>, order: usize) -> Self {
        let mut c = vec![Complex64::new(0.0, 0.0); order + 1];
        c[0] = v.into();
        Jet { c }
    }

    /// The expansion variable itself: value `v`, first derivative 1.
    pub fn variable(v: impl Into<Complex64>, order: usize) -> Self {
        let mut j = Self::constant_at(v, order);
        if order >= 1 {
            j.c[1] = Complex64::new(1.0, 0.0);
        }
        j
    }

    pub fn from_coeffs(c: Vec<Complex64>) -> Self {
        assert!(!c.is_empty(), "jet needs at least a constant term");
        Jet { c }
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    /// k-th Taylor coefficient; zero beyond the stored order.
    pub fn coeff(&self, k: usize) -> Complex64 {
        self.c.get(k).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.c
    }

    pub fn value(&self) -> Complex64 {
        self.c[0]
    }

    /// k-th derivative, `k! * c_k`.
    pub fn derivative(&self, k: usize) -> Complex64 {
        let mut fact = 1.0;
        for i in 2..=k {
            fact *= i as f64;
        }
        self.coeff(k) * fact
    }

    /// Sum of coefficient magnitudes. Submultiplicative, which is what the
    /// matrix-exponential scaling bound needs.
    pub fn norm1(&self) -> f64 {
        self.c.iter().map(|c| c.norm()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Result order for a binary op; panics on a genuine order mismatch.
    fn joint_order(&self, other: &Jet) -> usize {
        let (a, b) = (self.order(), other.order());
        if a == 0 || b == 0 || a == b {
            a.max(b)
        } else {
            panic!("jet order mismatch: {a} vs {b}");
        }
    }

    pub fn scale(&self, k: Complex64) -> Jet {
        Jet {
            c: self.c.iter().map(|c| c * k).collect(),
        }
    }

    /// Reinterpret `f(u)` as `f(a*u)`: coefficient k picks up `a^k`.
    /// Used to re-express jets after a linear substitution of the variable,
    /// e.g. turning an expansion in `z-1` into one in `s` via `z = 1 - s/lambda`.
    pub fn rescale_variable(&self, a: Complex64) -> Jet {
        let mut pow = Complex64::new(1.0, 0.0);
        let mut c = Vec::with_capacity(self.c.len());
        for coef in &self.c {
            c.push(coef * pow);
            pow *= a;
        }
        Jet { c }
    }

    pub fn truncated(&self, order: usize) -> Jet {
        if self.order() <= order {
            self.clone()
        } else {
            Jet {
                c: self.c[..=order].to_vec(),
            }
        }
    }

    pub fn try_recip(&self) -> Result<Jet, NumericsError> {
        let c0 = self.c[0];
        if c0.norm() == 0.0 {
            return Err(NumericsError::ZeroConstantTerm);
        }
        let n = self.order();
        let mut r = vec![Complex64::new(0.0, 0.0); n + 1];
        r[0] = Complex64::new(1.0, 0.0) / c0;
        for k in 1..=n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 1..=k {
                acc += self.coeff(j) * r[k - j];
            }
            r[k] = -acc / c0;
        }
        Ok(Jet { c: r })
    }

    pub fn try_div(&self, den: &Jet) -> Result<Jet, NumericsError> {
        Ok(self * &den.try_recip()?)
    }

    /// exp of the jet, via g' = f' g coefficient recursion on top of exp(c0).
    pub fn exp(&self) -> Jet {
        let n = self.order();
        let mut g = vec![Complex64::new(0.0, 0.0); n + 1];
        g[0] = self.c[0].exp();
        for k in 1..=n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 1..=k {
                acc += (j as f64) * self.coeff(j) * g[k - j];
            }
            g[k] = acc / (k as f64);
        }
        Jet { c: g }
    }

    pub fn powi(&self, mut e: u32) -> Jet {
        let mut base = self.clone();
        let mut acc = Jet::constant_at(1.0, self.order());
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        acc
    }

    /// Substitute `inner` for this jet's variable (Horner). Valid only when
    /// `inner` has zero constant term, so expansion points line up; the
    /// result is truncated at `inner`'s order.
    pub fn compose(&self, inner: &Jet) -> Jet {
        assert!(
            inner.value().norm() < 1e-12,
            "composition needs a zero constant term"
        );
        let mut acc = Jet::constant(self.coeff(self.order()));
        for k in (0..self.order()).rev() {
            acc = &(&acc * inner) + &Jet::constant(self.coeff(k));
        }
        acc.truncated(inner.order())
    }
}

impl From<f64> for Jet {
    fn from(v: f64) -> Self {
        Jet::constant(v)
    }
}

impl From<Complex64> for Jet {
    fn from(v: Complex64) -> Self {
        Jet::constant(v)
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let n = self.joint_order(rhs);
        let c = (0..=n).map(|k| self.coeff(k) + rhs.coeff(k)).collect();
        Jet { c }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let n = self.joint_order(rhs);
        let c = (0..=n).map(|k| self.coeff(k) - rhs.coeff(k)).collect();
        Jet { c }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let n = self.joint_order(rhs);
        let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
        let amax = self.order().min(n);
        for (i, ai) in self.c.iter().take(amax + 1).enumerate() {
            if ai.norm() == 0.0 {
                continue;
            }
            let bmax = rhs.order().min(n - i);
            for (j, bj) in rhs.c.iter().take(bmax + 1).enumerate() {
                c[i + j] += ai * bj;
            }
        }
        Jet { c }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet {
            c: self.c.iter().map(|c| -c).collect(),
        }
    }
}

/// Division panics on a zero constant term; use `try_div` where the
/// denominator is data-dependent.
impl Div for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self.try_div(rhs)
            .expect("jet division by zero constant term")
    }
}

macro_rules! forward_owned_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $trait<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

forward_owned_binop!(Add, add);
forward_owned_binop!(Sub, sub);
forward_owned_binop!(Mul, mul);
forward_owned_binop!(Div, div);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        -&self
    }
}
