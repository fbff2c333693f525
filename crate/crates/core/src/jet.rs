//! Truncated Taylor series in the small parameter.
//!
//! A [`Jet`] holds the coefficients `c[0..=order]` of a power series in `ε`
//! truncated after `ε^order`. All arithmetic is exact truncated-polynomial
//! arithmetic: products are Cauchy convolutions, and the elementary functions
//! use the usual derivative recurrences. Jets are `Copy` and never allocate.

use core::fmt;
use core::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use nalgebra::DVector;

/// Largest supported truncation order.
pub const MAX_ORDER: usize = 7;
const CAP: usize = MAX_ORDER + 1;

#[derive(Clone, Copy, PartialEq)]
pub struct Jet {
    order: usize,
    c: [f64; CAP],
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.coeffs()).finish()
    }
}

impl Jet {
    /// Constant `value` carried at the given order.
    pub fn constant(value: f64, order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let mut c = [0.0; CAP];
        c[0] = value;
        Jet { order, c }
    }

    /// `value + slope·ε`, truncated at `order`.
    pub fn variable(value: f64, slope: f64, order: usize) -> Self {
        let mut j = Self::constant(value, order);
        if order >= 1 {
            j.c[1] = slope;
        }
        j
    }

    /// Builds a jet from explicit coefficients; missing ones are zero.
    pub fn from_coeffs(coeffs: &[f64], order: usize) -> Self {
        let mut j = Self::constant(0.0, order);
        for (k, &v) in coeffs.iter().enumerate().take(order + 1) {
            j.c[k] = v;
        }
        j
    }

    /// The identity jet `ε` itself.
    pub fn epsilon(order: usize) -> Self {
        Self::variable(0.0, 1.0, order)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c[..=self.order]
    }

    /// Coefficient of `ε^k` (zero beyond the truncation order).
    pub fn coeff(&self, k: usize) -> f64 {
        if k <= self.order {
            self.c[k]
        } else {
            0.0
        }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn set_coeff(&mut self, k: usize, v: f64) {
        assert!(k <= self.order);
        self.c[k] = v;
    }

    /// Evaluates the truncated polynomial at a concrete `ε`.
    pub fn eval(&self, eps: f64) -> f64 {
        self.coeffs().iter().rev().fold(0.0, |acc, &v| acc * eps + v)
    }

    fn zero_like(order: usize) -> Self {
        Self::constant(0.0, order)
    }

    fn common_order(a: &Jet, b: &Jet) -> usize {
        a.order.min(b.order)
    }

    pub fn scale(mut self, s: f64) -> Self {
        for v in &mut self.c[..=self.order] {
            *v *= s;
        }
        self
    }

    pub fn recip(self) -> Self {
        Jet::constant(1.0, self.order) / self
    }

    pub fn exp(self) -> Self {
        let k_max = self.order;
        let mut e = Self::zero_like(k_max);
        e.c[0] = self.c[0].exp();
        for k in 1..=k_max {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * self.c[j] * e.c[k - j];
            }
            e.c[k] = s / k as f64;
        }
        e
    }

    pub fn ln(self) -> Self {
        let k_max = self.order;
        let a0 = self.c[0];
        let mut l = Self::zero_like(k_max);
        l.c[0] = a0.ln();
        for k in 1..=k_max {
            let mut s = 0.0;
            for j in 1..k {
                s += j as f64 * l.c[j] * self.c[k - j];
            }
            l.c[k] = (self.c[k] - s / k as f64) / a0;
        }
        l
    }

    pub fn sin_cos(self) -> (Self, Self) {
        let k_max = self.order;
        let mut s = Self::zero_like(k_max);
        let mut c = Self::zero_like(k_max);
        s.c[0] = self.c[0].sin();
        c.c[0] = self.c[0].cos();
        for k in 1..=k_max {
            let mut ss = 0.0;
            let mut cc = 0.0;
            for j in 1..=k {
                let w = j as f64 * self.c[j];
                ss += w * c.c[k - j];
                cc -= w * s.c[k - j];
            }
            s.c[k] = ss / k as f64;
            c.c[k] = cc / k as f64;
        }
        (s, c)
    }

    pub fn sin(self) -> Self {
        self.sin_cos().0
    }

    pub fn cos(self) -> Self {
        self.sin_cos().1
    }

    pub fn sqrt(self) -> Self {
        let k_max = self.order;
        let mut r = Self::zero_like(k_max);
        r.c[0] = self.c[0].sqrt();
        for k in 1..=k_max {
            let mut s = 0.0;
            for j in 1..k {
                s += r.c[j] * r.c[k - j];
            }
            r.c[k] = (self.c[k] - s) / (2.0 * r.c[0]);
        }
        r
    }

    pub fn powi(self, n: u32) -> Self {
        let mut acc = Jet::constant(1.0, self.order);
        for _ in 0..n {
            acc *= self;
        }
        acc
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let order = Jet::common_order(&self, &rhs);
        let mut out = Jet::zero_like(order);
        for k in 0..=order {
            out.c[k] = self.c[k] + rhs.c[k];
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        let order = Jet::common_order(&self, &rhs);
        let mut out = Jet::zero_like(order);
        for k in 0..=order {
            out.c[k] = self.c[k] - rhs.c[k];
        }
        out
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let order = Jet::common_order(&self, &rhs);
        let mut out = Jet::zero_like(order);
        for k in 0..=order {
            let mut s = 0.0;
            for j in 0..=k {
                s += self.c[j] * rhs.c[k - j];
            }
            out.c[k] = s;
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        let order = Jet::common_order(&self, &rhs);
        let mut q = Jet::zero_like(order);
        for k in 0..=order {
            let mut s = self.c[k];
            for j in 1..=k {
                s -= rhs.c[j] * q.c[k - j];
            }
            q.c[k] = s / rhs.c[0];
        }
        q
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.c[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self.scale(1.0 / rhs)
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        rhs + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        (-rhs) + self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs.scale(self)
    }
}

impl Div<Jet> for f64 {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        Jet::constant(self, rhs.order) / rhs
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self = *self + rhs;
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        *self = *self - rhs;
    }
}

impl MulAssign for Jet {
    fn mul_assign(&mut self, rhs: Jet) {
        *self = *self * rhs;
    }
}

/// A vector-valued jet: `K+1` coefficient vectors of length `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct JetVector {
    comps: Vec<Jet>,
}

impl JetVector {
    pub fn from_components(comps: Vec<Jet>) -> Self {
        JetVector { comps }
    }

    /// Builds `Σ ε^k coeffs[k]`; coefficients past `coeffs.len()` are zero.
    pub fn from_coeffs(coeffs: &[DVector<f64>], order: usize) -> Self {
        let n = coeffs.first().map_or(0, |c| c.len());
        let comps = (0..n)
            .map(|i| {
                let mut j = Jet::constant(0.0, order);
                for (k, c) in coeffs.iter().enumerate().take(order + 1) {
                    j.set_coeff(k, c[i]);
                }
                j
            })
            .collect();
        JetVector { comps }
    }

    pub fn constant(x: &DVector<f64>, order: usize) -> Self {
        JetVector {
            comps: x.iter().map(|&v| Jet::constant(v, order)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn order(&self) -> usize {
        self.comps.iter().map(Jet::order).min().unwrap_or(0)
    }

    pub fn components(&self) -> &[Jet] {
        &self.comps
    }

    pub fn into_components(self) -> Vec<Jet> {
        self.comps
    }

    /// The `ε^k` coefficient vector.
    pub fn coeff(&self, k: usize) -> DVector<f64> {
        DVector::from_iterator(self.comps.len(), self.comps.iter().map(|j| j.coeff(k)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn product_is_cauchy_convolution() {
        let a = Jet::from_coeffs(&[1.0, 2.0, 3.0], 2);
        let b = Jet::from_coeffs(&[4.0, 5.0, 6.0], 2);
        let p = a * b;
        assert_eq!(p.coeffs(), &[4.0, 13.0, 28.0]);
    }

    #[test]
    fn exp_of_epsilon_is_factorial_series() {
        let e = Jet::epsilon(5).exp();
        let mut fact = 1.0;
        for k in 0..=5 {
            if k > 0 {
                fact *= k as f64;
            }
            assert!(close(e.coeff(k), 1.0 / fact, 1e-15));
        }
    }

    #[test]
    fn sin_cos_and_inverse_functions_agree() {
        let x = Jet::from_coeffs(&[0.3, 1.0, -0.5, 0.25], 3);
        let (s, c) = x.sin_cos();
        let one = s * s + c * c;
        assert!(close(one.coeff(0), 1.0, 1e-15));
        for k in 1..=3 {
            assert!(one.coeff(k).abs() < 1e-14);
        }
        let back = x.exp().ln();
        for k in 0..=3 {
            assert!(close(back.coeff(k), x.coeff(k), 1e-14));
        }
        let r = x.sqrt();
        let sq = r * r;
        for k in 0..=3 {
            assert!(close(sq.coeff(k), x.coeff(k), 1e-14));
        }
        let q = (x / (x + 2.0)) * (x + 2.0);
        for k in 0..=3 {
            assert!(close(q.coeff(k), x.coeff(k), 1e-14));
        }
    }

    #[test]
    fn eval_matches_horner() {
        let a = Jet::from_coeffs(&[1.0, -2.0, 0.5], 2);
        assert!(close(a.eval(0.1), 1.0 - 0.2 + 0.005, 1e-15));
    }
}
