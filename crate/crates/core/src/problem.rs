//! Problem instances: `ε A(t, ε) x' = f(x, t, ε)` on `[0, T]` with
//! `M x(0) + N x(T) = d(ε)`.
//!
//! Both `A` and `f` are evaluated over [`Jet`]s so that ε-Taylor
//! coefficients of compositions come out exactly instead of by finite
//! differences in ε.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::jet::{Jet, JetVector, MAX_ORDER};
use crate::linalg;

/// Which end of `[0, T]` a boundary layer is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// `t = 0`, stretched variable `τ = t/ε ≥ 0`.
    Start,
    /// `t = T`, stretched variable `ξ = (t − T)/ε ≤ 0`.
    End,
}

impl Side {
    pub fn label(self) -> &'static str {
        match self {
            Side::Start => "start",
            Side::End => "end",
        }
    }
}

/// The matrix `A(t, ε)` in front of the derivative.
pub trait EpsSeriesMatrix: Send + Sync {
    fn dim(&self) -> usize;

    /// Highest ε/t jet order the implementation can be differentiated to.
    fn max_order(&self) -> usize {
        MAX_ORDER
    }

    /// `A(t, ε)` with both arguments given as jets in a common expansion
    /// variable. Returns the `n × n` entries in row-major order.
    fn eval_jet(&self, t: &Jet, eps: &Jet) -> Vec<Jet>;
}

/// The right-hand side `f(x, t, ε)`.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;

    fn max_order(&self) -> usize {
        MAX_ORDER
    }

    /// `f` evaluated on jets; every argument shares one expansion variable.
    fn eval_jet(&self, x: &[Jet], t: &Jet, eps: &Jet) -> Vec<Jet>;

    fn eval(&self, x: &DVector<f64>, t: f64, eps: f64) -> DVector<f64> {
        let xj: Vec<Jet> = x.iter().map(|&v| Jet::constant(v, 0)).collect();
        let out = self.eval_jet(&xj, &Jet::constant(t, 0), &Jet::constant(eps, 0));
        DVector::from_iterator(out.len(), out.iter().map(|j| j.value()))
    }

    /// Jacobian `∂f/∂x`, one directional jet per column.
    fn jac(&self, x: &DVector<f64>, t: f64, eps: f64) -> DMatrix<f64> {
        let n = x.len();
        let tj = Jet::constant(t, 1);
        let ej = Jet::constant(eps, 1);
        let mut jac = DMatrix::zeros(n, n);
        let mut xj: Vec<Jet> = x.iter().map(|&v| Jet::constant(v, 1)).collect();
        for col in 0..n {
            xj[col] = Jet::variable(x[col], 1.0, 1);
            let out = self.eval_jet(&xj, &tj, &ej);
            for row in 0..n {
                jac[(row, col)] = out[row].coeff(1);
            }
            xj[col] = Jet::constant(x[col], 1);
        }
        jac
    }
}

/// `M x(0) + N x(T) = d(ε)` with `d(ε) = Σ d_k ε^k`.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    pub m: DMatrix<f64>,
    pub n: DMatrix<f64>,
    /// Taylor coefficients `d_0, d_1, …`; missing orders are zero.
    pub d: Vec<DVector<f64>>,
}

impl BoundaryData {
    pub fn d_coeff(&self, k: usize) -> DVector<f64> {
        match self.d.get(k) {
            Some(v) => v.clone(),
            None => DVector::zeros(self.m.nrows()),
        }
    }

    pub fn d_at(&self, eps: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.m.nrows());
        let mut w = 1.0;
        for dk in &self.d {
            out += dk * w;
            w *= eps;
        }
        out
    }
}

pub type GuessFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// A complete boundary value problem.
#[derive(Clone)]
pub struct BvpProblem {
    pub name: String,
    pub horizon: f64,
    pub a: Arc<dyn EpsSeriesMatrix>,
    pub f: Arc<dyn VectorField>,
    pub bc: BoundaryData,
    /// Starting guess for the root of `f(x, t, 0) = 0`.
    pub reduced_guess: GuessFn,
    /// Radius of the tube around the solution on which `f` is known to be
    /// smooth; informational.
    pub tube_radius: f64,
}

impl core::fmt::Debug for BvpProblem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("BvpProblem")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

impl BvpProblem {
    pub fn new(
        name: impl Into<String>,
        horizon: f64,
        a: Arc<dyn EpsSeriesMatrix>,
        f: Arc<dyn VectorField>,
        bc: BoundaryData,
        reduced_guess: GuessFn,
    ) -> Result<Self> {
        let n = a.dim();
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidInput(alloc::format!("horizon must be positive, got {horizon}")));
        }
        if n < 2 {
            return Err(Error::InvalidInput("dimension must be at least 2".into()));
        }
        if f.dim() != n {
            return Err(Error::InvalidInput("A and f disagree on the dimension".into()));
        }
        let shape_ok = bc.m.shape() == (n, n)
            && bc.n.shape() == (n, n)
            && bc.d.iter().all(|d| d.len() == n);
        if !shape_ok {
            return Err(Error::InvalidInput("boundary matrices must be n×n and d_k of length n".into()));
        }
        Ok(BvpProblem {
            name: name.into(),
            horizon,
            a,
            f,
            bc,
            reduced_guess,
            tube_radius: f64::INFINITY,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    fn check_a_order(&self, k: usize) -> Result<()> {
        let available = self.a.max_order().min(MAX_ORDER);
        if k > available {
            return Err(Error::Capability { what: "A", requested: k, available });
        }
        Ok(())
    }

    fn check_f_order(&self, k: usize) -> Result<()> {
        let available = self.f.max_order().min(MAX_ORDER);
        if k > available {
            return Err(Error::Capability { what: "f", requested: k, available });
        }
        Ok(())
    }

    fn a_jet_coeff(&self, t: &Jet, eps: &Jet, k: usize) -> DMatrix<f64> {
        let n = self.dim();
        let entries = self.a.eval_jet(t, eps);
        DMatrix::from_fn(n, n, |i, j| entries[i * n + j].coeff(k))
    }

    /// `A(t, ε)` at a point.
    pub fn a_at(&self, t: f64, eps: f64) -> DMatrix<f64> {
        self.a_jet_coeff(&Jet::constant(t, 0), &Jet::constant(eps, 0), 0)
    }

    /// `A_k(t)`, the coefficient of `ε^k` in `A(t, ε)`.
    pub fn a_coeff(&self, t: f64, k: usize) -> Result<DMatrix<f64>> {
        self.check_a_order(k)?;
        Ok(self.a_jet_coeff(&Jet::constant(t, k), &Jet::epsilon(k), k))
    }

    /// Coefficient of `ε^k` in `A(ετ, ε)` (start side) or `A(T + εξ, ε)`
    /// (end side); a polynomial of degree `k` in the stretched variable.
    pub fn a_layer_coeff(&self, side: Side, stretched: f64, k: usize) -> Result<DMatrix<f64>> {
        self.check_a_order(k)?;
        let anchor = self.anchor(side);
        let t = Jet::from_coeffs(&[anchor, stretched], k);
        Ok(self.a_jet_coeff(&t, &Jet::epsilon(k), k))
    }

    /// Mixed partial `∂^{j+i} A(t, 0) / ∂t^j ∂ε^i`.
    ///
    /// Coefficient `j+i` of `A(t + εs, ε)` is a polynomial in `s` whose
    /// `s^j` coefficient is the partial divided by `j! i!`; it is recovered by
    /// interpolation at `j+i+1` values of `s`.
    pub fn t_partial(&self, t: f64, j: usize, i: usize) -> Result<DMatrix<f64>> {
        let k = j + i;
        self.check_a_order(k)?;
        let n = self.dim();
        let nodes: Vec<f64> = (0..=k).map(|m| m as f64 - 0.5 * k as f64).collect();
        let vander = DMatrix::from_fn(k + 1, k + 1, |r, c| nodes[r].powi(c as i32));
        let inv = linalg::inverse(&vander).expect("distinct interpolation nodes");
        let samples: Vec<DMatrix<f64>> = nodes
            .iter()
            .map(|&s| self.a_jet_coeff(&Jet::from_coeffs(&[t, s], k), &Jet::epsilon(k), k))
            .collect();
        let mut out = DMatrix::zeros(n, n);
        for (r, sample) in samples.iter().enumerate() {
            out += sample * inv[(j, r)];
        }
        Ok(out * (factorial(j) * factorial(i)))
    }

    pub fn anchor(&self, side: Side) -> f64 {
        match side {
            Side::Start => 0.0,
            Side::End => self.horizon,
        }
    }

    pub fn f_value(&self, x: &DVector<f64>, t: f64, eps: f64) -> DVector<f64> {
        self.f.eval(x, t, eps)
    }

    pub fn f_jac(&self, x: &DVector<f64>, t: f64, eps: f64) -> DMatrix<f64> {
        self.f.jac(x, t, eps)
    }

    /// ε-jet of `f(x(ε), t, ε)` to order `order`, with `x` given as a jet.
    pub fn f_jet(&self, x: &JetVector, t: f64, order: usize) -> Result<JetVector> {
        self.f_jet_general(x, &Jet::constant(t, order), order)
    }

    /// As [`Self::f_jet`] but with `t` itself an ε-jet (layer expansions).
    pub fn f_jet_general(&self, x: &JetVector, t: &Jet, order: usize) -> Result<JetVector> {
        self.check_f_order(order)?;
        if x.order() < order {
            return Err(Error::InvalidInput(alloc::format!(
                "x jet of order {} cannot produce order {order}",
                x.order()
            )));
        }
        let xs: Vec<Jet> = x
            .components()
            .iter()
            .map(|c| Jet::from_coeffs(&c.coeffs()[..=order], order))
            .collect();
        let t = Jet::from_coeffs(&t.coeffs()[..=order.min(t.order())], order);
        Ok(JetVector::from_components(self.f.eval_jet(&xs, &t, &Jet::epsilon(order))))
    }

    /// `∂f/∂ε` at a point, from the order-1 ε-jet.
    pub fn f_eps(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        let xs: Vec<Jet> = x.iter().map(|&v| Jet::constant(v, 1)).collect();
        let out = self.f.eval_jet(&xs, &Jet::constant(t, 1), &Jet::epsilon(1));
        DVector::from_iterator(out.len(), out.iter().map(|j| j.coeff(1)))
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, m| acc * m as f64)
}
