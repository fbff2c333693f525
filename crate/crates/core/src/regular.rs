//! The regular part `x̄(t, ε) = Σ ε^k x̄_k(t)` of the expansion.
//!
//! Terms are sampled at Chebyshev–Lobatto points on `[0, T]`, interpolated
//! barycentrically and differentiated with the matching spectral
//! differentiation matrix.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::jet::JetVector;
use crate::linalg;
use crate::problem::BvpProblem;

pub const DEFAULT_DEGREE: usize = 32;

/// Samples of `x̄_0, …, x̄_K` on a Chebyshev grid.
#[derive(Debug, Clone)]
pub struct SeriesField {
    horizon: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    diff: DMatrix<f64>,
    values: Vec<Vec<DVector<f64>>>,
    derivs: Vec<Vec<DVector<f64>>>,
}

impl SeriesField {
    /// Empty field on the degree-`degree` Chebyshev–Lobatto grid of `[0, T]`.
    pub fn new(horizon: f64, degree: usize) -> Self {
        let m = degree.max(2);
        let nodes: Vec<f64> = (0..=m)
            .map(|j| {
                let c = (j as f64 * core::f64::consts::PI / m as f64).cos();
                0.5 * horizon * (1.0 - c)
            })
            .collect();
        let weights: Vec<f64> = (0..=m)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == m {
                    0.5 * sign
                } else {
                    sign
                }
            })
            .collect();
        let mut diff = DMatrix::zeros(m + 1, m + 1);
        for i in 0..=m {
            let mut diag = 0.0;
            for j in 0..=m {
                if i != j {
                    let v = weights[j] / weights[i] / (nodes[i] - nodes[j]);
                    diff[(i, j)] = v;
                    diag -= v;
                }
            }
            diff[(i, i)] = diag;
        }
        SeriesField {
            horizon,
            nodes,
            weights,
            diff,
            values: Vec::new(),
            derivs: Vec::new(),
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn degree(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of filled orders (`K + 1`).
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn samples(&self, k: usize) -> &[DVector<f64>] {
        &self.values[k]
    }

    fn differentiate(&self, samples: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let m = samples.len();
        (0..m)
            .map(|i| {
                let mut acc = DVector::zeros(samples[0].len());
                for (j, s) in samples.iter().enumerate() {
                    let w = self.diff[(i, j)];
                    if w != 0.0 {
                        acc += s * w;
                    }
                }
                acc
            })
            .collect()
    }

    /// Appends the next order from its grid samples.
    pub fn push(&mut self, samples: Vec<DVector<f64>>) {
        assert_eq!(samples.len(), self.nodes.len());
        let d = self.differentiate(&samples);
        self.values.push(samples);
        self.derivs.push(d);
    }

    fn interpolate(&self, samples: &[DVector<f64>], t: f64) -> DVector<f64> {
        let mut num = DVector::zeros(samples[0].len());
        let mut den = 0.0;
        for (j, &tj) in self.nodes.iter().enumerate() {
            let dt = t - tj;
            if dt == 0.0 {
                return samples[j].clone();
            }
            let c = self.weights[j] / dt;
            num += &samples[j] * c;
            den += c;
        }
        num / den
    }

    /// `x̄_k(t)`.
    pub fn eval(&self, k: usize, t: f64) -> DVector<f64> {
        self.interpolate(&self.values[k], t)
    }

    /// `x̄_k'(t)`.
    pub fn deriv(&self, k: usize, t: f64) -> DVector<f64> {
        self.interpolate(&self.derivs[k], t)
    }

    /// `m`-th derivative of `x̄_k` at `t` (repeated spectral differentiation).
    pub fn derivative(&self, k: usize, m: usize, t: f64) -> DVector<f64> {
        match m {
            0 => self.eval(k, t),
            1 => self.deriv(k, t),
            _ => {
                let mut s = self.derivs[k].clone();
                for _ in 1..m {
                    s = self.differentiate(&s);
                }
                self.interpolate(&s, t)
            }
        }
    }

    /// `Σ_{k ≤ order} ε^k x̄_k(t)`.
    pub fn sum(&self, order: usize, t: f64, eps: f64) -> DVector<f64> {
        let mut out = self.eval(0, t);
        let mut w = 1.0;
        for k in 1..=order.min(self.len() - 1) {
            w *= eps;
            out += self.eval(k, t) * w;
        }
        out
    }

    /// Derivative in `t` of [`Self::sum`].
    pub fn sum_deriv(&self, order: usize, t: f64, eps: f64) -> DVector<f64> {
        let mut out = self.deriv(0, t);
        let mut w = 1.0;
        for k in 1..=order.min(self.len() - 1) {
            w *= eps;
            out += self.deriv(k, t) * w;
        }
        out
    }
}

/// Newton settings for the reduced equation.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-12,
            max_iterations: 50,
            max_halvings: 30,
        }
    }
}

/// Damped Newton for `f(x, t, 0) = 0` at a single `t`.
pub(crate) fn reduced_newton(
    problem: &BvpProblem,
    t: f64,
    mut x: DVector<f64>,
    opts: &NewtonOptions,
) -> Result<DVector<f64>> {
    let mut fx = problem.f_value(&x, t, 0.0);
    let mut res = linalg::inf_norm(&fx);
    for _ in 0..opts.max_iterations {
        if res <= opts.tol {
            return Ok(x);
        }
        let jac = problem.f_jac(&x, t, 0.0);
        let step = match jac.clone().lu().solve(&fx) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => return Err(Error::Isolation { t }),
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial = &x - &step * lambda;
            let f_trial = problem.f_value(&trial, t, 0.0);
            let r_trial = linalg::inf_norm(&f_trial);
            if r_trial < res || r_trial <= opts.tol {
                x = trial;
                fx = f_trial;
                res = r_trial;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res <= opts.tol {
        Ok(x)
    } else {
        Err(Error::ReducedSolve { t, residual: res })
    }
}

/// Solves `f(x̄_0(t), t, 0) = 0` on the grid by continuation from `t = 0`.
pub fn solve_reduced(problem: &BvpProblem, degree: usize, tol: f64) -> Result<SeriesField> {
    let mut field = SeriesField::new(problem.horizon, degree);
    let opts = NewtonOptions { tol, ..NewtonOptions::default() };
    let mut samples = Vec::with_capacity(field.nodes.len());
    let mut guess = (problem.reduced_guess)(0.0);
    if guess.len() != problem.dim() {
        return Err(Error::InvalidInput("reduced guess has the wrong dimension".into()));
    }
    for &t in field.nodes.clone().iter() {
        let x = reduced_newton(problem, t, guess, &opts)?;
        guess = x.clone();
        samples.push(x);
    }
    field.push(samples);
    Ok(field)
}

/// `ḡ_k(t)`: coefficient `k` of `f(Σ_{i<k} ε^i x̄_i(t), t, ε)`.
pub fn extract_gbar(problem: &BvpProblem, series: &SeriesField, k: usize, t: f64) -> Result<DVector<f64>> {
    if series.len() < k {
        return Err(Error::InvalidInput("series not filled to the required order".into()));
    }
    let mut coeffs: Vec<DVector<f64>> = (0..k).map(|i| series.eval(i, t)).collect();
    coeffs.push(DVector::zeros(problem.dim()));
    let jet = problem.f_jet(&JetVector::from_coeffs(&coeffs, k), t, k)?;
    Ok(jet.coeff(k))
}

fn gbar_at_node(problem: &BvpProblem, series: &SeriesField, k: usize, j: usize) -> Result<DVector<f64>> {
    let t = series.nodes[j];
    let mut coeffs: Vec<DVector<f64>> = (0..k).map(|i| series.values[i][j].clone()).collect();
    coeffs.push(DVector::zeros(problem.dim()));
    let jet = problem.f_jet(&JetVector::from_coeffs(&coeffs, k), t, k)?;
    Ok(jet.coeff(k))
}

/// Fills order `k`: `x̄_k = (f_x')^{-1} (Σ_{i<k} A_i x̄'_{k-1-i} − ḡ_k)`.
pub fn regular_term(problem: &BvpProblem, series: &mut SeriesField, k: usize) -> Result<()> {
    if k == 0 || series.len() != k {
        return Err(Error::InvalidInput(alloc::format!(
            "order {k} needs exactly orders 0..{k} filled, have {}",
            series.len()
        )));
    }
    let m = series.nodes.len();
    let mut samples = Vec::with_capacity(m);
    for j in 0..m {
        let t = series.nodes[j];
        let jac = problem.f_jac(&series.values[0][j], t, 0.0);
        let cond = linalg::cond2(&jac);
        if !(cond <= 1e12) {
            return Err(Error::IllConditioned { what: "reduced Jacobian", t, cond });
        }
        let mut rhs = -gbar_at_node(problem, series, k, j)?;
        for i in 0..k {
            rhs += problem.a_coeff(t, i)? * &series.derivs[k - 1 - i][j];
        }
        let x = linalg::solve(&jac, &rhs).ok_or(Error::Isolation { t })?;
        samples.push(x);
    }
    series.push(samples);
    Ok(())
}

/// Reduced solution plus regular terms through `order`.
pub fn regular_series(problem: &BvpProblem, order: usize, degree: usize, tol: f64) -> Result<SeriesField> {
    let mut field = solve_reduced(problem, degree, tol)?;
    for k in 1..=order {
        regular_term(problem, &mut field, k)?;
    }
    Ok(field)
}

/// Max-norm residual of `εA x̄' − f(x̄, t, ε)` over `probe` equispaced points
/// of `[lo, hi]` for the truncated series.
pub fn series_residual(
    problem: &BvpProblem,
    series: &SeriesField,
    order: usize,
    eps: f64,
    lo: f64,
    hi: f64,
    probe: usize,
) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..probe {
        let t = lo + (hi - lo) * i as f64 / (probe - 1).max(1) as f64;
        let x = series.sum(order, t, eps);
        let dx = series.sum_deriv(order, t, eps);
        let r = problem.a_at(t, eps) * dx * eps - problem.f_value(&x, t, eps);
        worst = worst.max(linalg::inf_norm(&r));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems;

    #[test]
    fn interpolation_reproduces_nodes_and_smooth_functions() {
        let mut field = SeriesField::new(0.5, 24);
        let samples: Vec<_> = field
            .nodes()
            .iter()
            .map(|&t| problems::example_root(t))
            .collect();
        field.push(samples);
        let t5 = field.nodes()[5];
        assert_eq!(field.eval(0, t5), problems::example_root(t5));
        let mut worst: f64 = 0.0;
        for i in 0..1000 {
            let t = 0.5 * i as f64 / 999.0;
            worst = worst.max((field.eval(0, t) - problems::example_root(t)).amax());
        }
        assert!(worst <= 1e-10, "{worst}");
        let d = field.deriv(0, 0.2);
        assert!((d[1] + (-0.2f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn reduced_root_of_examples() {
        for name in problems::list() {
            let p = problems::get(name).unwrap();
            let field = solve_reduced(&p, DEFAULT_DEGREE, 1e-12).unwrap();
            for (j, &t) in field.nodes().iter().enumerate() {
                assert!((field.samples(0)[j].clone() - problems::example_root(t)).amax() <= 1e-12);
            }
        }
    }
}
