//! Built-in problems and problem transformations.
//!
//! The two registry entries share one decoupled turning-point system with
//! `n = 3`:
//!
//! ```text
//! A(t, ε) = diag(t/(1+t), 1, 1)
//! f(x, t, ε) = B(t)(x − s(t)) + c·(0, (x₂−s₂)², (x₃−s₃)²)
//! B(t) = diag(1, 1+t, −(1+t)),   s(t) = (1+t², e^{−t}, cos t)
//! ```
//!
//! `ltp1` is the linear case `c = 0`, `ntp1` uses `c = 0.25`.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::linalg;
use crate::problem::{BoundaryData, BvpProblem, EpsSeriesMatrix, VectorField};

/// Registry names, in listing order.
pub const NAMES: [&str; 2] = ["ltp1", "ntp1"];

pub fn list() -> &'static [&'static str] {
    &NAMES
}

/// Looks up a built-in problem by name.
pub fn get(name: &str) -> Result<BvpProblem> {
    match name {
        "ltp1" => Ok(linear_turning(0.5)),
        "ntp1" => Ok(nonlinear_turning(0.5)),
        _ => Err(Error::NotFound {
            name: name.into(),
            available: NAMES.join(", "),
        }),
    }
}

/// Shifted reduced root `s(t)` of the example family, as jets.
fn shift(t: &Jet) -> [Jet; 3] {
    let one = Jet::constant(1.0, t.order());
    [one + *t * *t, (-*t).exp(), t.cos()]
}

/// `s(t)` at a point.
pub fn example_root(t: f64) -> DVector<f64> {
    DVector::from_vec(vec![1.0 + t * t, (-t).exp(), t.cos()])
}

struct TurningMass;

impl EpsSeriesMatrix for TurningMass {
    fn dim(&self) -> usize {
        3
    }

    fn eval_jet(&self, t: &Jet, eps: &Jet) -> Vec<Jet> {
        let order = t.order().min(eps.order());
        let zero = Jet::constant(0.0, order);
        let one = Jet::constant(1.0, order);
        let a = *t / (one + *t);
        vec![a, zero, zero, zero, one, zero, zero, zero, one]
    }
}

struct TurningField {
    nonlinear: f64,
}

impl VectorField for TurningField {
    fn dim(&self) -> usize {
        3
    }

    fn eval_jet(&self, x: &[Jet], t: &Jet, _eps: &Jet) -> Vec<Jet> {
        let s = shift(t);
        let one = Jet::constant(1.0, t.order());
        let b = [one, one + *t, -(one + *t)];
        let mut out: Vec<Jet> = (0..3).map(|i| b[i] * (x[i] - s[i])).collect();
        if self.nonlinear != 0.0 {
            for i in 1..3 {
                let dev = x[i] - s[i];
                out[i] += (dev * dev).scale(self.nonlinear);
            }
        }
        out
    }
}

fn turning_problem(name: &str, horizon: f64, nonlinear: f64) -> BvpProblem {
    let mut m = DMatrix::zeros(3, 3);
    m[(2, 2)] = 1.0;
    let mut n = DMatrix::zeros(3, 3);
    n[(0, 0)] = 1.0;
    n[(1, 1)] = 1.0;
    let s0 = example_root(0.0);
    let s_end = example_root(horizon);
    let d0 = DVector::from_vec(vec![s_end[0] + 0.1, s_end[1] + 0.1, s0[2] + 0.1]);
    let bc = BoundaryData { m, n, d: vec![d0] };
    let mut problem = BvpProblem::new(
        name,
        horizon,
        Arc::new(TurningMass),
        Arc::new(TurningField { nonlinear }),
        bc,
        Arc::new(example_root),
    )
    .expect("built-in problem is well formed");
    // The quadratic terms stay well inside their monotone range within this
    // distance of s(t).
    problem.tube_radius = if nonlinear == 0.0 { f64::INFINITY } else { 1.0 };
    problem
}

/// The linear example on `[0, horizon]` (`ltp1` uses `horizon = 1/2`).
pub fn linear_turning(horizon: f64) -> BvpProblem {
    turning_problem("ltp1", horizon, 0.0)
}

/// The nonlinear example on `[0, horizon]` (`ntp1` uses `horizon = 1/2`).
pub fn nonlinear_turning(horizon: f64) -> BvpProblem {
    turning_problem("ntp1", horizon, 0.25)
}

/// Replaces the boundary right-hand side series.
pub fn with_boundary_series(mut problem: BvpProblem, d: Vec<DVector<f64>>) -> BvpProblem {
    problem.bc.d = d;
    problem
}

/// Boundary data `d₀ = M x̄₀(0) + N x̄₀(T)` for which the leading-order layers
/// vanish, built from the supplied reduced root.
pub fn compatible_data(problem: &BvpProblem, root: impl Fn(f64) -> DVector<f64>) -> DVector<f64> {
    &problem.bc.m * root(0.0) + &problem.bc.n * root(problem.horizon)
}

struct ConjugatedMass {
    inner: Arc<dyn EpsSeriesMatrix>,
    left: DMatrix<f64>,
    right: DMatrix<f64>,
}

fn jet_matmul(a: &[Jet], b: &DMatrix<f64>, n: usize, order: usize) -> Vec<Jet> {
    let mut out = vec![Jet::constant(0.0, order); n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = Jet::constant(0.0, order);
            for k in 0..n {
                acc += a[i * n + k] * b[(k, j)];
            }
            out[i * n + j] = acc;
        }
    }
    out
}

fn matmul_jet(a: &DMatrix<f64>, b: &[Jet], n: usize, order: usize) -> Vec<Jet> {
    let mut out = vec![Jet::constant(0.0, order); n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = Jet::constant(0.0, order);
            for k in 0..n {
                acc += b[k * n + j] * a[(i, k)];
            }
            out[i * n + j] = acc;
        }
    }
    out
}

impl EpsSeriesMatrix for ConjugatedMass {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn max_order(&self) -> usize {
        self.inner.max_order()
    }

    fn eval_jet(&self, t: &Jet, eps: &Jet) -> Vec<Jet> {
        let n = self.dim();
        let order = t.order().min(eps.order());
        let inner = self.inner.eval_jet(t, eps);
        let ar = jet_matmul(&inner, &self.right, n, order);
        matmul_jet(&self.left, &ar, n, order)
    }
}

struct ConjugatedField {
    inner: Arc<dyn VectorField>,
    left: DMatrix<f64>,
    right: DMatrix<f64>,
}

impl VectorField for ConjugatedField {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn max_order(&self) -> usize {
        self.inner.max_order()
    }

    fn eval_jet(&self, u: &[Jet], t: &Jet, eps: &Jet) -> Vec<Jet> {
        let n = self.dim();
        let order = u.iter().fold(t.order().min(eps.order()), |o, c| o.min(c.order()));
        let x: Vec<Jet> = (0..n)
            .map(|i| {
                let mut acc = Jet::constant(0.0, order);
                for k in 0..n {
                    acc += u[k] * self.right[(i, k)];
                }
                acc
            })
            .collect();
        let fx = self.inner.eval_jet(&x, t, eps);
        (0..n)
            .map(|i| {
                let mut acc = Jet::constant(0.0, order);
                for k in 0..n {
                    acc += fx[k] * self.left[(i, k)];
                }
                acc
            })
            .collect()
    }
}

/// The same problem after the change of variables `x = right·u` with the
/// equations multiplied by `left`:
/// `ε (left·A·right) u' = left·f(right·u)`, `M·right u(0) + N·right u(T) = d`.
///
/// Solutions map back through `x = right·u`. Useful for exercising the
/// normalizations on non-diagonal data.
pub fn conjugate(problem: &BvpProblem, left: &DMatrix<f64>, right: &DMatrix<f64>) -> Result<BvpProblem> {
    let n = problem.dim();
    if left.shape() != (n, n) || right.shape() != (n, n) {
        return Err(Error::InvalidInput("conjugating matrices must be n×n".into()));
    }
    let right_inv = linalg::inverse(right)
        .ok_or_else(|| Error::InvalidInput("right conjugating matrix is singular".into()))?;
    if linalg::inverse(left).is_none() {
        return Err(Error::InvalidInput("left conjugating matrix is singular".into()));
    }
    let bc = BoundaryData {
        m: &problem.bc.m * right,
        n: &problem.bc.n * right,
        d: problem.bc.d.clone(),
    };
    let guess = problem.reduced_guess.clone();
    let guess: Box<dyn Fn(f64) -> DVector<f64> + Send + Sync> = Box::new(move |t| &right_inv * guess(t));
    let mut out = BvpProblem::new(
        String::from(problem.name.as_str()) + "-conjugated",
        problem.horizon,
        Arc::new(ConjugatedMass {
            inner: problem.a.clone(),
            left: left.clone(),
            right: right.clone(),
        }),
        Arc::new(ConjugatedField {
            inner: problem.f.clone(),
            left: left.clone(),
            right: right.clone(),
        }),
        bc,
        Arc::from(guess),
    )?;
    out.tube_radius = problem.tube_radius;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::JetVector;
    use crate::problem::Side;

    #[test]
    fn mass_matrix_values() {
        let p = get("ltp1").unwrap();
        let a0 = p.a_coeff(0.0, 0).unwrap();
        assert_eq!(a0, DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 1.0])));
        let a_half = p.a_coeff(0.5, 0).unwrap();
        assert!((a_half[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.a_coeff(0.3, 1).unwrap(), DMatrix::zeros(3, 3));
    }

    #[test]
    fn layer_coefficient_of_mass_matrix() {
        let p = get("ltp1").unwrap();
        let l1 = p.a_layer_coeff(Side::Start, 2.0, 1).unwrap();
        assert!((l1[(0, 0)] - 2.0).abs() < 1e-15);
        assert!(l1[(1, 1)].abs() < 1e-15);
        assert_eq!(p.a_layer_coeff(Side::Start, 0.0, 1).unwrap(), DMatrix::zeros(3, 3));
        assert_eq!(p.a_layer_coeff(Side::Start, 3.0, 0).unwrap(), p.a_coeff(0.0, 0).unwrap());
    }

    #[test]
    fn t_partial_matches_derivatives_of_t_over_one_plus_t() {
        let p = get("ltp1").unwrap();
        let t: f64 = 0.2;
        // d^j/dt^j t/(1+t) = (-1)^{j+1} j! / (1+t)^{j+1} for j >= 1
        for j in 1..=4usize {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            let exact = sign * crate::problem::factorial(j) / (1.0 + t).powi(j as i32 + 1);
            let got = p.t_partial(t, j, 0).unwrap()[(0, 0)];
            assert!((got - exact).abs() < 1e-9 * exact.abs().max(1.0), "j={j}: {got} vs {exact}");
        }
        assert_eq!(p.t_partial(t, 1, 1).unwrap()[(0, 0)].abs() < 1e-12, true);
    }

    #[test]
    fn f_jet_of_linear_problem() {
        let p = get("ltp1").unwrap();
        let t = 0.3;
        let x0 = DVector::from_vec(vec![0.4, -0.2, 1.5]);
        let x1 = DVector::from_vec(vec![1.0, 2.0, -3.0]);
        let jet = p.f_jet(&JetVector::from_coeffs(&[x0.clone(), x1.clone()], 1), t, 1).unwrap();
        let b = DVector::from_vec(vec![1.0, 1.0 + t, -(1.0 + t)]);
        let c0 = b.component_mul(&(&x0 - example_root(t)));
        let c1 = b.component_mul(&x1);
        assert!((jet.coeff(0) - c0).norm() < 1e-14);
        assert!((jet.coeff(1) - c1).norm() < 1e-14);
    }

    #[test]
    fn unknown_name_lists_alternatives() {
        match get("nosuch") {
            Err(Error::NotFound { available, .. }) => assert!(available.contains("ntp1")),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(list(), &["ltp1", "ntp1"]);
    }
}
