//! Stiff reference solver for the full problem at a fixed `ε`.
//!
//! Implicit midpoint (one-stage Gauss collocation) on a piecewise-uniform
//! mesh that is fine in both layers, with Newton's method on the global
//! system. The two-point boundary condition is made banded by carrying a copy
//! of `x(0)` along the mesh. Optional Richardson extrapolation over one mesh
//! bisection raises the order from two to four.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::BandMatrix;
use crate::problem::BvpProblem;

#[derive(Debug, Clone, Copy)]
pub struct ReferenceOptions {
    /// Mesh intervals (a multiple of 4).
    pub intervals: usize,
    /// The layer meshes cover the distance over which a layer decaying at the
    /// given rate falls to `ε^depth`.
    pub depth: f64,
    pub richardson: bool,
    /// Newton stops once the update is below `tol·(1 + ‖x‖∞)`.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        ReferenceOptions {
            intervals: 16_000,
            depth: 4.0,
            richardson: true,
            tol: 1e-13,
            max_iterations: 40,
        }
    }
}

/// Piecewise-uniform mesh: a quarter of the intervals on `[0, w₀]`, half on
/// `[w₀, T − w_T]`, a quarter on `[T − w_T, T]`, with
/// `w = min(T/4, depth·ε·ln(1/ε)/rate)`.
pub fn layer_mesh(horizon: f64, eps: f64, intervals: usize, depth: f64, rates: (f64, f64)) -> Vec<f64> {
    let quarter = (intervals / 4).max(1);
    let width = |rate: f64| (horizon / 4.0).min(depth * eps * (1.0 / eps).ln().max(1.0) / rate);
    let (w0, w1) = (width(rates.0), width(rates.1));
    let mut mesh = Vec::with_capacity(4 * quarter + 1);
    for j in 0..quarter {
        mesh.push(w0 * j as f64 / quarter as f64);
    }
    let middle = 2 * quarter;
    for j in 0..middle {
        mesh.push(w0 + (horizon - w1 - w0) * j as f64 / middle as f64);
    }
    for j in 0..=quarter {
        mesh.push(horizon - w1 + w1 * j as f64 / quarter as f64);
    }
    let last = mesh.len() - 1;
    mesh[last] = horizon;
    mesh
}

#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub eps: f64,
    pub mesh: Vec<f64>,
    pub values: Vec<DVector<f64>>,
    pub newton_iterations: usize,
    /// Final discrete residual (of the finest solve).
    pub residual: f64,
    pub extrapolated: bool,
}

impl ReferenceSolution {
    /// Piecewise-linear interpolation between mesh nodes.
    pub fn eval(&self, t: f64) -> DVector<f64> {
        let n = self.mesh.len();
        let j = match self.mesh.binary_search_by(|v| v.partial_cmp(&t).unwrap_or(core::cmp::Ordering::Less)) {
            Ok(j) => return self.values[j].clone(),
            Err(j) => j.clamp(1, n - 1),
        };
        let (a, b) = (self.mesh[j - 1], self.mesh[j]);
        let s = ((t - a) / (b - a)).clamp(0.0, 1.0);
        &self.values[j - 1] * (1.0 - s) + &self.values[j] * s
    }
}

/// Discrete system on one mesh.
struct Collocation<'a> {
    problem: &'a BvpProblem,
    eps: f64,
    mesh: &'a [f64],
    d: DVector<f64>,
}

impl Collocation<'_> {
    fn unknowns(&self) -> usize {
        2 * self.problem.dim() * self.mesh.len()
    }

    /// Residual; fills the Jacobian when given one.
    fn assemble(&self, v: &[f64], mut jac: Option<&mut BandMatrix>) -> Vec<f64> {
        let n = self.problem.dim();
        let nodes = self.mesh.len();
        let x = |j: usize| DVector::from_column_slice(&v[2 * n * j..2 * n * j + n]);
        let z = |j: usize| DVector::from_column_slice(&v[2 * n * j + n..2 * n * (j + 1)]);
        let mut res = vec![0.0; self.unknowns()];
        // z_0 = x_0
        for i in 0..n {
            res[i] = v[n + i] - v[i];
            if let Some(b) = jac.as_deref_mut() {
                b.add(i, n + i, 1.0);
                b.add(i, i, -1.0);
            }
        }
        for j in 0..nodes - 1 {
            let h = self.mesh[j + 1] - self.mesh[j];
            let tm = 0.5 * (self.mesh[j] + self.mesh[j + 1]);
            let (xj, xk) = (x(j), x(j + 1));
            let mid = (&xj + &xk) * 0.5;
            let a = self.problem.a_at(tm, self.eps) * (self.eps / h);
            let f = self.problem.f_value(&mid, tm, self.eps);
            let eq = &a * (&xk - &xj) - f;
            let row = n + 2 * n * j;
            for i in 0..n {
                res[row + i] = eq[i];
                res[row + n + i] = v[2 * n * (j + 1) + n + i] - v[2 * n * j + n + i];
            }
            if let Some(b) = jac.as_deref_mut() {
                let fx: DMatrix<f64> = self.problem.f_jac(&mid, tm, self.eps) * 0.5;
                let (cj, ck) = (2 * n * j, 2 * n * (j + 1));
                for r in 0..n {
                    for c in 0..n {
                        b.add(row + r, cj + c, -a[(r, c)] - fx[(r, c)]);
                        b.add(row + r, ck + c, a[(r, c)] - fx[(r, c)]);
                    }
                    b.add(row + n + r, ck + n + r, 1.0);
                    b.add(row + n + r, cj + n + r, -1.0);
                }
            }
        }
        // M z_N + N x_N = d
        let last = nodes - 1;
        let row = n + 2 * n * last;
        let bc = &self.problem.bc;
        let eq = &bc.m * z(last) + &bc.n * x(last) - &self.d;
        for i in 0..n {
            res[row + i] = eq[i];
        }
        if let Some(b) = jac {
            let c0 = 2 * n * last;
            for r in 0..n {
                for c in 0..n {
                    b.add(row + r, c0 + n + c, bc.m[(r, c)]);
                    b.add(row + r, c0 + c, bc.n[(r, c)]);
                }
            }
        }
        res
    }
}

fn nodes_of(v: &[f64], n: usize, count: usize) -> Vec<DVector<f64>> {
    (0..count).map(|j| DVector::from_column_slice(&v[2 * n * j..2 * n * j + n])).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Damped Newton on one mesh from an initial guess at the nodes.
fn solve_on_mesh(
    problem: &BvpProblem,
    eps: f64,
    mesh: &[f64],
    guess: &dyn Fn(f64) -> DVector<f64>,
    opts: &ReferenceOptions,
) -> Result<(Vec<DVector<f64>>, usize, f64)> {
    let n = problem.dim();
    let sys = Collocation {
        problem,
        eps,
        mesh,
        d: problem.bc.d_at(eps),
    };
    let size = sys.unknowns();
    let mut v = vec![0.0; size];
    let x0 = guess(mesh[0]);
    for (j, &t) in mesh.iter().enumerate() {
        let g = guess(t);
        v[2 * n * j..2 * n * j + n].copy_from_slice(g.as_slice());
        v[2 * n * j + n..2 * n * (j + 1)].copy_from_slice(x0.as_slice());
    }
    let band = 3 * n - 1;
    let mut res = sys.assemble(&v, None);
    let mut norm = max_abs(&res);
    for iteration in 1..=opts.max_iterations {
        let mut jac = BandMatrix::zeros(size, band, band);
        sys.assemble(&v, Some(&mut jac));
        if !jac.factor() {
            return Err(Error::ReferenceSingular);
        }
        let mut step: Vec<f64> = res.iter().map(|r| -r).collect();
        jac.solve_in_place(&mut step);
        let scale = 1.0 + max_abs(&v);
        let full = max_abs(&step);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let trial: Vec<f64> = v.iter().zip(&step).map(|(a, b)| a + lambda * b).collect();
            let trial_res = sys.assemble(&trial, None);
            let trial_norm = max_abs(&trial_res);
            // near convergence the residual is at roundoff and may not decrease
            if trial_norm < norm || (lambda == 1.0 && norm < 1e-10) {
                v = trial;
                res = trial_res;
                norm = trial_norm;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if (accepted && full <= opts.tol * scale) || (!accepted && norm <= 1e-11 * scale) {
            return Ok((nodes_of(&v, n, mesh.len()), iteration, norm));
        }
        if !accepted {
            return Err(Error::ReferenceStagnation { iterations: iteration, residual: norm });
        }
    }
    Err(Error::ReferenceStagnation {
        iterations: opts.max_iterations,
        residual: norm,
    })
}

/// Solves the full problem at `eps`, starting Newton from `guess`; `rates`
/// are the layer decay rates at `0` and `T`, which size the layer meshes.
pub fn solve_reference(
    problem: &BvpProblem,
    eps: f64,
    rates: (f64, f64),
    opts: &ReferenceOptions,
    guess: &dyn Fn(f64) -> DVector<f64>,
) -> Result<ReferenceSolution> {
    if !(eps > 0.0) || opts.intervals < 4 {
        return Err(Error::InvalidInput("reference solve needs ε > 0 and at least 4 intervals".into()));
    }
    let mesh = layer_mesh(problem.horizon, eps, opts.intervals, opts.depth, rates);
    let (coarse, it_c, res_c) = solve_on_mesh(problem, eps, &mesh, guess, opts)?;
    if !opts.richardson {
        return Ok(ReferenceSolution {
            eps,
            mesh,
            values: coarse,
            newton_iterations: it_c,
            residual: res_c,
            extrapolated: false,
        });
    }
    let mut fine_mesh = Vec::with_capacity(2 * mesh.len() - 1);
    for w in mesh.windows(2) {
        fine_mesh.push(w[0]);
        fine_mesh.push(0.5 * (w[0] + w[1]));
    }
    fine_mesh.push(*mesh.last().expect("non-empty mesh"));
    let coarse_solution = ReferenceSolution {
        eps,
        mesh: mesh.clone(),
        values: coarse.clone(),
        newton_iterations: it_c,
        residual: res_c,
        extrapolated: false,
    };
    let (fine, it_f, res_f) = solve_on_mesh(problem, eps, &fine_mesh, &|t| coarse_solution.eval(t), opts)?;
    let values = coarse
        .iter()
        .enumerate()
        .map(|(j, c)| (&fine[2 * j] * 4.0 - c) / 3.0)
        .collect();
    Ok(ReferenceSolution {
        eps,
        mesh,
        values,
        newton_iterations: it_c + it_f,
        residual: res_f,
        extrapolated: true,
    })
}
