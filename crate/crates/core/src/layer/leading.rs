//! Leading-order layers by successive approximations.
//!
//! With `u = (u_a, u_f)` the differential normalized components,
//! `du/dσ = L u + g(u)` where `L = diag(L_a, L_f)` is the linearization at
//! the anchor. The decaying solution with `u_a(0) = c` is the fixed point of
//!
//! ```text
//! u_a(σ) = e^{L_a σ} c + ∫_0^σ e^{L_a(σ−s)} g_a(s) ds
//! u_f(σ) = −∫_σ^∞ e^{L_f(σ−s)} g_f(s) ds
//! ```
//!
//! evaluated cell by cell (three-point Gauss–Legendre, `g` interpolated by
//! cubic Hermite using its exact σ-derivative). The algebraic component at
//! the turning point is recovered node by node by scalar Newton.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use super::frame::Frame;
use super::{LayerGrid, LayerSolution};
use crate::error::{Error, Result};
use crate::linalg::{self, GAUSS3};
use crate::pencil::PencilStructure;
use crate::problem::{BvpProblem, Side};

#[derive(Debug, Clone, Copy)]
pub struct LeadingOptions {
    /// Sup-norm change between sweeps at which iteration stops.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for LeadingOptions {
    fn default() -> Self {
        LeadingOptions {
            tol: 1e-12,
            max_iterations: 200,
        }
    }
}

/// Per-cell exponentials for the two sweeps.
struct Sweep {
    sigma: Vec<f64>,
    na: usize,
    nf: usize,
    anchored: Vec<(DMatrix<f64>, [DMatrix<f64>; 3])>,
    free: Vec<(DMatrix<f64>, [DMatrix<f64>; 3])>,
}

impl Sweep {
    fn new(frame: &Frame, grid: &LayerGrid) -> Self {
        let sigma = grid.distances().to_vec();
        let mut anchored = Vec::with_capacity(sigma.len() - 1);
        let mut free = Vec::with_capacity(sigma.len() - 1);
        for j in 0..sigma.len() - 1 {
            let (a, b) = (sigma[j], sigma[j + 1]);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            let pts: [f64; 3] = core::array::from_fn(|k| mid + half * GAUSS3[k].0);
            anchored.push((
                linalg::expm(&(&frame.l_anchored * (b - a))),
                core::array::from_fn(|k| linalg::expm(&(&frame.l_anchored * (b - pts[k])))),
            ));
            free.push((
                linalg::expm(&(&frame.l_free * (a - b))),
                core::array::from_fn(|k| linalg::expm(&(&frame.l_free * (a - pts[k])))),
            ));
        }
        Sweep {
            sigma,
            na: frame.anchored.len(),
            nf: frame.free.len(),
            anchored,
            free,
        }
    }

    /// One application of the integral operator; `g`, `dg` are the
    /// nonlinear remainder and its σ-derivative at the nodes (split order).
    fn apply(&self, c: &DVector<f64>, g: &[DVector<f64>], dg: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let n_nodes = self.sigma.len();
        let (na, nf) = (self.na, self.nf);
        let mut ua = vec![DVector::zeros(na); n_nodes];
        let mut uf = vec![DVector::zeros(nf); n_nodes];
        ua[0] = c.clone();
        let forcing = |j: usize, k: usize| -> DVector<f64> {
            let (a, b) = (self.sigma[j], self.sigma[j + 1]);
            let s = 0.5 * (a + b) + 0.5 * (b - a) * GAUSS3[k].0;
            linalg::hermite(a, b, &g[j], &dg[j], &g[j + 1], &dg[j + 1], s).0
        };
        let split = |v: &DVector<f64>, anchored: bool| -> DVector<f64> {
            if anchored {
                v.rows(0, na).into_owned()
            } else {
                v.rows(na, nf).into_owned()
            }
        };
        for j in 0..n_nodes - 1 {
            let half = 0.5 * (self.sigma[j + 1] - self.sigma[j]);
            let (full, parts) = &self.anchored[j];
            let mut next = full * &ua[j];
            if na > 0 {
                for k in 0..3 {
                    next += &parts[k] * split(&forcing(j, k), true) * (half * GAUSS3[k].1);
                }
            }
            ua[j + 1] = next;
        }
        for j in (0..n_nodes - 1).rev() {
            let half = 0.5 * (self.sigma[j + 1] - self.sigma[j]);
            let (full, parts) = &self.free[j];
            let mut next = full * &uf[j + 1];
            if nf > 0 {
                for k in 0..3 {
                    next -= &parts[k] * split(&forcing(j, k), false) * (half * GAUSS3[k].1);
                }
            }
            uf[j] = next;
        }
        (0..n_nodes)
            .map(|j| {
                let mut u = DVector::zeros(na + nf);
                u.rows_mut(0, na).copy_from(&ua[j]);
                u.rows_mut(na, nf).copy_from(&uf[j]);
                u
            })
            .collect()
    }
}

struct NodeEval {
    y: DVector<f64>,
    /// `dy/dσ`.
    dy: DVector<f64>,
    g: DVector<f64>,
    dg: DVector<f64>,
}

/// Solves `[left·f(root + basis·y)]₀ = 0` for `y[0]` with the other
/// components fixed, by scalar Newton from `guess`.
fn solve_algebraic(problem: &BvpProblem, frame: &Frame, y: &mut DVector<f64>, guess: f64, sigma: f64) -> Result<()> {
    let n = frame.dim();
    let mut e0 = DVector::zeros(n);
    e0[0] = 1.0;
    y[0] = guess;
    let (mut f, mut df) = frame.rhs_directional(problem, y, &e0);
    for _ in 0..60 {
        let res = f[0].abs();
        if res <= 1e-15 {
            return Ok(());
        }
        if df[0] == 0.0 || !df[0].is_finite() {
            break;
        }
        let step = f[0] / df[0];
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let mut trial = y.clone();
            trial[0] -= lambda * step;
            let (ft, dft) = frame.rhs_directional(problem, &trial, &e0);
            if ft[0].abs() < res {
                *y = trial;
                f = ft;
                df = dft;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            // no further decrease possible: accept when at roundoff level
            if res <= 1e-12 {
                return Ok(());
            }
            break;
        }
        if (lambda * step).abs() <= 1e-16 * (1.0 + y[0].abs()) {
            return Ok(());
        }
    }
    let res = f[0].abs();
    if res <= 1e-12 {
        Ok(())
    } else {
        Err(Error::AlgebraicLayer { sigma, residual: res })
    }
}

fn evaluate(problem: &BvpProblem, frame: &Frame, split: &[usize], u: &DVector<f64>, guess: f64, sigma: f64) -> Result<NodeEval> {
    let n = frame.dim();
    let o = frame.orientation();
    let mut y = DVector::zeros(n);
    for (i, &c) in split.iter().enumerate() {
        y[c] = u[i];
    }
    if frame.algebraic {
        solve_algebraic(problem, frame, &mut y, guess, sigma)?;
    }
    let f = frame.rhs(problem, &y);
    let mut dy = DVector::zeros(n);
    for &c in split {
        dy[c] = o * f[c];
    }
    let df = if frame.algebraic {
        let (_, d_rest) = frame.rhs_directional(problem, &y, &dy);
        let mut e0 = DVector::zeros(n);
        e0[0] = 1.0;
        let (_, d_alg) = frame.rhs_directional(problem, &y, &e0);
        let slope0 = -d_rest[0] / d_alg[0];
        dy[0] = slope0;
        d_rest + d_alg * slope0
    } else {
        frame.rhs_directional(problem, &y, &dy).1
    };
    let du = DVector::from_iterator(split.len(), split.iter().map(|&c| dy[c]));
    let lu = linear_part(frame, u);
    let ldu = linear_part(frame, &du);
    let mut g = DVector::zeros(split.len());
    let mut dg = DVector::zeros(split.len());
    for (i, &c) in split.iter().enumerate() {
        g[i] = o * f[c] - lu[i];
        dg[i] = o * df[c] - ldu[i];
    }
    Ok(NodeEval { y, dy, g, dg })
}

/// `diag(L_a, L_f)·u` in split order.
fn linear_part(frame: &Frame, u: &DVector<f64>) -> DVector<f64> {
    let na = frame.anchored.len();
    let nf = frame.free.len();
    let mut out = DVector::zeros(na + nf);
    out.rows_mut(0, na).copy_from(&(&frame.l_anchored * u.rows(0, na)));
    out.rows_mut(na, nf).copy_from(&(&frame.l_free * u.rows(na, nf)));
    out
}

/// The algebraic normalized component of the leading start layer, given the
/// remaining `n − 1` normalized components.
pub fn algebraic_first_component(
    problem: &BvpProblem,
    structure: &PencilStructure,
    differential: &DVector<f64>,
    tol: f64,
) -> Result<f64> {
    let frame = Frame::new(problem, structure, Side::Start);
    let n = frame.dim();
    if differential.len() != n - 1 {
        return Err(Error::InvalidInput("expected n − 1 differential components".into()));
    }
    let mut y = DVector::zeros(n);
    y.rows_mut(1, n - 1).copy_from(differential);
    solve_algebraic(problem, &frame, &mut y, 0.0, 0.0)?;
    let residual = frame.rhs(problem, &y)[0].abs();
    if residual > tol.max(1e-12) {
        return Err(Error::AlgebraicLayer { sigma: 0.0, residual });
    }
    Ok(y[0])
}

/// Fixed-point solve of the leading layer on one side.
pub fn solve_leading(
    problem: &BvpProblem,
    frame: &Frame,
    parameter: &DVector<f64>,
    grid: &LayerGrid,
    opts: &LeadingOptions,
) -> Result<LayerSolution> {
    if parameter.len() != frame.anchored.len() {
        return Err(Error::InvalidInput(alloc::format!(
            "layer parameter has length {}, expected {}",
            parameter.len(),
            frame.anchored.len()
        )));
    }
    let split = frame.split();
    let sweep = Sweep::new(frame, grid);
    let sigma = grid.distances();
    let n_nodes = sigma.len();
    let zeros = vec![DVector::zeros(split.len()); n_nodes];
    let mut u = sweep.apply(parameter, &zeros, &zeros);
    let mut alg = vec![0.0; n_nodes];
    let mut prev_diff = f64::INFINITY;
    let mut iterations = 0;
    let mut evals: Vec<NodeEval>;
    loop {
        iterations += 1;
        evals = Vec::with_capacity(n_nodes);
        for j in 0..n_nodes {
            let guess = if j > 0 { alg[j - 1] } else { alg[0] };
            let e = evaluate(problem, frame, &split, &u[j], if alg[j] != 0.0 { alg[j] } else { guess }, sigma[j])?;
            alg[j] = e.y[0];
            evals.push(e);
        }
        let g: Vec<DVector<f64>> = evals.iter().map(|e| e.g.clone()).collect();
        let dg: Vec<DVector<f64>> = evals.iter().map(|e| e.dg.clone()).collect();
        let next = sweep.apply(parameter, &g, &dg);
        let diff = next
            .iter()
            .zip(&u)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).amax()));
        if !diff.is_finite() {
            return Err(Error::Contraction { iterations, ratio: f64::INFINITY });
        }
        u = next;
        if diff <= opts.tol {
            break;
        }
        if iterations >= 2 && diff >= prev_diff && diff > 1e3 * opts.tol {
            return Err(Error::Contraction { iterations, ratio: diff / prev_diff });
        }
        if iterations >= opts.max_iterations {
            return Err(Error::Contraction { iterations, ratio: diff / prev_diff });
        }
        prev_diff = diff;
    }
    // Final node states consistent with the converged u.
    let mut normalized = Vec::with_capacity(n_nodes);
    let mut values = Vec::with_capacity(n_nodes);
    let mut slopes = Vec::with_capacity(n_nodes);
    let o = frame.orientation();
    for j in 0..n_nodes {
        let e = evaluate(problem, frame, &split, &u[j], alg[j], sigma[j])?;
        values.push(frame.to_original(&e.y));
        slopes.push(frame.to_original(&e.dy) * o);
        normalized.push(e.y);
    }
    Ok(LayerSolution::assemble(
        frame.side,
        0,
        grid.clone(),
        values,
        slopes,
        parameter.clone(),
        normalized,
        iterations,
    ))
}

/// Sup-norm change produced by one more application of the integral operator
/// to a converged leading layer.
pub fn fixed_point_residual(problem: &BvpProblem, structure: &PencilStructure, layer: &LayerSolution) -> Result<f64> {
    let frame = Frame::new(problem, structure, layer.side);
    let split = frame.split();
    let sweep = Sweep::new(&frame, &layer.grid);
    let sigma = layer.grid.distances();
    let mut g = Vec::with_capacity(sigma.len());
    let mut dg = Vec::with_capacity(sigma.len());
    let mut u = Vec::with_capacity(sigma.len());
    for (j, y) in layer.normalized.iter().enumerate() {
        let uj = DVector::from_iterator(split.len(), split.iter().map(|&c| y[c]));
        let e = evaluate(problem, &frame, &split, &uj, y[0], sigma[j])?;
        g.push(e.g);
        dg.push(e.dg);
        u.push(uj);
    }
    let next = sweep.apply(&layer.parameter, &g, &dg);
    Ok(next.iter().zip(&u).fold(0.0f64, |m, (a, b)| m.max((a - b).amax())))
}

/// Leading start layer `Π₀x` with anchored value `c02m` (length `q`).
pub fn pi0_solve(
    problem: &BvpProblem,
    structure: &PencilStructure,
    c02m: &DVector<f64>,
    grid: &LayerGrid,
    tol: f64,
) -> Result<LayerSolution> {
    let frame = Frame::new(problem, structure, Side::Start);
    solve_leading(problem, &frame, c02m, grid, &LeadingOptions { tol, ..LeadingOptions::default() })
}

/// Leading end layer `Q₀x = U R₀x` with anchored value `c0p` (length `p + 1`).
pub fn q0_solve(
    problem: &BvpProblem,
    structure: &PencilStructure,
    c0p: &DVector<f64>,
    grid: &LayerGrid,
    tol: f64,
) -> Result<LayerSolution> {
    let frame = Frame::new(problem, structure, Side::End);
    solve_leading(problem, &frame, c0p, grid, &LeadingOptions { tol, ..LeadingOptions::default() })
}
