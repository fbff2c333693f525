//! Boundary matching: the layer parameters that make the truncated expansion
//! satisfy `M x(0) + N x(T) = d(ε)` order by order.
//!
//! The unknowns at every order are the end-side anchored parameter (length
//! `p + 1`) followed by the start-side anchored parameter (length `q`).
//! Exponentially small cross terms (a start layer evaluated at `T`, an end
//! layer at `0`) are dropped.

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::layer::{self, Frame, LayerGrid, LayerSolution, LeadingOptions, LinearLayerSystem};
use crate::linalg;
use crate::pencil::PencilStructure;
use crate::problem::{BvpProblem, Side};
use crate::regular::SeriesField;

/// Largest admissible condition number of a matching matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Grid and tolerance choices for the layer solves.
#[derive(Debug, Clone, Copy)]
pub struct LayerConfig {
    pub nodes: usize,
    /// Start window `[0, τ_max]`; derived from the decay rate when `None`.
    pub tau_max: Option<f64>,
    /// End window `[ξ_min, 0]` (`ξ_min < 0`); derived when `None`.
    pub xi_min: Option<f64>,
    pub tol: f64,
}

impl Default for LayerConfig {
    fn default() -> Self {
        LayerConfig {
            nodes: layer::DEFAULT_NODES,
            tau_max: None,
            xi_min: None,
            tol: 1e-12,
        }
    }
}

impl LayerConfig {
    pub fn grid(&self, structure: &PencilStructure, side: Side) -> LayerGrid {
        let (extent, rate) = match side {
            Side::Start => (self.tau_max, structure.start_rate),
            Side::End => (self.xi_min.map(f64::abs), structure.end_rate),
        };
        LayerGrid::graded(extent.unwrap_or_else(|| layer::default_extent(rate)), self.nodes)
    }
}

/// Layer parameters of one order.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchConstants {
    pub order: usize,
    /// Start-side anchored parameter (`q` entries).
    pub start: DVector<f64>,
    /// End-side anchored parameter (`p + 1` entries).
    pub end: DVector<f64>,
    /// `‖M x_k(0) + N x_k(T) − d_k‖∞` at the solution.
    pub residual: f64,
    pub iterations: usize,
}

/// Matched constants together with the layers they produce.
#[derive(Debug, Clone)]
pub struct MatchedOrder {
    pub constants: MatchConstants,
    pub start: LayerSolution,
    pub end: LayerSolution,
}

/// The fixed parts of the order-0 boundary equation.
struct LeadingMatch<'a> {
    problem: &'a BvpProblem,
    start_frame: Frame,
    end_frame: Frame,
    start_grid: LayerGrid,
    end_grid: LayerGrid,
    opts: LeadingOptions,
    /// `M·Q` and `N·U`.
    mq: DMatrix<f64>,
    nu: DMatrix<f64>,
    /// `d₀ − M x̄₀(0) − N x̄₀(T)`.
    base: DVector<f64>,
    matrix: DMatrix<f64>,
}

impl LeadingMatch<'_> {
    fn split(&self, c: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let ne = self.end_frame.anchored.len();
        let ns = self.start_frame.anchored.len();
        (c.rows(ne, ns).into_owned(), c.rows(0, ne).into_owned())
    }

    fn layers(&self, c: &DVector<f64>) -> Result<(LayerSolution, LayerSolution)> {
        let (cs, ce) = self.split(c);
        let start = layer::solve_leading(self.problem, &self.start_frame, &cs, &self.start_grid, &self.opts)?;
        let end = layer::solve_leading(self.problem, &self.end_frame, &ce, &self.end_grid, &self.opts)?;
        Ok((start, end))
    }

    /// Right side `φ(c)`: everything but the anchored layer values.
    fn phi(&self, start: &LayerSolution, end: &LayerSolution) -> DVector<f64> {
        let mut out = self.base.clone();
        let y = &start.normalized[0];
        for i in (0..y.len()).filter(|i| !self.start_frame.anchored.contains(i)) {
            out -= self.mq.column(i) * y[i];
        }
        let r = &end.normalized[0];
        for &i in &self.end_frame.free {
            out -= self.nu.column(i) * r[i];
        }
        out
    }
}

/// Order-0 constants by the fixed-point iteration `c ← D⁻¹φ(c)` from
/// `c = 0`, switching to a damped finite-difference Newton iteration when the
/// fixed point contracts too slowly.
pub fn solve_c0(
    problem: &BvpProblem,
    structure: &PencilStructure,
    regular: &SeriesField,
    config: &LayerConfig,
) -> Result<MatchedOrder> {
    let start_frame = Frame::new(problem, structure, Side::Start);
    let end_frame = Frame::new(problem, structure, Side::End);
    let (m, nm) = (&problem.bc.m, &problem.bc.n);
    let mq = m * &start_frame.basis;
    let nu = nm * &end_frame.basis;
    let n = problem.dim();
    let ne = end_frame.anchored.len();
    let mut matrix = DMatrix::zeros(n, n);
    for (col, &i) in end_frame.anchored.iter().enumerate() {
        matrix.set_column(col, &nu.column(i));
    }
    for (col, &i) in start_frame.anchored.iter().enumerate() {
        matrix.set_column(ne + col, &mq.column(i));
    }
    let cond = linalg::cond2(&matrix);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::MatchingSingular { cond });
    }
    let base = problem.bc.d_coeff(0) - m * regular.eval(0, 0.0) - nm * regular.eval(0, problem.horizon);
    let sys = LeadingMatch {
        problem,
        start_grid: config.grid(structure, Side::Start),
        end_grid: config.grid(structure, Side::End),
        start_frame,
        end_frame,
        opts: LeadingOptions {
            tol: config.tol,
            ..LeadingOptions::default()
        },
        mq,
        nu,
        base,
        matrix,
    };
    let tol = config.tol;
    let max_iterations = 100;
    let mut c = DVector::zeros(n);
    let mut prev_step = f64::INFINITY;
    let mut newton = false;
    for iteration in 1..=max_iterations {
        let (start, end) = sys.layers(&c)?;
        let phi = sys.phi(&start, &end);
        let defect = &sys.matrix * &c - &phi;
        let residual = defect.amax();
        if residual <= tol {
            return Ok(finish(c, &sys, start, end, residual, iteration));
        }
        let step = if newton {
            newton_step(&sys, &c, &defect)?
        } else {
            let next = linalg::solve(&sys.matrix, &phi).ok_or(Error::MatchingSingular { cond })?;
            &next - &c
        };
        let size = step.amax();
        if !size.is_finite() {
            return Err(Error::MatchingDiverged { residual });
        }
        if !newton && iteration >= 2 && size > 0.9 * prev_step {
            newton = true;
        }
        prev_step = size;
        c += step;
    }
    let (start, end) = sys.layers(&c)?;
    let residual = (&sys.matrix * &c - sys.phi(&start, &end)).amax();
    Err(Error::MatchingDiverged { residual })
}

fn finish(
    c: DVector<f64>,
    sys: &LeadingMatch<'_>,
    start: LayerSolution,
    end: LayerSolution,
    residual: f64,
    iterations: usize,
) -> MatchedOrder {
    let (cs, ce) = sys.split(&c);
    MatchedOrder {
        constants: MatchConstants {
            order: 0,
            start: cs,
            end: ce,
            residual,
            iterations,
        },
        start,
        end,
    }
}

/// Damped Newton step for `G(c) = D c − φ(c)` with a forward-difference
/// Jacobian.
fn newton_step(sys: &LeadingMatch<'_>, c: &DVector<f64>, defect: &DVector<f64>) -> Result<DVector<f64>> {
    let n = c.len();
    let mut jac = DMatrix::zeros(n, n);
    for i in 0..n {
        let h = 1e-7 * (1.0 + c[i].abs());
        let mut shifted = c.clone();
        shifted[i] += h;
        let (s, e) = sys.layers(&shifted)?;
        let g = &sys.matrix * &shifted - sys.phi(&s, &e);
        jac.set_column(i, &((g - defect) / h));
    }
    let full = linalg::solve(&jac, &(-defect)).ok_or(Error::MatchingSingular {
        cond: linalg::cond2(&jac),
    })?;
    let base = defect.amax();
    let mut lambda = 1.0;
    for _ in 0..20 {
        let trial = c + &full * lambda;
        if let Ok((s, e)) = sys.layers(&trial) {
            if (&sys.matrix * &trial - sys.phi(&s, &e)).amax() < base {
                return Ok(&full * lambda);
            }
        }
        lambda *= 0.5;
    }
    Err(Error::MatchingDiverged { residual: base })
}

/// Order-`k` constants (`k ≥ 1`): the boundary equation is affine in the
/// parameters, so it is assembled from one particular solve per side plus
/// one homogeneous solve per unknown.
#[allow(clippy::too_many_arguments)]
pub fn solve_ck(
    problem: &BvpProblem,
    k: usize,
    regular: &SeriesField,
    start_system: &LinearLayerSystem,
    end_system: &LinearLayerSystem,
    start_lower: &[LayerSolution],
    end_lower: &[LayerSolution],
) -> Result<MatchedOrder> {
    let n = problem.dim();
    let (m, nm) = (&problem.bc.m, &problem.bc.n);
    let start_forcing = start_system.forcing(
        problem,
        k,
        &layer::LowerOrderData {
            regular,
            layers: start_lower,
        },
    )?;
    let end_forcing = end_system.forcing(
        problem,
        k,
        &layer::LowerOrderData {
            regular,
            layers: end_lower,
        },
    )?;
    let ns = start_system.split_dims().0;
    let ne = end_system.split_dims().0;
    let zero_start = DVector::zeros(ns);
    let zero_end = DVector::zeros(ne);
    let start_part = start_system.solve_normalized(&zero_start, &start_forcing)?.0;
    let end_part = end_system.solve_normalized(&zero_end, &end_forcing)?.0;
    let at_start = |y: &DVector<f64>| &start_system.frame().basis * y;
    let at_end = |y: &DVector<f64>| &end_system.frame().basis * y;

    let unforced_start = alloc::vec![DVector::zeros(n); start_forcing.len()];
    let unforced_end = alloc::vec![DVector::zeros(n); end_forcing.len()];
    let mut matrix = DMatrix::zeros(n, n);
    for i in 0..ne {
        let mut e = zero_end.clone();
        e[i] = 1.0;
        let y = end_system.solve_normalized(&e, &unforced_end)?.0;
        matrix.set_column(i, &(nm * at_end(&y[0])));
    }
    for i in 0..ns {
        let mut e = zero_start.clone();
        e[i] = 1.0;
        let y = start_system.solve_normalized(&e, &unforced_start)?.0;
        matrix.set_column(ne + i, &(m * at_start(&y[0])));
    }
    let cond = linalg::cond2(&matrix);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::HigherMatchSingular { order: k, cond });
    }
    let rhs = problem.bc.d_coeff(k)
        - m * (regular.eval(k, 0.0) + at_start(&start_part[0]))
        - nm * (regular.eval(k, problem.horizon) + at_end(&end_part[0]));
    let c = linalg::solve(&matrix, &rhs).ok_or(Error::HigherMatchSingular { order: k, cond })?;
    let b = c.rows(0, ne).into_owned();
    let a = c.rows(ne, ns).into_owned();
    let start = start_system.solve(k, &a, &start_forcing)?;
    let end = end_system.solve(k, &b, &end_forcing)?;
    let residual = (m * (regular.eval(k, 0.0) + start.at_anchor()) + nm * (regular.eval(k, problem.horizon) + end.at_anchor())
        - problem.bc.d_coeff(k))
    .amax();
    Ok(MatchedOrder {
        constants: MatchConstants {
            order: k,
            start: a,
            end: b,
            residual,
            iterations: 1,
        },
        start,
        end,
    })
}
