//! The truncated expansion: construction of every term and its evaluation.

use alloc::vec::Vec;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::jet::MAX_ORDER;
use crate::layer::{LayerSolution, LinearLayerSystem};
use crate::matching::{self, LayerConfig, MatchConstants};
use crate::pencil::{self, PencilStructure, StructureReport};
use crate::problem::{BvpProblem, Side};
use crate::regular::{self, SeriesField};

#[derive(Debug, Clone, Copy)]
pub struct ExpansionOptions {
    /// Truncation order `l`.
    pub order: usize,
    /// Chebyshev degree of the regular terms.
    pub degree: usize,
    pub layers: LayerConfig,
    /// Closest approach to the turning point when verifying the structure.
    pub t_floor: f64,
    /// Sample count of the structure verification grid.
    pub check_grid: usize,
    pub tol: f64,
}

impl Default for ExpansionOptions {
    fn default() -> Self {
        ExpansionOptions {
            order: 0,
            degree: regular::DEFAULT_DEGREE,
            layers: LayerConfig::default(),
            t_floor: pencil::DEFAULT_T_FLOOR,
            check_grid: pencil::DEFAULT_GRID,
            tol: 1e-12,
        }
    }
}

/// All terms of an order-`l` expansion.
#[derive(Debug, Clone)]
pub struct ExpansionBundle {
    pub problem: BvpProblem,
    pub order: usize,
    pub report: StructureReport,
    pub structure: PencilStructure,
    pub regular: SeriesField,
    /// `Π_0 x … Π_l x`.
    pub start_layers: Vec<LayerSolution>,
    /// `Q_0 x … Q_l x`.
    pub end_layers: Vec<LayerSolution>,
    pub constants: Vec<MatchConstants>,
}

/// Verifies the structural conditions and constructs every term up to
/// `opts.order`.
pub fn build(problem: &BvpProblem, opts: &ExpansionOptions) -> Result<ExpansionBundle> {
    let available = problem.a.max_order().min(problem.f.max_order()).min(MAX_ORDER);
    if opts.order > available {
        return Err(Error::Capability {
            what: "the problem data",
            requested: opts.order,
            available,
        });
    }
    let reduced = regular::solve_reduced(problem, opts.degree, opts.tol)?;
    let classification = pencil::classify_and_verify(problem, &reduced, opts.t_floor, opts.check_grid)?;
    let report = classification.report.clone();
    let structure = pencil::require_structure(classification)?;
    let series = regular::regular_series(problem, opts.order, opts.degree, opts.tol)?;

    let leading = matching::solve_c0(problem, &structure, &series, &opts.layers)?;
    let mut constants = alloc::vec![leading.constants];
    let mut start_layers = alloc::vec![leading.start];
    let mut end_layers = alloc::vec![leading.end];
    if opts.order > 0 {
        let start_system = LinearLayerSystem::new(problem, &structure, &start_layers[0], opts.layers.tol)?;
        let end_system = LinearLayerSystem::new(problem, &structure, &end_layers[0], opts.layers.tol)?;
        for k in 1..=opts.order {
            let next = matching::solve_ck(problem, k, &series, &start_system, &end_system, &start_layers, &end_layers)?;
            constants.push(next.constants);
            start_layers.push(next.start);
            end_layers.push(next.end);
        }
    }
    Ok(ExpansionBundle {
        problem: problem.clone(),
        order: opts.order,
        report,
        structure,
        regular: series,
        start_layers,
        end_layers,
        constants,
    })
}

/// The three parts of one expansion term at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct TermValues {
    pub regular: DVector<f64>,
    pub start: DVector<f64>,
    pub end: DVector<f64>,
}

impl ExpansionBundle {
    fn stretched(&self, side: Side, t: f64, eps: f64) -> f64 {
        (t - self.problem.anchor(side)) / eps
    }

    /// `x̄_k(t)`, `Π_k x(t/ε)` and `Q_k x((t−T)/ε)`.
    pub fn term(&self, k: usize, t: f64, eps: f64) -> TermValues {
        TermValues {
            regular: self.regular.eval(k, t),
            start: self.start_layers[k].eval(self.stretched(Side::Start, t, eps)),
            end: self.end_layers[k].eval(self.stretched(Side::End, t, eps)),
        }
    }

    /// The truncated expansion at `t`.
    pub fn eval(&self, t: f64, eps: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.problem.dim());
        let mut w = 1.0;
        for k in 0..=self.order {
            let term = self.term(k, t, eps);
            out += (term.regular + term.start + term.end) * w;
            w *= eps;
        }
        out
    }

    /// `d/dt` of the truncated expansion.
    pub fn eval_derivative(&self, t: f64, eps: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.problem.dim());
        let mut w = 1.0;
        for k in 0..=self.order {
            let start = self.start_layers[k].eval_slope(self.stretched(Side::Start, t, eps));
            let end = self.end_layers[k].eval_slope(self.stretched(Side::End, t, eps));
            out += (self.regular.deriv(k, t) + (start + end) / eps) * w;
            w *= eps;
        }
        out
    }
}

/// The truncated expansion of `bundle` at `t`.
pub fn assemble(bundle: &ExpansionBundle, t: f64, eps: f64) -> DVector<f64> {
    bundle.eval(t, eps)
}
