//! Empirical error and residual measurements of an expansion.
//!
//! These are measurements at finitely many `ε`; a fitted slope confirms the
//! expected `O(ε^{l+1})` behavior empirically and proves nothing.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::Result;
use crate::expansion::ExpansionBundle;
use crate::linalg;
use crate::reference::{self, ReferenceOptions, ReferenceSolution};

/// Residuals at or below this level are indistinguishable from roundoff.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct StudyOptions {
    pub reference: ReferenceOptions,
    /// Interior residuals are taken on `[δ, T − δ]`.
    pub interior_margin: f64,
    /// Sample count for the interior residual.
    pub interior_samples: usize,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            reference: ReferenceOptions::default(),
            interior_margin: 0.1,
            interior_samples: 201,
        }
    }
}

/// Measurements at one `ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyRow {
    pub epsilon: f64,
    /// Max-abs difference to the reference over its mesh nodes.
    pub max_error: f64,
    pub interior_residual: f64,
    pub boundary_residual: f64,
}

/// A fitted log-log slope, or the note that the measured quantity sits at the
/// roundoff floor for every `ε` (so that no slope is defined).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slope {
    Fitted(f64),
    AtFloor,
}

impl Slope {
    fn of(eps: &[f64], values: &[f64]) -> Slope {
        if values.iter().all(|&v| v <= RESIDUAL_FLOOR) {
            Slope::AtFloor
        } else {
            Slope::Fitted(linalg::loglog_slope(eps, values))
        }
    }

    /// True when the slope is at least `min` or the quantity is at the floor.
    pub fn at_least(self, min: f64) -> bool {
        match self {
            Slope::Fitted(s) => s >= min,
            Slope::AtFloor => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub order: usize,
    pub rows: Vec<StudyRow>,
    pub error_slope: f64,
    pub interior_slope: Slope,
    pub boundary_slope: Slope,
}

impl ConvergenceStudy {
    pub fn from_rows(order: usize, mut rows: Vec<StudyRow>) -> Self {
        rows.sort_by(|a, b| b.epsilon.partial_cmp(&a.epsilon).unwrap_or(core::cmp::Ordering::Equal));
        let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
        let err: Vec<f64> = rows.iter().map(|r| r.max_error).collect();
        let interior: Vec<f64> = rows.iter().map(|r| r.interior_residual).collect();
        let boundary: Vec<f64> = rows.iter().map(|r| r.boundary_residual).collect();
        ConvergenceStudy {
            order,
            error_slope: linalg::loglog_slope(&eps, &err),
            interior_slope: Slope::of(&eps, &interior),
            boundary_slope: Slope::of(&eps, &boundary),
            rows,
        }
    }

    /// Whether the fitted error slope reaches `order + 1 − margin`.
    pub fn confirms(&self, margin: f64) -> bool {
        self.error_slope >= self.order as f64 + 1.0 - margin
    }
}

/// `‖εA x' − f(x)‖∞` over `[δ, T−δ]` and `‖M x(0) + N x(T) − d(ε)‖∞` for
/// the truncated expansion.
pub fn residuals(bundle: &ExpansionBundle, eps: f64, margin: f64, samples: usize) -> (f64, f64) {
    let problem = &bundle.problem;
    let horizon = problem.horizon;
    let (lo, hi) = (margin.min(0.5 * horizon), (horizon - margin).max(0.5 * horizon));
    let count = samples.max(2);
    let mut interior = 0.0f64;
    for i in 0..count {
        let t = lo + (hi - lo) * i as f64 / (count - 1) as f64;
        let x = bundle.eval(t, eps);
        let dx = bundle.eval_derivative(t, eps);
        let r = problem.a_at(t, eps) * dx * eps - problem.f_value(&x, t, eps);
        interior = interior.max(r.amax());
    }
    let bc = &problem.bc;
    let boundary = (&bc.m * bundle.eval(0.0, eps) + &bc.n * bundle.eval(horizon, eps) - bc.d_at(eps)).amax();
    (interior, boundary)
}

/// Reference solution at `eps`, started from the expansion itself.
pub fn reference_for(bundle: &ExpansionBundle, eps: f64, opts: &ReferenceOptions) -> Result<ReferenceSolution> {
    let rates = (bundle.structure.start_rate, bundle.structure.end_rate);
    reference::solve_reference(&bundle.problem, eps, rates, opts, &|t| bundle.eval(t, eps))
}

/// Largest deviation between the expansion and a reference over its nodes.
pub fn max_error(bundle: &ExpansionBundle, reference: &ReferenceSolution) -> f64 {
    reference
        .mesh
        .iter()
        .zip(&reference.values)
        .map(|(&t, x)| (bundle.eval(t, reference.eps) - x).amax())
        .fold(0.0, f64::max)
}

/// All measurements at one `ε`.
pub fn study_row(bundle: &ExpansionBundle, eps: f64, opts: &StudyOptions) -> Result<StudyRow> {
    let reference = reference_for(bundle, eps, &opts.reference)?;
    let (interior_residual, boundary_residual) = residuals(bundle, eps, opts.interior_margin, opts.interior_samples);
    Ok(StudyRow {
        epsilon: eps,
        max_error: max_error(bundle, &reference),
        interior_residual,
        boundary_residual,
    })
}

/// Measurements over several `ε` with fitted slopes.
pub fn convergence_study(bundle: &ExpansionBundle, epsilons: &[f64], opts: &StudyOptions) -> Result<ConvergenceStudy> {
    let rows = epsilons
        .iter()
        .map(|&e| study_row(bundle, e, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceStudy::from_rows(bundle.order, rows))
}

/// The `ε` values of the standard study.
pub const STANDARD_EPSILONS: [f64; 4] = [1e-2, 3e-3, 1e-3, 3e-4];
