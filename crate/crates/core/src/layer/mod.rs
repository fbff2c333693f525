//! Boundary-layer terms `Π_k x(τ)` (at `t = 0`, `τ = t/ε`) and `Q_k x(ξ)`
//! (at `t = T`, `ξ = (t − T)/ε`).
//!
//! Both sides are handled in the distance `σ = |stretched time| ≥ 0` from
//! their anchor. In normalized coordinates each layer system splits into
//! *anchored* directions (decaying away from the anchor, value prescribed
//! there) and *free* directions (growing away from the anchor, fixed by the
//! decay condition at infinity). The leading order is nonlinear and solved by
//! successive approximations; higher orders are linear and solved by a
//! decoupled stable-direction sweep.

mod frame;
mod leading;
mod linear;
pub(crate) mod ode;

use alloc::vec::Vec;

use nalgebra::DVector;
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg;
use crate::problem::Side;

pub use frame::Frame;
pub use leading::{algebraic_first_component, fixed_point_residual, pi0_solve, q0_solve, solve_leading, LeadingOptions};
pub use linear::{pik_solve, propagator, qk_solve, Block, LinearLayerSystem, LowerOrderData, Propagator};

/// Default node count of a layer grid.
pub const DEFAULT_NODES: usize = 400;
/// Grading exponent: spacing grows like `e^{γ j/N}` away from the anchor.
const GRADING: f64 = 4.0;

/// Graded nodes `0 = σ_0 < σ_1 < … < σ_N = extent`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrid {
    sigma: Vec<f64>,
}

impl LayerGrid {
    pub fn graded(extent: f64, nodes: usize) -> Self {
        let n = nodes.max(8) - 1;
        let denom = GRADING.exp() - 1.0;
        let mut sigma: Vec<f64> = (0..=n)
            .map(|j| extent * ((GRADING * j as f64 / n as f64).exp() - 1.0) / denom)
            .collect();
        sigma[0] = 0.0;
        sigma[n] = extent;
        LayerGrid { sigma }
    }

    /// Extent `max(40/rate, 40)`, enough for `e^{−rate·σ}` to fall below
    /// every tolerance in use.
    pub fn for_rate(rate: f64, nodes: usize) -> Self {
        Self::graded(default_extent(rate), nodes)
    }

    /// Same nodes on the current window, continued with the last spacing out
    /// to `factor` times the extent.
    pub fn extended(&self, factor: f64) -> Self {
        let mut sigma = self.sigma.clone();
        let n = sigma.len();
        let h = sigma[n - 1] - sigma[n - 2];
        let target = self.extent() * factor;
        let mut s = sigma[n - 1];
        while s + 0.5 * h < target {
            s += h;
            sigma.push(s.min(target));
        }
        let last = sigma.len() - 1;
        sigma[last] = target;
        LayerGrid { sigma }
    }

    pub fn extent(&self) -> f64 {
        *self.sigma.last().expect("non-empty grid")
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// Distances from the anchor.
    pub fn distances(&self) -> &[f64] {
        &self.sigma
    }

    /// Node positions in the stretched variable of `side` (`τ ≥ 0` or `ξ ≤ 0`).
    pub fn stretched(&self, side: Side) -> Vec<f64> {
        self.sigma.iter().map(|&s| to_stretched(side, s)).collect()
    }

    /// Index `j` with `σ_j ≤ s ≤ σ_{j+1}`.
    pub(crate) fn cell(&self, s: f64) -> usize {
        let n = self.sigma.len();
        match self.sigma.binary_search_by(|v| v.partial_cmp(&s).unwrap_or(core::cmp::Ordering::Less)) {
            Ok(j) => j.min(n - 2),
            Err(j) => j.saturating_sub(1).min(n - 2),
        }
    }
}

pub fn default_extent(rate: f64) -> f64 {
    (40.0 / rate).max(40.0)
}

pub(crate) fn to_stretched(side: Side, sigma: f64) -> f64 {
    match side {
        Side::Start => sigma,
        Side::End => -sigma,
    }
}

/// `d(stretched)/dσ`.
pub(crate) fn orientation(side: Side) -> f64 {
    match side {
        Side::Start => 1.0,
        Side::End => -1.0,
    }
}

/// Measured exponential envelope `‖v(σ)‖ ≤ κ e^{−rate·σ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayEstimate {
    pub kappa: f64,
    pub rate: f64,
    /// Node index range `[first, last]` used for the fit.
    pub window: (usize, usize),
}

/// One boundary-layer term in original coordinates.
#[derive(Debug, Clone)]
pub struct LayerSolution {
    pub side: Side,
    pub order: usize,
    pub grid: LayerGrid,
    /// Values at the grid nodes.
    pub values: Vec<DVector<f64>>,
    /// Derivatives with respect to the stretched variable (`τ` or `ξ`).
    pub slopes: Vec<DVector<f64>>,
    /// Anchored parameter (`c₀₂₋`/`a_{k−}` at the start, `c₀₊`/`b_{k+}` at the end).
    pub parameter: DVector<f64>,
    /// `None` for an identically zero layer.
    pub decay: Option<DecayEstimate>,
    /// Normalized coordinates at the nodes (`y` at the start, `R` at the end).
    pub normalized: Vec<DVector<f64>>,
    /// Successive-approximation sweeps used (zero for linear solves).
    pub iterations: usize,
}

impl LayerSolution {
    pub(crate) fn assemble(
        side: Side,
        order: usize,
        grid: LayerGrid,
        values: Vec<DVector<f64>>,
        slopes: Vec<DVector<f64>>,
        parameter: DVector<f64>,
        normalized: Vec<DVector<f64>>,
        iterations: usize,
    ) -> Self {
        let mut out = LayerSolution {
            side,
            order,
            grid,
            values,
            slopes,
            parameter,
            decay: None,
            normalized,
            iterations,
        };
        out.decay = decay_fit(&out);
        out
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    /// Value at the anchor.
    pub fn at_anchor(&self) -> &DVector<f64> {
        &self.values[0]
    }

    fn locate(&self, stretched: f64) -> Option<(usize, f64)> {
        let sigma = match self.side {
            Side::Start => stretched,
            Side::End => -stretched,
        };
        if sigma < 0.0 {
            // wrong side of the anchor: only roundoff-sized excursions are accepted
            if sigma < -1e-12 {
                return None;
            }
            return Some((0, 0.0));
        }
        if sigma > self.grid.extent() {
            return None;
        }
        Some((self.grid.cell(sigma), sigma))
    }

    /// Value at a stretched time; zero beyond the truncation.
    pub fn eval(&self, stretched: f64) -> DVector<f64> {
        match self.locate(stretched) {
            None => DVector::zeros(self.dim()),
            Some((j, sigma)) => {
                let s = &self.grid.sigma;
                let o = orientation(self.side);
                let (v, _) = linalg::hermite(
                    s[j],
                    s[j + 1],
                    &self.values[j],
                    &(&self.slopes[j] * o),
                    &self.values[j + 1],
                    &(&self.slopes[j + 1] * o),
                    sigma,
                );
                v
            }
        }
    }

    /// Derivative with respect to the stretched time; zero beyond the
    /// truncation.
    pub fn eval_slope(&self, stretched: f64) -> DVector<f64> {
        match self.locate(stretched) {
            None => DVector::zeros(self.dim()),
            Some((j, sigma)) => {
                let s = &self.grid.sigma;
                let o = orientation(self.side);
                let (_, d) = linalg::hermite(
                    s[j],
                    s[j + 1],
                    &self.values[j],
                    &(&self.slopes[j] * o),
                    &self.values[j + 1],
                    &(&self.slopes[j + 1] * o),
                    sigma,
                );
                d * o
            }
        }
    }

    /// Largest absolute entry over all nodes.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.amax()))
    }
}

/// Least-squares fit of `ln‖v‖` against `σ` over the nodes where the norm
/// lies in `[1e−10, 0.1]` times its maximum; `None` for a zero layer.
pub fn decay_fit(layer: &LayerSolution) -> Option<DecayEstimate> {
    let norms: Vec<f64> = layer.values.iter().map(|v| v.norm()).collect();
    let peak = norms.iter().fold(0.0f64, |m, &v| m.max(v));
    if !(peak > 0.0) {
        return None;
    }
    let peak_at = norms.iter().position(|&v| v == peak).unwrap_or(0);
    let sigma = layer.grid.distances();
    let in_window = |v: f64| v >= 1e-10 * peak && v <= 0.1 * peak;
    let mut first = None;
    let mut last = 0;
    for j in peak_at..norms.len() {
        if in_window(norms[j]) {
            if first.is_none() {
                first = Some(j);
            }
            last = j;
        }
    }
    let (first, last) = match first {
        Some(f) if last >= f + 2 => (f, last),
        // decays too slowly or too abruptly for the window: fit the whole tail
        _ => {
            let tail: Vec<usize> = (peak_at..norms.len()).filter(|&j| norms[j] > 0.0).collect();
            if tail.len() < 3 {
                return None;
            }
            (tail[0], *tail.last().expect("non-empty"))
        }
    };
    let idx: Vec<usize> = (first..=last).filter(|&j| norms[j] > 0.0).collect();
    let xs: Vec<f64> = idx.iter().map(|&j| sigma[j]).collect();
    let ys: Vec<f64> = idx.iter().map(|&j| norms[j].ln()).collect();
    let (slope, _) = linalg::linear_fit(&xs, &ys);
    let rate = -slope;
    let kappa = (0..=last).fold(0.0f64, |m, j| m.max(norms[j] * (rate * sigma[j]).exp()));
    Some(DecayEstimate {
        kappa,
        rate,
        window: (first, last),
    })
}
