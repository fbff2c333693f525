//! Normalized coordinates of one layer side.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::jet::Jet;
use crate::linalg;
use crate::pencil::PencilStructure;
use crate::problem::{BvpProblem, Side};

/// Coordinates `x = root + basis·y` in which the leading-order layer system
/// reads `H dy/ds = left·f(root + basis·y)`, with `H = diag(0, I)` at the
/// start (first component algebraic) and `H = I` at the end.
#[derive(Debug, Clone)]
pub struct Frame {
    pub side: Side,
    pub anchor_t: f64,
    pub root: DVector<f64>,
    pub basis: DMatrix<f64>,
    pub left: DMatrix<f64>,
    /// Whether `y[0]` is algebraic.
    pub algebraic: bool,
    /// Components of `y` prescribed at the anchor.
    pub anchored: Vec<usize>,
    /// Components of `y` fixed by decay at infinity.
    pub free: Vec<usize>,
    /// Linear part of `d y_anchored / dσ` (stable).
    pub l_anchored: DMatrix<f64>,
    /// Linear part of `d y_free / dσ` (unstable).
    pub l_free: DMatrix<f64>,
    /// `left·f(root)`: roundoff left by the reduced solve, removed so that a
    /// zero layer is an exact solution.
    offset: DVector<f64>,
}

impl Frame {
    pub fn new(problem: &BvpProblem, structure: &PencilStructure, side: Side) -> Self {
        let n = problem.dim();
        let p = structure.p;
        let mut frame = match side {
            Side::Start => Frame {
                side,
                anchor_t: 0.0,
                root: structure.root_start.clone(),
                basis: structure.start.right.clone(),
                left: structure.start.left.clone(),
                algebraic: true,
                anchored: (1 + p..n).collect(),
                free: (1..1 + p).collect(),
                l_anchored: structure.start.decaying_block.clone(),
                l_free: structure.start.growing_block.clone(),
                offset: DVector::zeros(n),
            },
            Side::End => {
                let a_t = problem.a_at(problem.horizon, 0.0);
                let u = &structure.end_basis;
                let left = linalg::inverse(u).expect("eigenvector basis is nonsingular")
                    * linalg::inverse(&a_t).expect("A(T,0) is nonsingular");
                let w = &structure.end_eigenvalues;
                let diag = |idx: &[usize]| {
                    DMatrix::from_diagonal(&DVector::from_iterator(idx.len(), idx.iter().map(|&i| -w[i])))
                };
                let anchored: Vec<usize> = (0..p + 1).collect();
                let free: Vec<usize> = (p + 1..n).collect();
                Frame {
                    side,
                    anchor_t: problem.horizon,
                    root: structure.root_end.clone(),
                    basis: u.clone(),
                    left,
                    algebraic: false,
                    l_anchored: diag(&anchored),
                    l_free: diag(&free),
                    anchored,
                    free,
                    offset: DVector::zeros(n),
                }
            }
        };
        frame.offset = &frame.left * problem.f_value(&frame.root, frame.anchor_t, 0.0);
        frame
    }

    pub fn dim(&self) -> usize {
        self.root.len()
    }

    /// Differential components in split order: anchored, then free.
    pub fn split(&self) -> Vec<usize> {
        self.anchored.iter().chain(self.free.iter()).copied().collect()
    }

    pub fn orientation(&self) -> f64 {
        super::orientation(self.side)
    }

    pub fn to_original(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.basis * y
    }

    /// `left · (f(root + basis·y, anchor, 0) − f(root, anchor, 0))`.
    pub(crate) fn rhs(&self, problem: &BvpProblem, y: &DVector<f64>) -> DVector<f64> {
        let x = &self.root + &self.basis * y;
        &self.left * problem.f_value(&x, self.anchor_t, 0.0) - &self.offset
    }

    /// Right side and its derivative along `dir` (both in normalized form).
    pub(crate) fn rhs_directional(
        &self,
        problem: &BvpProblem,
        y: &DVector<f64>,
        dir: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let x = &self.root + &self.basis * y;
        let dx = &self.basis * dir;
        let xs: Vec<Jet> = x.iter().zip(dx.iter()).map(|(&v, &d)| Jet::variable(v, d, 1)).collect();
        let out = problem.f.eval_jet(&xs, &Jet::constant(self.anchor_t, 1), &Jet::constant(0.0, 1));
        let f0 = DVector::from_iterator(out.len(), out.iter().map(|j| j.coeff(0)));
        let f1 = DVector::from_iterator(out.len(), out.iter().map(|j| j.coeff(1)));
        (&self.left * f0 - &self.offset, &self.left * f1)
    }

    /// `left · f_x'(root + basis·y) · basis`.
    pub(crate) fn jacobian(&self, problem: &BvpProblem, y: &DVector<f64>) -> DMatrix<f64> {
        let x = &self.root + &self.basis * y;
        &self.left * problem.f_jac(&x, self.anchor_t, 0.0) * &self.basis
    }
}
