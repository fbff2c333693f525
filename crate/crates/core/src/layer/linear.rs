//! Higher-order layers: linear inhomogeneous systems along the leading layer.
//!
//! In normalized coordinates and the distance variable `σ`, order `k ≥ 1`
//! reads `du/dσ = E(σ)u + l(σ)` for the differential components (the
//! algebraic component at the start is eliminated through the first row).
//! The split solution is computed without ever forming a fundamental
//! matrix: a Riccati transformation `u_a = w + X u_f` decouples anchored and
//! free directions, `X` and `w` are integrated away from the anchor and
//! `u_f` back toward it, each in its stable direction.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use super::frame::Frame;
use super::ode::{integrate, StepControl};
use super::{orientation, LayerGrid, LayerSolution};
use crate::error::{Error, Result};
use crate::jet::JetVector;
use crate::linalg;
use crate::pencil::PencilStructure;
use crate::problem::{BvpProblem, Side};
use crate::regular::SeriesField;

/// Nodes used by the piecewise Lagrange interpolation of node data.
const STENCIL: usize = 6;
/// Smallest admissible `|C₁|` (coefficient of the algebraic component).
const DEGENERACY: f64 = 1e-10;

/// Directions of the split: `Plus` grows in the stretched variable, `Minus`
/// decays in it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Plus,
    Minus,
}

/// Lower-order terms entering the order-`k` right-hand side on one side.
#[derive(Debug, Clone, Copy)]
pub struct LowerOrderData<'a> {
    /// Regular terms `x̄_0 … x̄_k`.
    pub regular: &'a SeriesField,
    /// Layer terms of orders `0 … k−1` on this side, all on one grid.
    pub layers: &'a [LayerSolution],
}

/// The variational system along a leading-order layer.
#[derive(Debug, Clone)]
pub struct LinearLayerSystem {
    frame: Frame,
    grid: LayerGrid,
    split: Vec<usize>,
    na: usize,
    nf: usize,
    /// Normalized Jacobian at the nodes.
    jac: Vec<DMatrix<f64>>,
    /// σ-system matrix in split order at the nodes.
    e: Vec<DMatrix<f64>>,
    /// Riccati solution `X` and its σ-derivative at the nodes.
    x: Vec<DMatrix<f64>>,
    dx: Vec<DMatrix<f64>>,
    ctl: StepControl,
}

fn blocks(e: &DMatrix<f64>, na: usize, nf: usize) -> [DMatrix<f64>; 4] {
    [
        e.view((0, 0), (na, na)).into_owned(),
        e.view((0, na), (na, nf)).into_owned(),
        e.view((na, 0), (nf, na)).into_owned(),
        e.view((na, na), (nf, nf)).into_owned(),
    ]
}

fn riccati_rhs(e: &DMatrix<f64>, x: &DMatrix<f64>, na: usize, nf: usize) -> DMatrix<f64> {
    let [aa, af, fa, ff] = blocks(e, na, nf);
    &af + &aa * x - x * &ff - x * &fa * x
}

fn as_vector(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

fn as_matrix(v: &DVector<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(rows, cols, v.as_slice())
}

impl LinearLayerSystem {
    /// Linearizes along `leading` (an order-0 layer on either side).
    pub fn new(problem: &BvpProblem, structure: &PencilStructure, leading: &LayerSolution, tol: f64) -> Result<Self> {
        let frame = Frame::new(problem, structure, leading.side);
        let n = frame.dim();
        let o = frame.orientation();
        let split = frame.split();
        let (na, nf) = (frame.anchored.len(), frame.free.len());
        let sigma = leading.grid.distances();
        let mut jac = Vec::with_capacity(sigma.len());
        let mut e = Vec::with_capacity(sigma.len());
        for (j, y) in leading.normalized.iter().enumerate() {
            let c = frame.jacobian(problem, y);
            let reduced = if frame.algebraic {
                let c1 = c[(0, 0)];
                if c1.abs() < DEGENERACY {
                    return Err(Error::TurningDegeneracy { sigma: sigma[j], value: c1 });
                }
                DMatrix::from_fn(n, n, |r, s| c[(r, s)] - c[(r, 0)] * c[(0, s)] / c1)
            } else {
                c.clone()
            };
            e.push(DMatrix::from_fn(na + nf, na + nf, |r, s| o * reduced[(split[r], split[s])]));
            jac.push(c);
        }
        let ctl = StepControl {
            rtol: tol.max(1e-13),
            atol: 1e-3 * tol.max(1e-13),
            ..StepControl::default()
        };
        let mut system = LinearLayerSystem {
            frame,
            grid: leading.grid.clone(),
            split,
            na,
            nf,
            jac,
            e,
            x: Vec::new(),
            dx: Vec::new(),
            ctl,
        };
        system.integrate_riccati()?;
        Ok(system)
    }

    pub fn side(&self) -> Side {
        self.frame.side
    }

    pub fn grid(&self) -> &LayerGrid {
        &self.grid
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    /// Lengths of the anchored and free parts.
    pub fn split_dims(&self) -> (usize, usize) {
        (self.na, self.nf)
    }

    /// Window start and Lagrange weights for node data at distance `s`.
    fn stencil(&self, s: f64) -> (usize, Vec<f64>) {
        let sigma = self.grid.distances();
        let m = STENCIL.min(sigma.len());
        let j = self.grid.cell(s.clamp(0.0, self.grid.extent()));
        let first = (j + 1).saturating_sub(m / 2).min(sigma.len() - m);
        (first, linalg::fornberg_weights(&sigma[first..first + m], s, 0))
    }

    fn interp_matrix(&self, data: &[DMatrix<f64>], s: f64) -> DMatrix<f64> {
        let (first, w) = self.stencil(s);
        let mut out = DMatrix::zeros(data[0].nrows(), data[0].ncols());
        for (i, wi) in w.iter().enumerate() {
            out += &data[first + i] * *wi;
        }
        out
    }

    fn interp_vector(&self, data: &[DVector<f64>], s: f64) -> DVector<f64> {
        let (first, w) = self.stencil(s);
        let mut out = DVector::zeros(data[0].len());
        for (i, wi) in w.iter().enumerate() {
            out += &data[first + i] * *wi;
        }
        out
    }

    /// Hermite interpolation of node data with node slopes.
    fn hermite_matrix(&self, values: &[DMatrix<f64>], slopes: &[DMatrix<f64>], s: f64) -> DMatrix<f64> {
        let sigma = self.grid.distances();
        let j = self.grid.cell(s);
        let (r, c) = (values[j].nrows(), values[j].ncols());
        let (v, _) = linalg::hermite(
            sigma[j],
            sigma[j + 1],
            &as_vector(&values[j]),
            &as_vector(&slopes[j]),
            &as_vector(&values[j + 1]),
            &as_vector(&slopes[j + 1]),
            s,
        );
        as_matrix(&v, r, c)
    }

    fn integrate_riccati(&mut self) -> Result<()> {
        let (na, nf) = (self.na, self.nf);
        let n_nodes = self.grid.len();
        let mut x = vec![DMatrix::zeros(na, nf); n_nodes];
        let mut dx = vec![DMatrix::zeros(na, nf); n_nodes];
        if na > 0 && nf > 0 {
            let sigma = self.grid.distances().to_vec();
            dx[0] = riccati_rhs(&self.e[0], &x[0], na, nf);
            for j in 0..n_nodes - 1 {
                let rhs = |s: f64, v: &DVector<f64>| {
                    let e = self.interp_matrix(&self.e, s);
                    as_vector(&riccati_rhs(&e, &as_matrix(v, na, nf), na, nf))
                };
                let next = integrate(rhs, sigma[j], sigma[j + 1], &as_vector(&x[j]), &self.ctl)?;
                x[j + 1] = as_matrix(&next, na, nf);
                dx[j + 1] = riccati_rhs(&self.e[j + 1], &x[j + 1], na, nf);
            }
        }
        self.x = x;
        self.dx = dx;
        Ok(())
    }

    /// Decoupled block matrix in σ: anchored `E_aa − X E_fa`, free
    /// `E_ff + E_fa X`.
    fn block_matrix(&self, anchored: bool, s: f64) -> DMatrix<f64> {
        let e = self.interp_matrix(&self.e, s);
        let x = self.hermite_matrix(&self.x, &self.dx, s);
        let [aa, _, fa, ff] = blocks(&e, self.na, self.nf);
        if anchored {
            aa - x * fa
        } else {
            ff + fa * x
        }
    }

    /// `σ`-forcing in split order from the normalized forcing `left·r`.
    fn reduce_forcing(&self, forcing: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let o = self.frame.orientation();
        forcing
            .iter()
            .zip(&self.jac)
            .map(|(r, c)| {
                DVector::from_iterator(
                    self.split.len(),
                    self.split.iter().map(|&d| {
                        if self.frame.algebraic {
                            o * (r[d] - c[(d, 0)] * r[0] / c[(0, 0)])
                        } else {
                            o * r[d]
                        }
                    }),
                )
            })
            .collect()
    }

    /// Solves with anchored value `parameter` and normalized forcing
    /// `left·r` at the nodes. Returns normalized values and σ-derivatives.
    pub fn solve_normalized(
        &self,
        parameter: &DVector<f64>,
        forcing: &[DVector<f64>],
    ) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
        let (na, nf) = (self.na, self.nf);
        let n = self.frame.dim();
        let sigma = self.grid.distances();
        let n_nodes = sigma.len();
        if parameter.len() != na || forcing.len() != n_nodes {
            return Err(Error::InvalidInput(alloc::format!(
                "layer solve expects a parameter of length {na} and {n_nodes} forcing samples"
            )));
        }
        let l = self.reduce_forcing(forcing);
        let la: Vec<DVector<f64>> = l.iter().map(|v| v.rows(0, na).into_owned()).collect();
        let lf: Vec<DVector<f64>> = l.iter().map(|v| v.rows(na, nf).into_owned()).collect();

        let w_rhs_at = |j: usize, w: &DVector<f64>| {
            let [aa, _, fa, _] = blocks(&self.e[j], na, nf);
            (aa - &self.x[j] * fa) * w + &la[j] - &self.x[j] * &lf[j]
        };
        let mut w = vec![DVector::zeros(na); n_nodes];
        let mut dw = vec![DVector::zeros(na); n_nodes];
        if na > 0 {
            w[0] = parameter.clone();
            dw[0] = w_rhs_at(0, &w[0]);
            for j in 0..n_nodes - 1 {
                let rhs = |s: f64, v: &DVector<f64>| {
                    let x = self.hermite_matrix(&self.x, &self.dx, s);
                    let la_s = self.interp_vector(&la, s);
                    let lf_s = self.interp_vector(&lf, s);
                    self.block_matrix(true, s) * v + la_s - x * lf_s
                };
                w[j + 1] = integrate(rhs, sigma[j], sigma[j + 1], &w[j], &self.ctl)?;
                dw[j + 1] = w_rhs_at(j + 1, &w[j + 1]);
            }
        }
        let mut uf = vec![DVector::zeros(nf); n_nodes];
        if nf > 0 {
            for j in (0..n_nodes - 1).rev() {
                let rhs = |s: f64, v: &DVector<f64>| {
                    let e = self.interp_matrix(&self.e, s);
                    let [_, _, fa, _] = blocks(&e, na, nf);
                    let cell = self.grid.cell(s);
                    let (ws, _) = linalg::hermite(sigma[cell], sigma[cell + 1], &w[cell], &dw[cell], &w[cell + 1], &dw[cell + 1], s);
                    self.block_matrix(false, s) * v + fa * ws + self.interp_vector(&lf, s)
                };
                uf[j] = integrate(rhs, sigma[j + 1], sigma[j], &uf[j + 1], &self.ctl)?;
            }
        }
        let mut ys = Vec::with_capacity(n_nodes);
        let mut dys = Vec::with_capacity(n_nodes);
        for j in 0..n_nodes {
            let mut u = DVector::zeros(na + nf);
            u.rows_mut(0, na).copy_from(&(&w[j] + &self.x[j] * &uf[j]));
            u.rows_mut(na, nf).copy_from(&uf[j]);
            let du = &self.e[j] * &u + &l[j];
            let mut y = DVector::zeros(n);
            let mut dy = DVector::zeros(n);
            for (i, &d) in self.split.iter().enumerate() {
                y[d] = u[i];
                dy[d] = du[i];
            }
            if self.frame.algebraic {
                let c = &self.jac[j];
                let coupling: f64 = (1..n).map(|d| c[(0, d)] * y[d]).sum();
                y[0] = -(coupling + forcing[j][0]) / c[(0, 0)];
            }
            ys.push(y);
            dys.push(dy);
        }
        if self.frame.algebraic {
            let first: Vec<f64> = ys.iter().map(|y| y[0]).collect();
            for j in 0..n_nodes {
                let m = 5.min(n_nodes);
                let start = j.saturating_sub(m / 2).min(n_nodes - m);
                let wts = linalg::fornberg_weights(&sigma[start..start + m], sigma[j], 1);
                dys[j][0] = wts.iter().enumerate().map(|(i, wi)| wi * first[start + i]).sum();
            }
        }
        Ok((ys, dys))
    }

    /// Layer term of the given order in original coordinates.
    pub fn solve(&self, order: usize, parameter: &DVector<f64>, forcing: &[DVector<f64>]) -> Result<LayerSolution> {
        let (ys, dys) = self.solve_normalized(parameter, forcing)?;
        let o = self.frame.orientation();
        let values = ys.iter().map(|y| self.frame.to_original(y)).collect();
        let slopes = dys.iter().map(|d| self.frame.to_original(d) * o).collect();
        Ok(LayerSolution::assemble(
            self.frame.side,
            order,
            self.grid.clone(),
            values,
            slopes,
            parameter.clone(),
            ys,
            0,
        ))
    }

    /// Normalized forcing `left·r_k` at the nodes, where
    /// `r_k = g_k − Σ_{i=1}^{k} A_i(s)·dL_{k−i}/ds` and `g_k` is the
    /// coefficient of `ε^k` in `f(x̄ + Σ_{m<k} ε^m L_m) − f(x̄)` along the
    /// stretched time `s`.
    pub fn forcing(&self, problem: &BvpProblem, k: usize, inputs: &LowerOrderData<'_>) -> Result<Vec<DVector<f64>>> {
        let side = self.frame.side;
        if k == 0 || inputs.layers.len() < k {
            return Err(Error::InvalidInput(alloc::format!(
                "order {k} needs layer terms of orders 0..{k}"
            )));
        }
        if inputs.regular.len() <= k {
            return Err(Error::InvalidInput(alloc::format!(
                "order {k} needs regular terms up to order {k}"
            )));
        }
        for layer in &inputs.layers[..k] {
            if layer.side != side || layer.grid != self.grid {
                return Err(Error::InvalidInput("lower-order layers must share side and grid".into()));
            }
        }
        let anchor = problem.anchor(side);
        // derivs[i][j] = x̄_i^{(j)}(anchor) / j!
        let derivs: Vec<Vec<DVector<f64>>> = (0..=k)
            .map(|i| {
                (0..=k - i)
                    .map(|j| inputs.regular.derivative(i, j, anchor) / crate::problem::factorial(j))
                    .collect()
            })
            .collect();
        let stretched = self.grid.stretched(side);
        let mut out = Vec::with_capacity(stretched.len());
        for (node, &s) in stretched.iter().enumerate() {
            let regular: Vec<DVector<f64>> = (0..=k)
                .map(|m| {
                    let mut c = DVector::zeros(self.frame.dim());
                    let mut pow = 1.0;
                    for j in 0..=m {
                        c += &derivs[m - j][j] * pow;
                        pow *= s;
                    }
                    c
                })
                .collect();
            let mut with_layers = regular.clone();
            for (m, coeff) in with_layers.iter_mut().enumerate().take(k) {
                *coeff += &inputs.layers[m].values[node];
            }
            let t = crate::jet::Jet::from_coeffs(&[anchor, s], k);
            let full = problem.f_jet_general(&JetVector::from_coeffs(&with_layers, k), &t, k)?;
            let bare = problem.f_jet_general(&JetVector::from_coeffs(&regular, k), &t, k)?;
            let mut r = full.coeff(k) - bare.coeff(k);
            for i in 1..=k {
                r -= problem.a_layer_coeff(side, s, i)? * &inputs.layers[k - i].slopes[node];
            }
            out.push(&self.frame.left * r);
        }
        Ok(out)
    }

    /// Homogeneous propagation of one decoupled block: the value at `t`
    /// (distance from the anchor) carried to `s`.
    fn propagate(&self, anchored: bool, s: f64, t: f64, v: &DVector<f64>) -> Result<DVector<f64>> {
        let extent = self.grid.extent();
        if !(0.0..=extent).contains(&s) || !(0.0..=extent).contains(&t) {
            return Err(Error::InvalidInput(alloc::format!(
                "propagation endpoints must lie within the layer window [0, {extent}]"
            )));
        }
        let dim = if anchored { self.na } else { self.nf };
        if v.len() != dim {
            return Err(Error::InvalidInput(alloc::format!("block vector must have length {dim}")));
        }
        if s == t || dim == 0 {
            return Ok(v.clone());
        }
        integrate(|r, y| self.block_matrix(anchored, r) * y, t, s, v, &self.ctl)
    }
}

/// Fundamental-solution action of the decoupled homogeneous layer system.
#[derive(Debug, Clone)]
pub struct Propagator {
    system: LinearLayerSystem,
}

impl Propagator {
    pub fn new(system: LinearLayerSystem) -> Self {
        Propagator { system }
    }

    pub fn system(&self) -> &LinearLayerSystem {
        &self.system
    }

    fn is_anchored(&self, block: Block) -> bool {
        // anchored directions decay away from the anchor: in τ that is the
        // decaying block, in ξ (which runs toward the anchor) the growing one
        match (self.system.side(), block) {
            (Side::Start, Block::Minus) | (Side::End, Block::Plus) => true,
            (Side::Start, Block::Plus) | (Side::End, Block::Minus) => false,
        }
    }

    pub fn block_dim(&self, block: Block) -> usize {
        if self.is_anchored(block) {
            self.system.na
        } else {
            self.system.nf
        }
    }

    /// `Φ(s, t)·v`: the homogeneous solution of `block` with value `v` at
    /// stretched time `t`, evaluated at stretched time `s`.
    pub fn apply(&self, block: Block, s: f64, t: f64, v: &DVector<f64>) -> Result<DVector<f64>> {
        let o = orientation(self.system.side());
        self.system.propagate(self.is_anchored(block), o * s, o * t, v)
    }
}

/// Propagator of the variational system along a leading layer.
pub fn propagator(problem: &BvpProblem, structure: &PencilStructure, leading: &LayerSolution) -> Result<Propagator> {
    Ok(Propagator::new(LinearLayerSystem::new(problem, structure, leading, 1e-12)?))
}

fn solve_order(
    problem: &BvpProblem,
    structure: &PencilStructure,
    side: Side,
    k: usize,
    parameter: &DVector<f64>,
    inputs: &LowerOrderData<'_>,
    tol: f64,
) -> Result<LayerSolution> {
    let leading = inputs
        .layers
        .first()
        .ok_or_else(|| Error::InvalidInput("the leading layer is required".into()))?;
    if leading.side != side {
        return Err(Error::InvalidInput("layer inputs belong to the other side".into()));
    }
    let system = LinearLayerSystem::new(problem, structure, leading, tol)?;
    let forcing = system.forcing(problem, k, inputs)?;
    system.solve(k, parameter, &forcing)
}

/// Start layer `Π_k x` with anchored value `a_km` (length `q`).
pub fn pik_solve(
    problem: &BvpProblem,
    structure: &PencilStructure,
    k: usize,
    a_km: &DVector<f64>,
    inputs: &LowerOrderData<'_>,
    tol: f64,
) -> Result<LayerSolution> {
    solve_order(problem, structure, Side::Start, k, a_km, inputs, tol)
}

/// End layer `Q_k x = U R_k x` with anchored value `b_kp` (length `p + 1`).
pub fn qk_solve(
    problem: &BvpProblem,
    structure: &PencilStructure,
    k: usize,
    b_kp: &DVector<f64>,
    inputs: &LowerOrderData<'_>,
    tol: f64,
) -> Result<LayerSolution> {
    solve_order(problem, structure, Side::End, k, b_kp, inputs, tol)
}
