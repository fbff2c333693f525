use std::sync::Arc;

use nalgebra::DVector;
use proptest::prelude::*;
use turnlayer_core::jet::Jet;
use turnlayer_core::layer::{self, Block, LayerGrid, LayerSolution, LinearLayerSystem, LowerOrderData};
use turnlayer_core::pencil::{self, PencilStructure};
use turnlayer_core::problem::{BvpProblem, VectorField};
use turnlayer_core::{problems, regular};

const A: f64 = 0.25;

fn structure(problem: &BvpProblem) -> PencilStructure {
    let reduced = regular::solve_reduced(problem, regular::DEFAULT_DEGREE, 1e-12).unwrap();
    let c = pencil::classify_and_verify(problem, &reduced, pencil::DEFAULT_T_FLOOR, pencil::DEFAULT_GRID).unwrap();
    pencil::require_structure(c).unwrap()
}

fn setup(name: &str) -> (BvpProblem, PencilStructure) {
    let problem = problems::get(name).unwrap();
    let s = structure(&problem);
    (problem, s)
}

fn start_grid(s: &PencilStructure) -> LayerGrid {
    LayerGrid::for_rate(s.start_rate, layer::DEFAULT_NODES)
}

fn end_grid(s: &PencilStructure) -> LayerGrid {
    LayerGrid::for_rate(s.end_rate, layer::DEFAULT_NODES)
}

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

/// Largest deviation between a layer and a closed form over its nodes.
fn deviation(layer: &LayerSolution, exact: impl Fn(f64) -> DVector<f64>) -> f64 {
    layer
        .grid
        .stretched(layer.side)
        .iter()
        .zip(&layer.values)
        .map(|(&s, val)| (val - exact(s)).amax())
        .fold(0.0, f64::max)
}

#[test]
fn linear_start_layer_is_a_single_exponential() {
    let (p, s) = setup("ltp1");
    let layer = layer::pi0_solve(&p, &s, &v(&[0.1]), &start_grid(&s), 1e-12).unwrap();
    let err = deviation(&layer, |t| v(&[0.0, 0.0, 0.1 * (-t).exp()]));
    assert!(err < 1e-12, "{err:e}");
    let decay = layer.decay.unwrap();
    assert!((decay.rate - 1.0).abs() < 0.05, "{decay:?}");
}

#[test]
fn linear_end_layer_is_two_exponentials() {
    let (p, s) = setup("ltp1");
    let layer = layer::q0_solve(&p, &s, &v(&[0.1, 0.1]), &end_grid(&s), 1e-12).unwrap();
    let err = deviation(&layer, |x| v(&[0.1 * (3.0 * x).exp(), 0.1 * (1.5 * x).exp(), 0.0]));
    assert!(err < 1e-12, "{err:e}");
    let decay = layer.decay.unwrap();
    assert!((decay.rate - 1.5).abs() < 0.15, "{decay:?}");
}

#[test]
fn zero_parameters_give_zero_layers() {
    for name in ["ltp1", "ntp1"] {
        let (p, s) = setup(name);
        let pi = layer::pi0_solve(&p, &s, &v(&[0.0]), &start_grid(&s), 1e-12).unwrap();
        let q = layer::q0_solve(&p, &s, &v(&[0.0, 0.0]), &end_grid(&s), 1e-12).unwrap();
        assert_eq!(pi.max_abs(), 0.0);
        assert_eq!(q.max_abs(), 0.0);
        assert!(pi.decay.is_none() && q.decay.is_none());
    }
}

#[test]
fn nonlinear_layers_match_bernoulli_closed_forms() {
    let (p, s) = setup("ntp1");
    let c = 0.1;
    let pi = layer::pi0_solve(&p, &s, &v(&[c]), &start_grid(&s), 1e-12).unwrap();
    let err = deviation(&pi, |t| v(&[0.0, 0.0, 1.0 / (A + (1.0 / c - A) * t.exp())]));
    assert!(err < 1e-10, "start {err:e}");
    assert!(pi.iterations > 1);

    let b = 1.5;
    let q = layer::q0_solve(&p, &s, &v(&[c, c]), &end_grid(&s), 1e-12).unwrap();
    let err = deviation(&q, |x| {
        v(&[
            c * (3.0 * x).exp(),
            1.0 / (-A / b + (1.0 / c + A / b) * (-b * x).exp()),
            0.0,
        ])
    });
    assert!(err < 1e-10, "end {err:e}");
}

#[test]
fn converged_layers_are_fixed_points() {
    let (p, s) = setup("ntp1");
    let tol = 1e-12;
    let pi = layer::pi0_solve(&p, &s, &v(&[0.1]), &start_grid(&s), tol).unwrap();
    let q = layer::q0_solve(&p, &s, &v(&[0.1, 0.1]), &end_grid(&s), tol).unwrap();
    for l in [&pi, &q] {
        let r = layer::fixed_point_residual(&p, &s, l).unwrap();
        assert!(r <= 10.0 * tol, "{r:e}");
    }
}

#[test]
fn doubling_the_window_leaves_the_layer_unchanged() {
    let (p, s) = setup("ntp1");
    let grid = start_grid(&s);
    let short = layer::pi0_solve(&p, &s, &v(&[0.1]), &grid, 1e-12).unwrap();
    let long = layer::pi0_solve(&p, &s, &v(&[0.1]), &grid.extended(2.0), 1e-12).unwrap();
    let change = short
        .values
        .iter()
        .zip(&long.values)
        .map(|(a, b)| (a - b).amax())
        .fold(0.0, f64::max);
    assert!(change <= 1e-8, "{change:e}");
}

#[test]
fn layers_respect_their_decay_envelope_and_window() {
    let (p, s) = setup("ntp1");
    let pi = layer::pi0_solve(&p, &s, &v(&[0.1]), &start_grid(&s), 1e-12).unwrap();
    let q = layer::q0_solve(&p, &s, &v(&[0.1, -0.1]), &end_grid(&s), 1e-12).unwrap();
    for l in [&pi, &q] {
        let d = l.decay.unwrap();
        let sigma = l.grid.distances();
        for j in d.window.0..=d.window.1 {
            assert!(l.values[j].norm() <= 1.5 * d.kappa * (-d.rate * sigma[j]).exp());
        }
        assert!(l.values.last().unwrap().norm() <= 1e-8 * l.at_anchor().norm());
        let beyond = if l.side == turnlayer_core::Side::Start { 1e3 } else { -1e3 };
        assert_eq!(l.eval(beyond).amax(), 0.0);
    }
}

struct CoupledField;

impl VectorField for CoupledField {
    fn dim(&self) -> usize {
        3
    }

    fn eval_jet(&self, x: &[Jet], t: &Jet, _eps: &Jet) -> Vec<Jet> {
        let one = Jet::constant(1.0, t.order());
        let s = [one + *t * *t, (-*t).exp(), t.cos()];
        vec![
            x[0] - s[0] + (x[1] - s[1]).scale(0.5),
            (one + *t) * (x[1] - s[1]),
            -(one + *t) * (x[2] - s[2]),
        ]
    }
}

#[test]
fn algebraic_component_of_the_start_layer() {
    let (p, s) = setup("ltp1");
    assert_eq!(layer::algebraic_first_component(&p, &s, &v(&[0.0, 0.0]), 1e-12).unwrap(), 0.0);
    let y = layer::algebraic_first_component(&p, &s, &v(&[0.3, -0.7]), 1e-12).unwrap();
    assert!(y.abs() < 1e-15);

    let base = problems::get("ltp1").unwrap();
    let coupled = BvpProblem::new("coupled", 0.5, base.a.clone(), Arc::new(CoupledField), base.bc.clone(), base.reduced_guess.clone())
        .unwrap();
    // identity normalizers: the differential components are the original ones
    let mut cs = structure(&coupled);
    cs.start.left = nalgebra::DMatrix::identity(3, 3);
    cs.start.right = nalgebra::DMatrix::identity(3, 3);
    let y = layer::algebraic_first_component(&coupled, &cs, &v(&[0.2, 0.0]), 1e-12).unwrap();
    assert!((y + 0.1).abs() < 1e-12, "{y}");
}

fn first_order_inputs(name: &str) -> (BvpProblem, PencilStructure, regular::SeriesField, LayerSolution, LayerSolution) {
    let (p, s) = setup(name);
    let series = regular::regular_series(&p, 1, regular::DEFAULT_DEGREE, 1e-12).unwrap();
    let pi = layer::pi0_solve(&p, &s, &v(&[0.1]), &start_grid(&s), 1e-12).unwrap();
    let q = layer::q0_solve(&p, &s, &v(&[0.1, 0.1]), &end_grid(&s), 1e-12).unwrap();
    (p, s, series, pi, q)
}

#[test]
fn first_order_start_layer_of_the_linear_example() {
    let (p, s, series, pi, _) = first_order_inputs("ltp1");
    let layers = [pi];
    let inputs = LowerOrderData { regular: &series, layers: &layers };
    let l1 = layer::pik_solve(&p, &s, 1, &v(&[0.0]), &inputs, 1e-12).unwrap();
    // y' = −y − 0.1 τ e^{−τ}, y(0) = 0
    let err = deviation(&l1, |t| v(&[0.0, 0.0, -0.05 * t * t * (-t).exp()]));
    assert!(err < 1e-9, "{err:e}");
}

#[test]
fn first_order_end_layer_of_the_linear_example() {
    let (p, s, series, _, q) = first_order_inputs("ltp1");
    let layers = [q];
    let inputs = LowerOrderData { regular: &series, layers: &layers };
    let l1 = layer::qk_solve(&p, &s, 1, &v(&[0.0, 0.0]), &inputs, 1e-12).unwrap();
    let err = deviation(&l1, |x| {
        v(&[-0.2 * x * x * (3.0 * x).exp(), 0.05 * x * x * (1.5 * x).exp(), 0.0])
    });
    assert!(err < 1e-9, "{err:e}");
}

#[test]
fn synthetic_forcing_matches_convolution() {
    let (p, s) = setup("ltp1");
    let pi = layer::pi0_solve(&p, &s, &v(&[0.1]), &start_grid(&s), 1e-12).unwrap();
    let system = LinearLayerSystem::new(&p, &s, &pi, 1e-12).unwrap();
    let forcing: Vec<DVector<f64>> = pi.grid.distances().iter().map(|&t| v(&[0.0, 0.0, (-2.0 * t).exp()])).collect();
    let l = system.solve(1, &v(&[0.0]), &forcing).unwrap();
    let err = deviation(&l, |t| v(&[0.0, 0.0, (-t).exp() - (-2.0 * t).exp()]));
    assert!(err < 1e-10, "start {err:e}");

    let q = layer::q0_solve(&p, &s, &v(&[0.1, 0.1]), &end_grid(&s), 1e-12).unwrap();
    let system = LinearLayerSystem::new(&p, &s, &q, 1e-12).unwrap();
    // normalized forcing on the second anchored direction, in ξ = −σ
    let forcing: Vec<DVector<f64>> = q.grid.distances().iter().map(|&d| v(&[0.0, (-2.0 * d).exp(), 0.0])).collect();
    let l = system.solve(1, &v(&[0.0, 0.0]), &forcing).unwrap();
    let err = deviation(&l, |x| v(&[0.0, 2.0 * ((2.0 * x).exp() - (1.5 * x).exp()), 0.0]));
    assert!(err < 1e-10, "end {err:e}");
}

#[test]
fn higher_order_solves_are_affine() {
    let (p, s, series, pi, _) = first_order_inputs("ntp1");
    let system = LinearLayerSystem::new(&p, &s, &pi, 1e-12).unwrap();
    let layers = [pi];
    let r = system.forcing(&p, 1, &LowerOrderData { regular: &series, layers: &layers }).unwrap();
    let r2: Vec<DVector<f64>> = layers[0].grid.distances().iter().map(|&t| v(&[0.01, -0.02, 0.03]) * (-t).exp()).collect();
    let sum: Vec<DVector<f64>> = r.iter().zip(&r2).map(|(a, b)| a + b).collect();
    let (a1, a2) = (v(&[0.3]), v(&[-0.05]));
    let x1 = system.solve(1, &a1, &r).unwrap();
    let x2 = system.solve(1, &a2, &r2).unwrap();
    let x12 = system.solve(1, &(&a1 + &a2), &sum).unwrap();
    for j in 0..x1.values.len() {
        let gap = (&x1.values[j] + &x2.values[j] - &x12.values[j]).amax();
        assert!(gap < 1e-9, "node {j}: {gap:e}");
    }
}

#[test]
fn start_propagator_of_the_linear_example() {
    let (p, s) = setup("ltp1");
    let pi = layer::pi0_solve(&p, &s, &v(&[0.1]), &start_grid(&s), 1e-12).unwrap();
    let prop = layer::propagator(&p, &s, &pi).unwrap();
    let one = v(&[1.0]);
    assert_eq!(prop.apply(Block::Minus, 2.0, 2.0, &one).unwrap(), one);
    for tau in [0.5, 3.0, 10.0] {
        let minus = prop.apply(Block::Minus, tau, 0.0, &one).unwrap()[0];
        assert!((minus - (-tau).exp()).abs() < 1e-11, "{minus}");
        let plus = prop.apply(Block::Plus, 0.0, tau, &one).unwrap()[0];
        assert!((plus - (-tau).exp()).abs() < 1e-11, "{plus}");
    }
}

fn nonlinear_propagators() -> (layer::Propagator, layer::Propagator) {
    let (p, s) = setup("ntp1");
    let pi = layer::pi0_solve(&p, &s, &v(&[0.1]), &start_grid(&s), 1e-12).unwrap();
    let q = layer::q0_solve(&p, &s, &v(&[0.1, 0.1]), &end_grid(&s), 1e-12).unwrap();
    (layer::propagator(&p, &s, &pi).unwrap(), layer::propagator(&p, &s, &q).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn propagators_compose(a in 0.0f64..20.0, b in 0.0f64..20.0, c in 0.0f64..20.0, start in any::<bool>(), plus in any::<bool>()) {
        thread_local! {
            static PROPS: (layer::Propagator, layer::Propagator) = nonlinear_propagators();
        }
        PROPS.with(|(ps, pe)| {
            let prop = if start { ps } else { pe };
            let block = if plus { Block::Plus } else { Block::Minus };
            let mut pts = [a, b, c];
            pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
            // order the triple so every step runs in the block's stable direction
            let decaying_forward = start != plus;
            let sign = if start { 1.0 } else { -1.0 };
            let [lo, mid, hi] = pts.map(|x| sign * x);
            let (s, u, t) = if decaying_forward == start { (hi, mid, lo) } else { (lo, mid, hi) };
            let dim = prop.block_dim(block);
            let w = DVector::from_fn(dim, |i, _| 1.0 + i as f64);
            let direct = prop.apply(block, s, t, &w).unwrap();
            let composed = prop.apply(block, s, u, &prop.apply(block, u, t, &w).unwrap()).unwrap();
            // scaled by the larger of input and output: steps may grow or decay
            let gap = (&direct - &composed).amax() / direct.amax().max(w.amax());
            prop_assert!(gap < 1e-9, "gap {:e}", gap);
            Ok(())
        })?;
    }
}
