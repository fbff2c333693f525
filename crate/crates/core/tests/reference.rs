mod common;

use turnlayer_core::problems;
use turnlayer_core::reference::{self, ReferenceOptions, ReferenceSolution};

fn solve(eps: f64, intervals: usize, richardson: bool) -> ReferenceSolution {
    let p = problems::get("ltp1").unwrap();
    let opts = ReferenceOptions {
        intervals,
        richardson,
        ..ReferenceOptions::default()
    };
    reference::solve_reference(&p, eps, (1.0, 1.5), &opts, &|t| problems::example_root(t)).unwrap()
}

/// Max-abs deviation from the quadrature solution over every `stride`-th node.
fn error(sol: &ReferenceSolution, stride: usize) -> f64 {
    sol.mesh
        .iter()
        .zip(&sol.values)
        .step_by(stride)
        .map(|(&t, x)| (x - common::linear_exact(t, sol.eps)).amax())
        .fold(0.0, f64::max)
}

#[test]
fn oracle_satisfies_its_boundary_conditions() {
    let eps = 1e-2;
    let x0 = common::linear_exact(0.0, eps);
    let xt = common::linear_exact(0.5, eps);
    let s0 = problems::example_root(0.0);
    let st = problems::example_root(0.5);
    assert!((x0[2] - s0[2] - 0.1).abs() < 1e-14);
    assert!((xt[0] - st[0] - 0.1).abs() < 1e-14);
    assert!((xt[1] - st[1] - 0.1).abs() < 1e-14);
}

#[test]
fn reference_matches_quadrature_solution() {
    for eps in [1e-2, 1e-3] {
        let sol = solve(eps, 16_000, true);
        let err = error(&sol, 7);
        println!("ε = {eps}: reference error {err:e}");
        assert!(err <= 1e-6, "ε = {eps}: {err:e}");
    }
}

#[test]
fn mesh_doubling_shows_second_order() {
    let eps = 1e-2;
    let errs: Vec<f64> = [500, 1000, 2000].iter().map(|&n| error(&solve(eps, n, false), 1)).collect();
    println!("errors {errs:?}");
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() <= 0.5, "{errs:?}");
    }
}

#[test]
fn mesh_is_fine_in_both_layers() {
    let mesh = reference::layer_mesh(0.5, 1e-3, 400, 4.0, (1.0, 1.5));
    assert_eq!(mesh.len(), 401);
    assert_eq!(mesh[0], 0.0);
    assert_eq!(mesh[400], 0.5);
    assert!(mesh.windows(2).all(|w| w[1] > w[0]));
    let first = mesh[1] - mesh[0];
    let middle = mesh[200] - mesh[199];
    let last = mesh[400] - mesh[399];
    assert!(first < 1e-3 * 0.5 && last < first && middle > 5.0 * first);
}

#[test]
fn interpolation_reproduces_nodes() {
    let sol = solve(1e-2, 400, false);
    for j in [0, 17, 400] {
        assert_eq!(sol.eval(sol.mesh[j]), sol.values[j]);
    }
    let mid = 0.5 * (sol.mesh[10] + sol.mesh[11]);
    let avg = (&sol.values[10] + &sol.values[11]) * 0.5;
    assert!((sol.eval(mid) - avg).amax() < 1e-15);
}
