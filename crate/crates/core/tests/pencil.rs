use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use turnlayer_core::pencil::{self, names, Verdict};
use turnlayer_core::problems;
use turnlayer_core::regular;

fn classify(problem: &turnlayer_core::BvpProblem) -> pencil::Classification {
    let reduced = regular::solve_reduced(problem, regular::DEFAULT_DEGREE, 1e-12).unwrap();
    pencil::classify_and_verify(problem, &reduced, pencil::DEFAULT_T_FLOOR, pencil::DEFAULT_GRID).unwrap()
}

#[test]
fn linear_example_structure() {
    let c = classify(&problems::get("ltp1").unwrap());
    for check in &c.report.checks {
        assert_eq!(check.verdict, Verdict::Pass, "{check:?}");
    }
    let s = c.structure.unwrap();
    assert_eq!((s.p, s.q), (1, 1));
    assert!((s.eta_plus() - 1.0).abs() < 1e-10);
    assert!((s.eta_minus() + 1.0).abs() < 1e-10);
    assert!((s.start_rate - 1.0).abs() < 1e-10);
    assert!((s.end_rate - 1.5).abs() < 1e-10);
    let w = &s.end_eigenvalues;
    assert!((w[0] - 3.0).abs() < 1e-10 && (w[1] - 1.5).abs() < 1e-10 && (w[2] + 1.5).abs() < 1e-10);
    assert!((&s.end_basis - DMatrix::identity(3, 3)).amax() < 1e-12);
}

#[test]
fn longer_horizon_loses_distinctness_near_one() {
    let c = classify(&problems::linear_turning(2.0));
    let d = c.report.check(names::DISTINCT).unwrap();
    assert_eq!(d.verdict, Verdict::Fail);
    assert!((d.witness_t - 1.0).abs() < 1e-6, "{d:?}");
}

#[test]
fn regular_mass_matrix_fails_turning_point_checks() {
    let base = problems::get("ltp1").unwrap();
    // adding the identity's first row makes A(0,0) = I
    struct Shifted(std::sync::Arc<dyn turnlayer_core::EpsSeriesMatrix>);
    impl turnlayer_core::EpsSeriesMatrix for Shifted {
        fn dim(&self) -> usize {
            3
        }
        fn eval_jet(&self, t: &turnlayer_core::Jet, eps: &turnlayer_core::Jet) -> Vec<turnlayer_core::Jet> {
            let mut m = self.0.eval_jet(t, eps);
            m[0] = m[0] + 1.0;
            m
        }
    }
    let mut p = base.clone();
    p.a = std::sync::Arc::new(Shifted(base.a.clone()));
    let c = classify(&p);
    assert_eq!(c.report.check(names::SINGULAR_MASS).unwrap().verdict, Verdict::Fail);
    assert!(c.structure.is_none());
}

fn normal_pair() -> (DMatrix<f64>, DMatrix<f64>) {
    (
        DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 1.0])),
        DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, -1.0])),
    )
}

fn well_conditioned(entries: &[f64]) -> Option<DMatrix<f64>> {
    let m = DMatrix::from_row_slice(3, 3, entries) + DMatrix::identity(3, 3) * 2.0;
    let sv = m.clone().singular_values();
    (sv.min() > 0.3 && sv.max() / sv.min() < 50.0).then_some(m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn normalization_round_trip(
        l in proptest::collection::vec(-1.0f64..1.0, 9),
        r in proptest::collection::vec(-1.0f64..1.0, 9),
    ) {
        let (Some(left), Some(right)) = (well_conditioned(&l), well_conditioned(&r)) else {
            return Ok(());
        };
        let (a, j) = normal_pair();
        let a0 = &left * &a * &right;
        let j0 = &left * &j * &right;
        let norm = pencil::weierstrass_normalize(&a0, &j0, 1, 1).unwrap();
        let h = &norm.left * &a0 * &norm.right;
        let o = &norm.left * &j0 * &norm.right;
        prop_assert!((h - &a).amax() <= 1e-9);
        prop_assert!((o - &j).amax() <= 1e-9);
    }

    #[test]
    fn end_diagonalization_of_conjugated_matrix(r in proptest::collection::vec(-1.0f64..1.0, 9)) {
        let Some(s) = well_conditioned(&r) else { return Ok(()); };
        let s_inv = s.clone().try_inverse().unwrap();
        let g = &s * DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.5, -1.5])) * &s_inv;
        let (u, w) = pencil::diagonalize_at_end(&DMatrix::identity(3, 3), &g).unwrap();
        prop_assert!((w[0] - 3.0).abs() < 1e-9 && (w[1] - 1.5).abs() < 1e-9 && (w[2] + 1.5).abs() < 1e-9);
        let d = u.clone().try_inverse().unwrap() * &g * &u;
        prop_assert!((d - DMatrix::from_diagonal(&DVector::from_vec(w.clone()))).amax() <= 1e-9);
        // columns are parallel to those of S
        for i in 0..3 {
            let c = s.column(i).normalize();
            prop_assert!((c.dot(&u.column(i)).abs() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn finite_eigenvalues_are_roots(r in proptest::collection::vec(-1.0f64..1.0, 9), t in 0.01f64..0.5) {
        let Some(s) = well_conditioned(&r) else { return Ok(()); };
        let j = &s * DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0 + t, -(1.0 + t)]));
        let a = &s * DMatrix::from_diagonal(&DVector::from_vec(vec![t / (1.0 + t), 1.0, 1.0]));
        let spec = pencil::pencil_spectrum(&j, &a, 1e-10, t).unwrap();
        prop_assert_eq!(spec.finite.len() + spec.infinite_count, 3);
        for w in &spec.finite {
            let det = (&j - &a * w.re).determinant();
            prop_assert!(det.abs() <= 1e-8 * j.amax().powi(3) * 10.0);
        }
        for pair in spec.finite.windows(2) {
            prop_assert!(pair[0].re >= pair[1].re);
        }
    }
}
