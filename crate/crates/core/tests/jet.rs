use proptest::prelude::*;
use turnlayer_core::Jet;

const ORDER: usize = 6;

fn jet() -> impl Strategy<Value = Jet> {
    proptest::collection::vec(-2.0f64..2.0, ORDER + 1).prop_map(|c| Jet::from_coeffs(&c, ORDER))
}

fn positive_jet() -> impl Strategy<Value = Jet> {
    (0.5f64..3.0, proptest::collection::vec(-1.0f64..1.0, ORDER))
        .prop_map(|(c0, rest)| {
            let mut c = vec![c0];
            c.extend(rest);
            Jet::from_coeffs(&c, ORDER)
        })
}

fn close(a: &Jet, b: &Jet, tol: f64) -> bool {
    a.coeffs().iter().zip(b.coeffs()).all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
}

/// Taylor coefficients of `g(c0 + c1 ε)` given `g^{(k)}(c0)`.
fn linear_argument(c1: f64, derivs: impl Fn(usize) -> f64) -> Jet {
    let mut coeffs = vec![0.0; ORDER + 1];
    let mut fact = 1.0;
    for (k, slot) in coeffs.iter_mut().enumerate() {
        if k > 0 {
            fact *= k as f64;
        }
        *slot = derivs(k) * c1.powi(k as i32) / fact;
    }
    Jet::from_coeffs(&coeffs, ORDER)
}

proptest! {
    #[test]
    fn ring_laws(a in jet(), b in jet(), c in jet()) {
        prop_assert!(close(&((a * b) * c), &(a * (b * c)), 1e-12));
        prop_assert!(close(&(a * (b + c)), &(a * b + a * c), 1e-12));
        prop_assert!(close(&(a * b), &(b * a), 1e-14));
    }

    #[test]
    fn reciprocal_and_division(a in positive_jet(), b in jet()) {
        let one = Jet::constant(1.0, ORDER);
        prop_assert!(close(&(a * a.recip()), &one, 1e-11));
        prop_assert!(close(&((b / a) * a), &b, 1e-10));
    }

    #[test]
    fn exp_ln_inverse(a in positive_jet(), b in jet()) {
        prop_assert!(close(&a.ln().exp(), &a, 1e-10));
        prop_assert!(close(&(b.scale(0.5)).exp().ln(), &b.scale(0.5), 1e-10));
        prop_assert!(close(&(b.exp() * b.scale(-1.0).exp()), &Jet::constant(1.0, ORDER), 1e-10));
    }

    #[test]
    fn trigonometric_identities(a in jet()) {
        let (s, c) = a.sin_cos();
        prop_assert!(close(&(s * s + c * c), &Jet::constant(1.0, ORDER), 1e-10));
        prop_assert!(close(&s, &a.sin(), 0.0));
    }

    #[test]
    fn roots_and_powers(a in positive_jet()) {
        let r = a.sqrt();
        prop_assert!(close(&(r * r), &a, 1e-10));
        prop_assert!(close(&a.powi(3), &(a * a * a), 1e-11));
    }

    #[test]
    fn elementary_functions_match_taylor(c0 in -1.0f64..1.0, c1 in -1.0f64..1.0) {
        let x = Jet::variable(c0, c1, ORDER);
        let e = linear_argument(c1, |_| c0.exp());
        prop_assert!(close(&x.exp(), &e, 1e-12));
        let s = linear_argument(c1, |k| match k % 4 { 0 => c0.sin(), 1 => c0.cos(), 2 => -c0.sin(), _ => -c0.cos() });
        prop_assert!(close(&x.sin(), &s, 1e-12));
    }

    #[test]
    fn evaluation_is_the_truncated_sum(a in jet(), eps in -0.5f64..0.5) {
        let direct: f64 = a.coeffs().iter().enumerate().map(|(k, c)| c * eps.powi(k as i32)).sum();
        prop_assert!((a.eval(eps) - direct).abs() <= 1e-12);
    }
}
