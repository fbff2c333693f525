//! Exact solution of the linear example by quadrature.
//!
//! Each component of the linear example is a scalar linear equation
//! `ε a(t) y' = b(t) (y − s(t))` with one boundary value, so with
//! `v = y − s` and `Φ' = b/a`:
//!
//! ```text
//! v(t) = v(t_b) e^{(Φ(t) − Φ(t_b))/ε} + ∫_t^{t_b} e^{(Φ(t) − Φ(u))/ε} s'(u) du
//! ```
//!
//! The substitution `w = |Φ(u) − Φ(t)|/ε` turns the integral into
//! `∫ e^{−w} s'(u(w)) ε/|Φ'(u(w))| dw`, which composite Gauss–Legendre handles
//! uniformly in `ε`.
#![allow(dead_code)]

use nalgebra::DVector;

const GL5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// `∫_0^upper e^{−w} g(w) dw` with the tail beyond `w = 45` dropped.
fn damped_integral(upper: f64, g: impl Fn(f64) -> f64) -> f64 {
    let upper = upper.min(45.0);
    if upper <= 0.0 {
        return 0.0;
    }
    let panels = ((upper / 0.25).ceil() as usize).max(1);
    let h = upper / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for &(x, w) in &GL5 {
            let s = mid + 0.5 * h * x;
            sum += 0.5 * h * w * (-s).exp() * g(s);
        }
    }
    sum
}

fn quad_phi(t: f64) -> f64 {
    t + 0.5 * t * t
}

fn quad_phi_inv(c: f64) -> f64 {
    -1.0 + (1.0 + 2.0 * c).sqrt()
}

fn log_phi(t: f64) -> f64 {
    t.ln() + t
}

/// Inverse of `ln u + u` by safeguarded Newton.
fn log_phi_inv(c: f64, guess: f64) -> f64 {
    let mut u = guess.max(1e-300);
    for _ in 0..100 {
        let step = (u.ln() + u - c) / (1.0 / u + 1.0);
        let next = if u - step <= 0.0 { 0.5 * u } else { u - step };
        if (next - u).abs() <= 1e-16 * u {
            return next;
        }
        u = next;
    }
    u
}

/// Exact solution of `ltp1` (horizon `1/2`) at `t`.
pub fn linear_exact(t: f64, eps: f64) -> DVector<f64> {
    let horizon = 0.5;
    let s = [1.0 + t * t, (-t).exp(), t.cos()];
    // component 1: ε t/(1+t) y' = y − s₁, value at T
    let v1 = if t <= 0.0 {
        0.0
    } else {
        let h = log_phi(t);
        let upper = (log_phi(horizon) - h) / eps;
        let boundary = 0.1 * (-upper).exp();
        boundary
            + damped_integral(upper, |w| {
                let u = log_phi_inv(h + eps * w, t);
                2.0 * u * eps * u / (1.0 + u)
            })
    };
    // component 2: ε y' = (1+t)(y − s₂), value at T
    let g = quad_phi(t);
    let upper = (quad_phi(horizon) - g) / eps;
    let v2 = 0.1 * (-upper).exp()
        + damped_integral(upper, |w| {
            let u = quad_phi_inv(g + eps * w);
            -(-u).exp() * eps / (1.0 + u)
        });
    // component 3: ε y' = −(1+t)(y − s₃), value at 0
    let upper = g / eps;
    let v3 = 0.1 * (-upper).exp()
        + damped_integral(upper, |w| {
            let u = quad_phi_inv(g - eps * w);
            u.sin() * eps / (1.0 + u)
        });
    DVector::from_vec(vec![s[0] + v1, s[1] + v2, s[2] + v3])
}
