//! Adaptive Dormand–Prince 5(4) stepping for the small linear layer systems.

use nalgebra::DVector;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            rtol: 1e-12,
            atol: 1e-14,
            max_steps: 100_000,
        }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B_HI: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B_LO: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = rhs(s, y)` from `from` to `to` (either direction).
pub(crate) fn integrate<F>(mut rhs: F, from: f64, to: f64, y0: &DVector<f64>, ctl: &StepControl) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    let span = to - from;
    if span == 0.0 || y0.is_empty() {
        return Ok(y0.clone());
    }
    let dir = span.signum();
    let mut s = from;
    let mut y = y0.clone();
    let mut h = span.abs().min(0.1) * dir;
    let mut k: [DVector<f64>; 7] = core::array::from_fn(|_| DVector::zeros(y.len()));
    k[0] = rhs(s, &y);
    for _ in 0..ctl.max_steps {
        if (to - s) * dir <= 0.0 {
            return Ok(y);
        }
        if (s + h - to) * dir > 0.0 {
            h = to - s;
        }
        for i in 1..7 {
            let mut yi = y.clone();
            for j in 0..i {
                if A[i][j] != 0.0 {
                    yi += &k[j] * (h * A[i][j]);
                }
            }
            k[i] = rhs(s + C[i] * h, &yi);
        }
        let mut y_hi = y.clone();
        let mut err = DVector::zeros(y.len());
        for i in 0..7 {
            if B_HI[i] != 0.0 {
                y_hi += &k[i] * (h * B_HI[i]);
            }
            let e = B_HI[i] - B_LO[i];
            if e != 0.0 {
                err += &k[i] * (h * e);
            }
        }
        let mut norm: f64 = 0.0;
        for i in 0..y.len() {
            let scale = ctl.atol + ctl.rtol * y[i].abs().max(y_hi[i].abs());
            norm = norm.max((err[i] / scale).abs());
        }
        if norm <= 1.0 {
            s += h;
            y = y_hi;
            k[0] = k[6].clone();
            let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
        } else {
            let factor = if norm.is_finite() { (0.9 * norm.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h *= factor;
        }
        if h.abs() < 1e-14 * (1.0 + s.abs()) {
            return Err(Error::StepUnderflow { sigma: s });
        }
    }
    Err(Error::StepUnderflow { sigma: s })
}
