//! Small dense helpers on top of nalgebra, plus a banded LU for the
//! collocation reference solver.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use nalgebra::{DMatrix, DVector};

pub(crate) fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn mat_max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// 2-norm condition number; `inf` for exactly singular input.
pub(crate) fn cond2(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    let sv = a.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub(crate) fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().lu().solve(b)
}

pub(crate) fn solve_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let lu = a.clone().lu();
    if !lu.is_invertible() {
        return None;
    }
    lu.solve(b)
}

pub(crate) fn inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    a.clone().try_inverse()
}

/// Right singular vectors for the smallest singular values.
///
/// Returns the unit vector for the smallest singular value together with the
/// smallest and second-smallest singular values (the latter `inf` for 1×1).
pub(crate) fn null_vector(a: &DMatrix<f64>) -> (DVector<f64>, f64, f64) {
    let n = a.ncols();
    // Pad to square so that nalgebra returns a full V.
    let sq = if a.nrows() < n {
        let mut m = DMatrix::zeros(n, n);
        m.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
        m
    } else {
        a.clone()
    };
    let svd = sq.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;
    let mut idx: Vec<usize> = (0..sv.len()).collect();
    idx.sort_by(|&i, &j| sv[i].partial_cmp(&sv[j]).unwrap_or(core::cmp::Ordering::Equal));
    let smallest = sv[idx[0]];
    let second = if idx.len() > 1 { sv[idx[1]] } else { f64::INFINITY };
    let v = v_t.row(idx[0]).transpose().into_owned();
    (v, smallest, second)
}

/// Unit Euclidean length with the first significant entry positive.
pub(crate) fn normalize_sign(v: &mut DVector<f64>) {
    let norm = v.norm();
    if norm == 0.0 {
        return;
    }
    *v /= norm;
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            v.neg_mut();
        }
    }
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
/// Intended for the small, moderately scaled blocks of the layer systems.
pub(crate) fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let norm = m.iter().fold(0.0, |acc: f64, x| acc.max(x.abs())) * n as f64;
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = m * scale;
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=14 {
        term = &term * &a / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).0
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Three-point Gauss–Legendre rule on [-1, 1] (exact through degree 5).
pub(crate) const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// Cubic Hermite interpolation on `[x0, x1]` from values and slopes.
pub(crate) fn hermite(
    x0: f64,
    x1: f64,
    y0: &DVector<f64>,
    d0: &DVector<f64>,
    y1: &DVector<f64>,
    d1: &DVector<f64>,
    x: f64,
) -> (DVector<f64>, DVector<f64>) {
    let h = x1 - x0;
    let s = (x - x0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let value = y0 * h00 + d0 * (h10 * h) + y1 * h01 + d1 * (h11 * h);
    let dh00 = (6.0 * s2 - 6.0 * s) / h;
    let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
    let dh01 = (-6.0 * s2 + 6.0 * s) / h;
    let dh11 = 3.0 * s2 - 2.0 * s;
    let slope = y0 * dh00 + d0 * dh10 + y1 * dh01 + d1 * dh11;
    (value, slope)
}

/// Lagrange weights (`deriv = 0`) or first-derivative weights (`deriv = 1`)
/// at `x` for arbitrary distinct nodes (Fornberg's recursion).
pub(crate) fn fornberg_weights(nodes: &[f64], x: f64, deriv: usize) -> Vec<f64> {
    let n = nodes.len();
    let m = deriv;
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Banded matrix with `kl` sub- and `ku` super-diagonals, factored in place
/// by Gaussian elimination with partial pivoting (LAPACK `gbtrf` layout).
pub(crate) struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandMatrix {
    pub(crate) fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            ldab,
            ab: vec![0.0; ldab * n],
            ipiv: vec![0; n],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        // Row kl + ku + i - j of column j in LAPACK band storage.
        j * self.ldab + (self.kl + self.ku + i - j)
    }

    pub(crate) fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j + self.kl >= i && i + self.ku >= j, "entry ({i},{j}) outside band");
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.ab[self.idx(i, j)]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.ab[k] = v;
    }

    /// LU factorization; returns `false` on an exactly zero pivot.
    pub(crate) fn factor(&mut self) -> bool {
        let n = self.n;
        let kl = self.kl;
        let kv = self.kl + self.ku;
        for j in 0..n {
            let last_row = (j + kl).min(n - 1);
            let mut p = j;
            let mut pmax = self.get(j, j).abs();
            for i in j + 1..=last_row {
                let v = self.get(i, j).abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            self.ipiv[j] = p;
            if pmax == 0.0 {
                return false;
            }
            let last_col = (j + kv).min(n - 1);
            if p != j {
                for c in j..=last_col {
                    let a = self.get(j, c);
                    let b = self.get(p, c);
                    self.set(j, c, b);
                    self.set(p, c, a);
                }
            }
            let piv = self.get(j, j);
            for i in j + 1..=last_row {
                let l = self.get(i, j) / piv;
                self.set(i, j, l);
                if l != 0.0 {
                    for c in j + 1..=last_col {
                        let v = self.get(i, c) - l * self.get(j, c);
                        self.set(i, c, v);
                    }
                }
            }
        }
        true
    }

    pub(crate) fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let kl = self.kl;
        let kv = self.kl + self.ku;
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let last_row = (j + kl).min(n - 1);
            let bj = b[j];
            for i in j + 1..=last_row {
                b[i] -= self.get(i, j) * bj;
            }
        }
        for j in (0..n).rev() {
            let last_col = (j + kv).min(n - 1);
            let mut s = b[j];
            for c in j + 1..=last_col {
                s -= self.get(j, c) * b[c];
            }
            b[j] = s / self.get(j, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_solver_matches_dense() {
        let n = 12;
        let (kl, ku) = (2, 3);
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut dense = DMatrix::<f64>::zeros(n, n);
        let mut seed = 7u64;
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let v = ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
                // small diagonal forces pivoting
                let v = if i == j { 0.01 * v } else { v };
                band.add(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let rhs = DVector::from_fn(n, |i, _| (i as f64).sin());
        assert!(band.factor());
        let mut x = rhs.as_slice().to_vec();
        band.solve_in_place(&mut x);
        let xd = solve(&dense, &rhs).unwrap();
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() < 1e-10 * (1.0 + xd[i].abs()));
        }
    }

    #[test]
    fn expm_of_jordan_block() {
        let m = DMatrix::from_row_slice(2, 2, &[-1.5, 1.0, 0.0, -1.5]);
        let e = expm(&(m * 3.0));
        let ex = (-4.5f64).exp();
        assert!((e[(0, 0)] - ex).abs() < 1e-14);
        assert!((e[(0, 1)] - 3.0 * ex).abs() < 1e-14);
        assert!(e[(1, 0)].abs() < 1e-16);
    }

    #[test]
    fn fornberg_derivative_of_cubic_is_exact() {
        let nodes = [0.0, 0.1, 0.35, 0.4, 0.9];
        let f = |x: f64| 2.0 * x * x * x - x + 1.0;
        let w = fornberg_weights(&nodes, 0.35, 1);
        let d: f64 = nodes.iter().zip(&w).map(|(x, w)| w * f(*x)).sum();
        assert!((d - (6.0 * 0.35 * 0.35 - 1.0)).abs() < 1e-12);
        let w0 = fornberg_weights(&nodes, 0.2, 0);
        let v: f64 = nodes.iter().zip(&w0).map(|(x, w)| w * f(*x)).sum();
        assert!((v - f(0.2)).abs() < 1e-13);
    }
}
