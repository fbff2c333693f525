//! Structure of the pencil `f_x' − w A` at the turning point and along
//! `(0, T]`.
//!
//! At `t = 0` the pencil `J₀ − η A₀` (with `A₀ = A(0,0)`,
//! `J₀ = f_x'(x̄₀(0), 0, 0)`) must have one simple infinite eigenvalue and two
//! finite ones, `η₁` with positive and `η₂` with negative real part. The
//! normalizers `P, Q` bring it to
//! `P A₀ Q = diag(0, I)`, `P J₀ Q = diag(1, Λ₊, Λ₋)`.
//! At `t = T` the matrix `A⁻¹ f_x'` is diagonalized as `U diag(W) U⁻¹`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::BvpProblem;
use crate::regular::SeriesField;

trait Modulus {
    fn modulus(&self) -> f64;
}

impl Modulus for Complex<f64> {
    fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

/// Finite eigenvalues and the number of infinite ones of `J − w A`.
#[derive(Debug, Clone)]
pub struct PencilSpectrum {
    pub t: f64,
    /// Sorted by descending real part.
    pub finite: Vec<Complex<f64>>,
    pub infinite_count: usize,
}

const PROBE_SHIFTS: [f64; 5] = [0.318_309_886, -1.414_213_562, 2.718_281_828, -0.577_215_664, 7.389_056_099];

/// Eigenvalues of the pencil `J − w A`.
///
/// Uses shift-and-invert: with `K = (J − σA)⁻¹ A`, each finite `w` maps to
/// `μ = 1/(w − σ)` and infinite eigenvalues to `μ = 0`. An eigenvalue is
/// classified infinite when `|μ| < tol · ρ(K)`.
pub fn pencil_spectrum(j: &DMatrix<f64>, a: &DMatrix<f64>, tol: f64, t: f64) -> Result<PencilSpectrum> {
    let n = j.nrows();
    if j.shape() != (n, n) || a.shape() != (n, n) {
        return Err(Error::InvalidInput("pencil matrices must be square and equal size".into()));
    }
    let scale = linalg::mat_max_abs(j).max(linalg::mat_max_abs(a)).max(f64::MIN_POSITIVE);
    // Pick the best-conditioned shift; if none is usable the pencil is singular.
    let mut best: Option<(f64, f64)> = None;
    for &s in &PROBE_SHIFTS {
        let shifted = j - a * s;
        let rcond = 1.0 / linalg::cond2(&shifted);
        if best.map_or(true, |(_, r)| rcond > r) {
            best = Some((s, rcond));
        }
    }
    let (sigma, rcond) = best.expect("probe set is non-empty");
    if !(rcond > 1e-13) {
        return Err(Error::Structure(format!(
            "pencil is singular: det(J - wA) vanishes at every probe shift (scale {scale:e})"
        )));
    }
    let shifted = j - a * sigma;
    let k = linalg::solve_matrix(&shifted, a).ok_or_else(|| Error::Structure("shifted pencil is singular".into()))?;
    let mu = k.complex_eigenvalues();
    let rho = mu.iter().fold(0.0f64, |m, z| m.max(z.modulus()));
    let mut finite = Vec::new();
    let mut infinite_count = 0;
    for z in mu.iter() {
        if rho == 0.0 || z.modulus() < tol * rho {
            infinite_count += 1;
        } else {
            finite.push(Complex::new(sigma, 0.0) + Complex::new(1.0, 0.0) / z);
        }
    }
    sort_descending(&mut finite);
    Ok(PencilSpectrum { t, finite, infinite_count })
}

fn sort_descending(v: &mut [Complex<f64>]) {
    v.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(b.im.partial_cmp(&a.im).unwrap_or(core::cmp::Ordering::Equal))
    });
}

/// Normalizing transformation at the turning point.
#[derive(Debug, Clone)]
pub struct StartNormalization {
    /// Left factor `P`.
    pub left: DMatrix<f64>,
    /// Right factor `Q`; its first column spans `ker A₀`.
    pub right: DMatrix<f64>,
    /// `Λ₊ = η₁ I + N` (size `p`).
    pub growing_block: DMatrix<f64>,
    /// `Λ₋ = η₂ I + N` (size `q`).
    pub decaying_block: DMatrix<f64>,
    pub eta_plus: f64,
    pub eta_minus: f64,
}

/// Jordan chain of length `len` for the real eigenvalue `eta` of the pencil:
/// `(J − ηA) v₁ = 0`, `(J − ηA) v_j = A v_{j−1}`.
fn jordan_chain(a0: &DMatrix<f64>, j0: &DMatrix<f64>, eta: f64, len: usize) -> Result<Vec<DVector<f64>>> {
    let shifted = j0 - a0 * eta;
    let scale = linalg::mat_max_abs(&shifted).max(1.0);
    let (mut v1, smallest, second) = linalg::null_vector(&shifted);
    if smallest > 1e-6 * scale {
        return Err(Error::Structure(format!("eigenvalue {eta} is not an eigenvalue of the pencil (σ_min {smallest:e})")));
    }
    if len > 1 && second < 1e-8 * scale || len == 1 && second < 1e-6 * scale {
        return Err(Error::Structure(format!(
            "eigenvalue {eta} has more than one eigenvector; only single Jordan blocks are supported"
        )));
    }
    linalg::normalize_sign(&mut v1);
    let mut chain = Vec::with_capacity(len);
    chain.push(v1);
    let svd = shifted.clone().svd(true, true);
    for _ in 1..len {
        let rhs = a0 * chain.last().expect("non-empty chain");
        let v = svd
            .solve(&rhs, 1e-8 * scale)
            .map_err(|_| Error::Structure("Jordan chain solve failed".into()))?;
        let residual = linalg::inf_norm(&(&shifted * &v - &rhs));
        if residual > 1e-8 * scale.max(linalg::inf_norm(&rhs)) {
            return Err(Error::Structure(format!(
                "eigenvalue {eta}: Jordan chain shorter than the declared multiplicity {len}"
            )));
        }
        chain.push(v);
    }
    Ok(chain)
}

fn shift_block(eta: f64, len: usize) -> DMatrix<f64> {
    let mut m = DMatrix::from_diagonal_element(len, len, eta);
    for i in 0..len.saturating_sub(1) {
        m[(i, i + 1)] = 1.0;
    }
    m
}

/// Computes `P, Q` with `P A₀ Q = diag(0, I)` and `P J₀ Q = diag(1, Λ₊, Λ₋)`.
///
/// The pencil must have one simple infinite eigenvalue and the finite
/// eigenvalues `η₁` (multiplicity `p`, positive real part) and `η₂`
/// (multiplicity `q`, negative real part), each a single Jordan block.
/// Longer blocks are supported on a best-effort basis.
pub fn weierstrass_normalize(a0: &DMatrix<f64>, j0: &DMatrix<f64>, p: usize, q: usize) -> Result<StartNormalization> {
    let n = a0.nrows();
    if p + q + 1 != n {
        return Err(Error::Structure(format!("p + q = {} but n − 1 = {}", p + q, n - 1)));
    }
    let a_scale = linalg::mat_max_abs(a0).max(f64::MIN_POSITIVE);
    let sv = a0.clone().singular_values();
    let zero_count = sv.iter().filter(|&&s| s <= 1e-10 * a_scale).count();
    if zero_count != 1 {
        return Err(Error::Structure(format!(
            "A(0,0) has nullity {zero_count}; exactly one infinite elementary divisor is required"
        )));
    }
    let spectrum = pencil_spectrum(j0, a0, 1e-10, 0.0)?;
    if spectrum.infinite_count != 1 || spectrum.finite.len() != n - 1 {
        return Err(Error::Structure(format!(
            "infinite eigenvalue has multiplicity {} (one simple infinite divisor required)",
            spectrum.infinite_count
        )));
    }
    let plus: Vec<Complex<f64>> = spectrum.finite.iter().copied().filter(|z| z.re > 0.0).collect();
    let minus: Vec<Complex<f64>> = spectrum.finite.iter().copied().filter(|z| z.re < 0.0).collect();
    if plus.len() != p || minus.len() != q {
        return Err(Error::Structure(format!(
            "expected {p} eigenvalues with positive and {q} with negative real part, found {} and {}",
            plus.len(),
            minus.len()
        )));
    }
    let cluster = |v: &[Complex<f64>]| -> Result<f64> {
        let mean = v.iter().fold(Complex::new(0.0, 0.0), |s, z| s + z) / v.len() as f64;
        let spread = v.iter().fold(0.0f64, |m, z| m.max((z - mean).modulus()));
        if mean.im.abs() > 1e-8 * mean.modulus().max(1.0) {
            return Err(Error::Structure(format!("finite eigenvalue {mean} is not real")));
        }
        // A Jordan block of size m perturbs eigenvalues by O(u^{1/m}).
        let allowed = 1e-8f64.powf(1.0 / v.len() as f64) * 10.0 * mean.modulus().max(1.0);
        if spread > allowed {
            return Err(Error::Structure(format!(
                "eigenvalues in one half-plane are not equal (spread {spread:e})"
            )));
        }
        Ok(mean.re)
    };
    let eta_plus = cluster(&plus)?;
    let eta_minus = cluster(&minus)?;

    let (mut v_inf, _, _) = linalg::null_vector(a0);
    linalg::normalize_sign(&mut v_inf);
    let chain_plus = jordan_chain(a0, j0, eta_plus, p)?;
    let chain_minus = jordan_chain(a0, j0, eta_minus, q)?;

    let mut right = DMatrix::zeros(n, n);
    let mut image = DMatrix::zeros(n, n);
    right.set_column(0, &v_inf);
    image.set_column(0, &(j0 * &v_inf));
    for (i, v) in chain_plus.iter().chain(chain_minus.iter()).enumerate() {
        right.set_column(i + 1, v);
        image.set_column(i + 1, &(a0 * v));
    }
    let left = linalg::inverse(&image).ok_or_else(|| {
        Error::Structure("normalizing basis is singular (infinite divisor is not simple)".into())
    })?;
    if linalg::cond2(&image) > 1e12 || linalg::cond2(&right) > 1e12 {
        return Err(Error::Structure("normalizing transformation is ill-conditioned".into()));
    }

    let growing_block = shift_block(eta_plus, p);
    let decaying_block = shift_block(eta_minus, q);
    let mut h = DMatrix::identity(n, n);
    h[(0, 0)] = 0.0;
    let mut omega = DMatrix::zeros(n, n);
    omega[(0, 0)] = 1.0;
    omega.view_mut((1, 1), (p, p)).copy_from(&growing_block);
    omega.view_mut((1 + p, 1 + p), (q, q)).copy_from(&decaying_block);
    let err_h = linalg::mat_max_abs(&(&left * a0 * &right - &h));
    let err_o = linalg::mat_max_abs(&(&left * j0 * &right - &omega));
    if err_h > 1e-9 || err_o > 1e-9 {
        return Err(Error::Structure(format!(
            "normal form not attained (errors {err_h:e}, {err_o:e})"
        )));
    }
    Ok(StartNormalization {
        left,
        right,
        growing_block,
        decaying_block,
        eta_plus,
        eta_minus,
    })
}

/// Eigen-decomposition `A_T⁻¹ J_T = U diag(W) U⁻¹` with `W` real, distinct
/// and sorted descending; columns of `U` have unit length and a positive
/// leading entry.
pub fn diagonalize_at_end(a_t: &DMatrix<f64>, j_t: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = a_t.nrows();
    if linalg::cond2(a_t) > 1e12 {
        return Err(Error::Structure("A(T, 0) is singular".into()));
    }
    let g = linalg::solve_matrix(a_t, j_t).ok_or_else(|| Error::Structure("A(T, 0) is singular".into()))?;
    let mut eig: Vec<Complex<f64>> = g.clone().complex_eigenvalues().iter().copied().collect();
    sort_descending(&mut eig);
    let scale = eig.iter().fold(1.0f64, |m, z| m.max(z.modulus()));
    if let Some(z) = eig.iter().find(|z| z.im.abs() > 1e-10 * scale) {
        return Err(Error::Structure(format!(
            "eigenvalue {z} of A⁻¹f_x' at T is complex; only real spectra are supported"
        )));
    }
    let w: Vec<f64> = eig.iter().map(|z| z.re).collect();
    for i in 1..n {
        if (w[i - 1] - w[i]).abs() < 1e-8 * scale {
            return Err(Error::Structure(format!(
                "eigenvalues {} and {} of A⁻¹f_x' at T are not distinct",
                w[i - 1],
                w[i]
            )));
        }
    }
    let mut u = DMatrix::zeros(n, n);
    for (i, &wi) in w.iter().enumerate() {
        let shifted = &g - DMatrix::from_diagonal_element(n, n, wi);
        let (mut v, _, _) = linalg::null_vector(&shifted);
        linalg::normalize_sign(&mut v);
        u.set_column(i, &v);
    }
    let check = linalg::solve_matrix(&u, &(&g * &u)).ok_or_else(|| Error::Structure("eigenvector basis is singular".into()))?;
    let err = linalg::mat_max_abs(&(check - DMatrix::from_diagonal(&DVector::from_vec(w.clone()))));
    if err > 1e-9 * scale {
        return Err(Error::Structure(format!("diagonalization at T inaccurate ({err:e})")));
    }
    Ok((u, w))
}

/// Everything the layer and matching stages need about the pencil.
#[derive(Debug, Clone)]
pub struct PencilStructure {
    /// Number of growing directions at the turning point (`p`).
    pub p: usize,
    /// Number of decaying directions at the turning point (`q`).
    pub q: usize,
    pub start: StartNormalization,
    /// Eigenvector basis `U` of `A⁻¹ f_x'` at `T`.
    pub end_basis: DMatrix<f64>,
    /// Eigenvalues `W` at `T`, descending; the first `p + 1` are positive.
    pub end_eigenvalues: Vec<f64>,
    /// `min(η₁, −η₂)`.
    pub start_rate: f64,
    /// Smallest `|w_i(T)|`.
    pub end_rate: f64,
    /// `x̄₀(0)` and `x̄₀(T)`, the anchors of the layer problems.
    pub root_start: DVector<f64>,
    pub root_end: DVector<f64>,
}

impl PencilStructure {
    pub fn eta_plus(&self) -> f64 {
        self.start.eta_plus
    }

    pub fn eta_minus(&self) -> f64 {
        self.start.eta_minus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Untestable,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Untestable => "untestable",
        }
    }
}

/// One checked hypothesis with the scalar evidence behind the verdict.
#[derive(Debug, Clone)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub verdict: Verdict,
    pub witness_t: f64,
    pub witness_value: f64,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct StructureReport {
    pub checks: Vec<ConditionCheck>,
    pub grid: Vec<f64>,
}

impl StructureReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.verdict == Verdict::Pass)
    }

    pub fn check(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.checks.iter().filter(|c| c.verdict != Verdict::Pass)
    }
}

#[derive(Debug, Clone)]
pub struct Classification {
    /// `None` when the turning-point or end normalization could not be built.
    pub structure: Option<PencilStructure>,
    pub report: StructureReport,
}

pub const DEFAULT_T_FLOOR: f64 = 1e-3;
pub const DEFAULT_GRID: usize = 64;

pub mod names {
    pub const ISOLATED_ROOT: &str = "isolated_reduced_root";
    pub const SINGULAR_MASS: &str = "singular_mass_at_turning_point";
    pub const DIVISORS: &str = "pencil_divisor_structure";
    pub const DICHOTOMY: &str = "turning_point_dichotomy";
    pub const DISTINCT: &str = "distinct_eigenvalues";
    pub const GROWTH: &str = "turning_eigenvalue_growth";
    pub const SIGNS: &str = "eigenvalue_sign_pattern";
    pub const VANISHING: &str = "vanishing_eigenvalue_sign";
}

fn check(name: &'static str, ok: bool, t: f64, value: f64, detail: String) -> ConditionCheck {
    ConditionCheck {
        name,
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        witness_t: t,
        witness_value: value,
        detail,
    }
}

fn untestable(name: &'static str, detail: String) -> ConditionCheck {
    ConditionCheck {
        name,
        verdict: Verdict::Untestable,
        witness_t: f64::NAN,
        witness_value: f64::NAN,
        detail,
    }
}

/// Chebyshev–Lobatto points on `[lo, hi]`, increasing.
fn chebyshev_grid(lo: f64, hi: f64, size: usize) -> Vec<f64> {
    let m = size.max(2) - 1;
    (0..=m)
        .map(|j| {
            let c = (j as f64 * core::f64::consts::PI / m as f64).cos();
            lo + 0.5 * (hi - lo) * (1.0 - c)
        })
        .collect()
}

/// Real eigenvalues (descending) and unit eigenvectors of `A(t,0)⁻¹ f_x'`.
fn end_type_eigen(problem: &BvpProblem, reduced: &SeriesField, t: f64) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let a = problem.a_at(t, 0.0);
    let j = problem.f_jac(&reduced.eval(0, t), t, 0.0);
    let g = linalg::solve_matrix(&a, &j)?;
    let n = g.nrows();
    let mut eig: Vec<Complex<f64>> = g.clone().complex_eigenvalues().iter().copied().collect();
    sort_descending(&mut eig);
    let w: Vec<f64> = eig.iter().map(|z| z.re).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (i, &wi) in w.iter().enumerate() {
        let (v, _, _) = linalg::null_vector(&(&g - DMatrix::from_diagonal_element(n, n, wi)));
        vecs.set_column(i, &v);
    }
    Some((w, vecs))
}

fn complex_spectrum(problem: &BvpProblem, reduced: &SeriesField, t: f64) -> Option<Vec<Complex<f64>>> {
    let a = problem.a_at(t, 0.0);
    let j = problem.f_jac(&reduced.eval(0, t), t, 0.0);
    let g = linalg::solve_matrix(&a, &j)?;
    let mut eig: Vec<Complex<f64>> = g.complex_eigenvalues().iter().copied().collect();
    sort_descending(&mut eig);
    Some(eig)
}

/// Locates where the eigenvalue branches `i` and `k` (labelled by their
/// eigenvectors at `lo`) cross inside `[lo, hi]`.
fn locate_crossing(problem: &BvpProblem, reduced: &SeriesField, lo: f64, hi: f64, i: usize, k: usize) -> f64 {
    let (_, base) = match end_type_eigen(problem, reduced, lo) {
        Some(v) => v,
        None => return 0.5 * (lo + hi),
    };
    let branch_gap = |t: f64| -> f64 {
        let Some((w, vecs)) = end_type_eigen(problem, reduced, t) else {
            return 0.0;
        };
        let pick = |col: usize| -> f64 {
            let target = base.column(col);
            let mut best = 0;
            let mut best_overlap = -1.0;
            for c in 0..w.len() {
                let overlap = target.dot(&vecs.column(c)).abs();
                if overlap > best_overlap {
                    best_overlap = overlap;
                    best = c;
                }
            }
            w[best]
        };
        pick(i) - pick(k)
    };
    let (mut a, mut b) = (lo, hi);
    let ga = branch_gap(a);
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        let gm = branch_gap(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm > 0.0) == (ga > 0.0) {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Classifies the pencil and checks the structural hypotheses on the
/// `ε = 0` slice, using `grid_size` Chebyshev points on `[t_floor, T]`.
pub fn classify_and_verify(
    problem: &BvpProblem,
    reduced: &SeriesField,
    t_floor: f64,
    grid_size: usize,
) -> Result<Classification> {
    let n = problem.dim();
    let horizon = problem.horizon;
    if !(t_floor > 0.0 && t_floor < horizon) {
        return Err(Error::InvalidInput(format!("t_floor must lie in (0, T), got {t_floor}")));
    }
    let grid = chebyshev_grid(t_floor, horizon, grid_size);
    let mut checks = Vec::new();

    // Isolation of the reduced root: det f_x' ≠ 0 along [0, T].
    {
        let mut worst = (f64::INFINITY, 0.0);
        for &t in core::iter::once(&0.0).chain(grid.iter()) {
            let jac = problem.f_jac(&reduced.eval(0, t), t, 0.0);
            let rc = 1.0 / linalg::cond2(&jac);
            if rc < worst.0 {
                worst = (rc, t);
            }
        }
        checks.push(check(
            names::ISOLATED_ROOT,
            worst.0 > 1e-12,
            worst.1,
            worst.0,
            "minimum reciprocal condition number of f_x' along the reduced root".into(),
        ));
    }

    let x0 = reduced.eval(0, 0.0);
    let a0 = problem.a_at(0.0, 0.0);
    let j0 = problem.f_jac(&x0, 0.0, 0.0);
    let det_a0 = a0.clone().determinant();
    let a_scale = linalg::mat_max_abs(&a0).max(f64::MIN_POSITIVE);
    checks.push(check(
        names::SINGULAR_MASS,
        det_a0.abs() <= 1e-10 * a_scale.powi(n as i32),
        0.0,
        det_a0,
        "det A(0,0)".into(),
    ));

    // Divisor structure and dichotomy at the turning point.
    let mut p_q: Option<(usize, usize)> = None;
    let mut start_norm: Option<StartNormalization> = None;
    match pencil_spectrum(&j0, &a0, 1e-10, 0.0) {
        Ok(spec) => {
            let p = spec.finite.iter().filter(|z| z.re > 0.0).count();
            let q = spec.finite.iter().filter(|z| z.re < 0.0).count();
            let zero_re = spec.finite.len() - p - q;
            let dichotomy_margin = spec.finite.iter().fold(f64::INFINITY, |m, z| m.min(z.re.abs()));
            checks.push(check(
                names::DICHOTOMY,
                zero_re == 0 && p >= 1 && q >= 1,
                0.0,
                dichotomy_margin,
                format!("{p} finite eigenvalues with positive and {q} with negative real part"),
            ));
            match weierstrass_normalize(&a0, &j0, p, q) {
                Ok(norm) => {
                    checks.push(check(
                        names::DIVISORS,
                        true,
                        0.0,
                        spec.infinite_count as f64,
                        format!("one simple infinite divisor, η₁ = {}, η₂ = {}", norm.eta_plus, norm.eta_minus),
                    ));
                    p_q = Some((p, q));
                    start_norm = Some(norm);
                }
                Err(e) => checks.push(check(
                    names::DIVISORS,
                    false,
                    0.0,
                    spec.infinite_count as f64,
                    format!("{e}"),
                )),
            }
        }
        Err(e) => {
            checks.push(untestable(names::DICHOTOMY, format!("{e}")));
            checks.push(check(names::DIVISORS, false, 0.0, f64::NAN, format!("{e}")));
        }
    }

    // Distinctness and sign pattern of w_i(t, 0) on [t_floor, T].
    let mut spectra: Vec<Option<(Vec<f64>, DMatrix<f64>)>> = Vec::with_capacity(grid.len());
    let mut complex_at: Option<f64> = None;
    for &t in &grid {
        if let Some(eig) = complex_spectrum(problem, reduced, t) {
            let scale = eig.iter().fold(1.0f64, |m, z| m.max(z.modulus()));
            if complex_at.is_none() && eig.iter().any(|z| z.im.abs() > 1e-10 * scale) {
                complex_at = Some(t);
            }
        }
        spectra.push(end_type_eigen(problem, reduced, t));
    }
    if spectra.iter().any(|s| s.is_none()) || complex_at.is_some() {
        let why = match complex_at {
            Some(t) => format!("complex eigenvalues at t = {t}"),
            None => "A(t,0) singular on the grid".into(),
        };
        checks.push(untestable(names::DISTINCT, why.clone()));
        checks.push(untestable(names::SIGNS, why.clone()));
        checks.push(untestable(names::GROWTH, why));
    } else {
        let spectra: Vec<(Vec<f64>, DMatrix<f64>)> = spectra.into_iter().map(|s| s.expect("checked")).collect();
        // smallest relative gap on the grid
        let mut min_gap = (f64::INFINITY, 0.0);
        for (idx, (w, _)) in spectra.iter().enumerate() {
            let scale = w.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for i in 1..n {
                let gap = (w[i - 1] - w[i]).abs() / scale;
                if gap < min_gap.0 {
                    min_gap = (gap, grid[idx]);
                }
            }
        }
        // branch crossings between grid points, detected by eigenvector tracking
        let mut crossing: Option<f64> = None;
        'scan: for idx in 0..spectra.len() - 1 {
            let (_, va) = &spectra[idx];
            let (_, vb) = &spectra[idx + 1];
            for i in 0..n {
                let mut best = i;
                let mut best_overlap = -1.0;
                for c in 0..n {
                    let ov = va.column(i).dot(&vb.column(c)).abs();
                    if ov > best_overlap {
                        best_overlap = ov;
                        best = c;
                    }
                }
                if best != i {
                    crossing = Some(locate_crossing(problem, reduced, grid[idx], grid[idx + 1], i, best));
                    break 'scan;
                }
            }
        }
        match crossing {
            Some(tc) => checks.push(check(
                names::DISTINCT,
                false,
                tc,
                0.0,
                format!("eigenvalue branches cross near t = {tc:.6}"),
            )),
            None => checks.push(check(
                names::DISTINCT,
                min_gap.0 > 1e-8,
                min_gap.1,
                min_gap.0,
                "minimum relative gap between eigenvalues of A⁻¹f_x' on the grid".into(),
            )),
        }

        match p_q {
            Some((p, _)) => {
                let mut worst = (f64::INFINITY, 0.0);
                let mut violation: Option<(f64, f64)> = None;
                for (idx, (w, _)) in spectra.iter().enumerate() {
                    let positive = w.iter().filter(|&&v| v > 0.0).count();
                    let margin = w.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
                    if positive != p + 1 && violation.is_none() {
                        violation = Some((positive as f64, grid[idx]));
                    }
                    if margin < worst.0 {
                        worst = (margin, grid[idx]);
                    }
                }
                let ok = violation.is_none();
                if let Some(v) = violation {
                    worst = v;
                }
                checks.push(check(
                    names::SIGNS,
                    ok,
                    worst.1,
                    worst.0,
                    format!("exactly {} eigenvalues with positive real part required", p + 1),
                ));
            }
            None => checks.push(untestable(names::SIGNS, "turning-point structure unavailable".into())),
        }

        // the eigenvalue that blows up at the turning point should grow like 1/t
        let w_lo = end_type_eigen(problem, reduced, t_floor).map(|(w, _)| w[0]);
        let w_mid = end_type_eigen(problem, reduced, 2.0 * t_floor).map(|(w, _)| w[0]);
        match (w_lo, w_mid) {
            (Some(a), Some(b)) if b != 0.0 => {
                let ratio = a / b;
                checks.push(check(
                    names::GROWTH,
                    (1.6..=2.4).contains(&ratio),
                    t_floor,
                    ratio,
                    "ratio of the largest eigenvalue at t_floor and 2·t_floor (≈ 2 for 1/t growth)".into(),
                ));
            }
            _ => checks.push(untestable(names::GROWTH, "A(t,0) singular near t_floor".into())),
        }
    }

    // Sign of the eigenvalue of (f_x')⁻¹A that vanishes at the turning point.
    {
        let mut worst = (f64::INFINITY, 0.0);
        let mut ok = true;
        for &t in &grid {
            let a = problem.a_at(t, 0.0);
            let j = problem.f_jac(&reduced.eval(0, t), t, 0.0);
            let Some(m) = linalg::solve_matrix(&j, &a) else {
                ok = false;
                worst = (f64::NAN, t);
                break;
            };
            let eig = m.complex_eigenvalues();
            let theta = eig
                .iter()
                .copied()
                .min_by(|a, b| a.modulus().partial_cmp(&b.modulus()).unwrap_or(core::cmp::Ordering::Equal))
                .expect("non-empty spectrum");
            if theta.re < worst.0 {
                worst = (theta.re, t);
            }
            if !(theta.re > 0.0) {
                ok = false;
            }
        }
        checks.push(check(
            names::VANISHING,
            ok,
            worst.1,
            worst.0,
            "minimum real part of the smallest eigenvalue of (f_x')⁻¹A".into(),
        ));
    }

    let structure = match (p_q, start_norm) {
        (Some((p, q)), Some(start)) => {
            let x_end = reduced.eval(0, horizon);
            let a_t = problem.a_at(horizon, 0.0);
            let j_t = problem.f_jac(&x_end, horizon, 0.0);
            match diagonalize_at_end(&a_t, &j_t) {
                Ok((u, w)) => {
                    let start_rate = start.eta_plus.min(-start.eta_minus);
                    let end_rate = w.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
                    let positive = w.iter().filter(|&&v| v > 0.0).count();
                    if positive != p + 1 {
                        None
                    } else {
                        Some(PencilStructure {
                            p,
                            q,
                            start,
                            end_basis: u,
                            end_eigenvalues: w,
                            start_rate,
                            end_rate,
                            root_start: x0.clone(),
                            root_end: x_end,
                        })
                    }
                }
                Err(_) => None,
            }
        }
        _ => None,
    };

    Ok(Classification {
        structure,
        report: StructureReport { checks, grid },
    })
}

/// Convenience: the structure, or an error listing the failed hypotheses.
pub fn require_structure(classification: Classification) -> Result<PencilStructure> {
    if !classification.report.all_pass() {
        let failed: Vec<&str> = classification.report.failures().map(|c| c.name).collect();
        return Err(Error::ConditionsViolated(failed.join(", ")));
    }
    classification
        .structure
        .ok_or_else(|| Error::Structure("normalization at T failed".into()))
}
