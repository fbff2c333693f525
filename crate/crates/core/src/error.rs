//! Error type shared by every stage of the construction.

use alloc::string::String;

/// Failures of the asymptotic construction and the reference solver.
///
/// Variants that correspond to a violated structural hypothesis of the
/// problem (rather than misuse of the API) report `true` from
/// [`Error::is_condition_violation`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("requested order {requested} exceeds the declared smoothness {available} of {what}")]
    Capability {
        what: &'static str,
        requested: usize,
        available: usize,
    },
    #[error("unknown problem `{name}`; available: {available}")]
    NotFound { name: String, available: String },
    #[error("pencil structure: {0}")]
    Structure(String),
    #[error("reduced equation: Newton failed to converge at t = {t} (residual {residual:e})")]
    ReducedSolve { t: f64, residual: f64 },
    #[error("reduced root is not isolated at t = {t}: Jacobian is singular")]
    Isolation { t: f64 },
    #[error("{what} is ill-conditioned at t = {t} (condition number {cond:e})")]
    IllConditioned { what: &'static str, t: f64, cond: f64 },
    #[error("algebraic layer component: Newton failed at stretched time {sigma} (residual {residual:e})")]
    AlgebraicLayer { sigma: f64, residual: f64 },
    #[error("successive approximations do not contract (ratio {ratio:.3} after {iterations} iterations)")]
    Contraction { iterations: usize, ratio: f64 },
    #[error("turning-point degeneracy: leading coefficient {value:e} at stretched time {sigma}")]
    TurningDegeneracy { sigma: f64, value: f64 },
    #[error("layer integration step underflow at stretched time {sigma}")]
    StepUnderflow { sigma: f64 },
    #[error("matching matrix is singular (condition number {cond:e})")]
    MatchingSingular { cond: f64 },
    #[error("leading-order matching did not converge (residual {residual:e})")]
    MatchingDiverged { residual: f64 },
    #[error("order-{order} matching system is singular (condition number {cond:e})")]
    HigherMatchSingular { order: usize, cond: f64 },
    #[error("reference solver stagnated after {iterations} Newton steps (residual {residual:e}); try a finer mesh")]
    ReferenceStagnation { iterations: usize, residual: f64 },
    #[error("reference solver Jacobian is singular")]
    ReferenceSingular,
    #[error("structural conditions violated: {0}")]
    ConditionsViolated(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// True when the failure means the problem does not satisfy the
    /// hypotheses of the construction.
    pub fn is_condition_violation(&self) -> bool {
        !matches!(
            self,
            Error::NotFound { .. } | Error::InvalidInput(_) | Error::Capability { .. }
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;
