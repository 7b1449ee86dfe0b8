use num_complex::Complex64;
use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-generic parameters (ab = {ab}, t = {t}): {detail}")]
    NonGenericPhase { ab: f64, t: f64, detail: String },

    #[error("branch collision while continuing roots towards z = {z}")]
    BranchCollision { z: Complex64 },

    #[error("cannot assign discriminant roots to branch points: {0}")]
    RootAssignment(String),

    #[error("quadrature did not reach tolerance: {0}")]
    Quadrature(String),

    #[error("tail estimate {estimate:e} exceeds budget {budget:e} at truncation {cutoff}")]
    TailBudgetExceeded {
        estimate: f64,
        budget: f64,
        cutoff: f64,
    },

    #[error("gram matrix is ill-conditioned (condition estimate {cond:e})")]
    IllConditioned { cond: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("determinant underflow in ensemble density")]
    DegenerateDeterminant,

    #[error("infeasible measure triple: {0}")]
    Infeasible(String),

    #[error("invalid grid: {0}")]
    Grid(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by invalid user input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::Grid(_) | Error::Infeasible(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
