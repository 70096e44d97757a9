use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {what} (got {value})")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("root bracketing failed at the {boundary} boundary: {detail}")]
    Bracket {
        boundary: &'static str,
        detail: String,
    },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e}, V = {voltage} V)")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        voltage: f64,
        /// Last iterate of the dimensionless potential.
        last_psi: Vec<f64>,
    },

    #[error("negative bracket in the {term} noise term ({value:.3e})")]
    NegativeBracket { term: &'static str, value: f64 },

    #[error("no depletion region: effective density undefined")]
    NoDepletion,

    #[error("constraint '{label}' is violated but has a vanishing scaled gradient")]
    DegenerateConstraint { label: String },

    #[error("starting point is infeasible after {attempts} projection sweeps (worst scaled violation {violation:.3e})")]
    Infeasible { attempts: usize, violation: f64 },

    #[error("objective evaluation failed: {0}")]
    Objective(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_positive(what: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { what, value })
    }
}
