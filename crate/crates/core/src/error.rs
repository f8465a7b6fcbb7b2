//! Error type shared by every numerical routine in the crate.

use thiserror::Error;

/// Failures reported by the library.
///
/// Variants separate caller mistakes (`InvalidArgument`) from numerical
/// failures (`NonConvergence`, `Stiffness`, `Bracket`) so the command-line
/// runner can map them onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integrator step size underflow at r = {r:.6e} (state: {state})")]
    Stiffness { r: f64, state: String },

    #[error(
        "no eigenvalue bracket found up to lambda = {lambda_hi:.6e}; try a larger upper bound"
    )]
    Bracket { lambda_hi: f64 },

    #[error("did not converge: {what} (iterations: {iterations}, last measure: {last:.3e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        last: f64,
    },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv failure: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn no_convergence(what: impl Into<String>, iterations: usize, last: f64) -> Self {
        Error::NonConvergence {
            what: what.into(),
            iterations,
            last,
        }
    }

    /// True for failures caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Stiffness { .. }
                | Error::Bracket { .. }
                | Error::NonConvergence { .. }
                | Error::Singular(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
