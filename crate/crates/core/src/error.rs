use thiserror::Error;

/// Errors surfaced by the numerical pipeline.
///
/// The CLI maps these onto exit codes: configuration problems exit with 2,
/// numerical failures (non-convergence, degeneracy, blow-up) with 3 and
/// violated experiment properties with 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("map is discontinuous at x = {0}; one-sided limits are -1/2 (right) and 1/2 (left)")]
    AtDiscontinuity(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("value {value} lies outside the branch image [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("cylinder level {requested} exceeds the supported maximum {max}")]
    Resource { requested: usize, max: usize },

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:.3e}, tol {tol:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    #[error("correlation series not Cauchy after {terms} terms (last increment {last_increment:.3e})")]
    Truncation { terms: usize, last_increment: f64 },

    #[error("observable is not centered: |int psi h dx| = {0:.3e} exceeds 1e-6")]
    NotCentered(f64),

    #[error("degenerate variance sigma^2 = {sigma2:.3e}: the observable is a coboundary up to a constant; run the coboundary check instead of a CLT")]
    DegenerateVariance { sigma2: f64 },

    #[error("trajectory state became non-finite at step {step}")]
    BlowUp { step: usize },

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("property violation in {experiment}: {detail}")]
    PropertyViolation { experiment: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code contract used by the CLI harness.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::ConfigParse(_) | Error::Precondition(_) => 2,
            Error::NoConvergence { .. }
            | Error::Truncation { .. }
            | Error::DegenerateVariance { .. }
            | Error::BlowUp { .. }
            | Error::NotCentered(_)
            | Error::Numerical(_)
            | Error::FitFailure(_) => 3,
            Error::PropertyViolation { .. } => 4,
            _ => 1,
        }
    }
}
