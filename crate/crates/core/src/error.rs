use thiserror::Error;

pub type Result<T> = std::result::Result<T, PlapError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlapError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("root isolation failed in piece {piece} on [{from}, {to}]: {reason}")]
    RootIsolation {
        piece: usize,
        from: f64,
        to: f64,
        reason: String,
    },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("source is not integrable near {side} endpoint (estimated blow-up exponent {exponent:.3})")]
    NonIntegrableSource { side: &'static str, exponent: f64 },

    #[error("root finder did not converge: bracket [{lo:e}, {hi:e}], last residual {residual:e}")]
    RootNotConverged { lo: f64, hi: f64, residual: f64 },

    #[error("weight has a nonzero negative part")]
    NegativePart,

    #[error("weight has no positive part")]
    ZeroPositivePart,

    #[error("no cone lower bound found: {0}")]
    NoConeEntry(String),

    #[error("iteration did not converge after {iterations} steps (last gap {gap:e}, best residual {best_residual:e})")]
    NonConvergence {
        iterations: usize,
        gap: f64,
        best_residual: f64,
    },

    #[error("hypothesis failed: {0}")]
    HypothesisFailed(String),

    #[error("Newton iteration failed: residual history {history:?}")]
    NewtonFailure { history: Vec<f64> },

    #[error("eigen iteration stagnated after {iterations} steps (last change {change:e})")]
    Stagnation { iterations: usize, change: f64 },

    #[error("envelope bound violated at xi = {xi:e}: f = {value:e} not in [{lower:e}, {upper:e}]")]
    EnvelopeViolation {
        xi: f64,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("profile is not positive at interior node x = {x} (value {value:e})")]
    NonPositive { x: f64, value: f64 },
}
